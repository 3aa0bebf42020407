"""Pairwise polychoric correlation by marginal plug-in maximum likelihood.

Cut points are taken as given (plugged in from the method-of-moments
estimates); only the latent correlation is optimized, over the
contingency table of two ordinal variables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .statprims import bivariate_norm_cdf

__all__ = [
    "PairTable",
    "PolychoricFit",
    "UndefinedCorrelationError",
    "pair_log_likelihood",
    "fit_pair",
]

_RHO_BOUND = 1.0 - 1e-6
_PROB_FLOOR = 1e-300
_SCAN = np.arange(-0.95, 0.951, 0.05)


class UndefinedCorrelationError(ValueError):
    """Raised when a table has a constant margin, so no correlation is
    identified."""


@dataclass(frozen=True)
class PairTable:
    """Contingency table of two Likert variables with equal category count."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if not np.issubdtype(counts.dtype, np.integer):
            raise ValueError("counts must be integers")
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError("counts must be a square matrix")
        if np.any(counts < 0) or counts.sum() == 0:
            raise ValueError("counts must be nonnegative with positive total")
        object.__setattr__(self, "counts", counts.astype(np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_responses(cls, y1, y2, num_categories: int) -> "PairTable":
        y1 = np.asarray(y1, dtype=np.int64)
        y2 = np.asarray(y2, dtype=np.int64)
        counts = np.zeros((num_categories, num_categories), dtype=np.int64)
        np.add.at(counts, (y1 - 1, y2 - 1), 1)
        return cls(counts)


@dataclass(frozen=True)
class PolychoricFit:
    rho: float
    log_likelihood: float
    converged: bool


def _validate_cuts(cuts, num_categories: int, which: str) -> np.ndarray:
    cuts = np.asarray(cuts, dtype=float)
    if cuts.ndim != 1 or cuts.shape[0] != num_categories - 1:
        raise ValueError(f"{which} must have num_categories - 1 entries")
    if not np.all(np.diff(cuts) > 0.0):
        raise ValueError(f"{which} must be strictly increasing")
    return cuts


def _cell_probs(cuts1: np.ndarray, cuts2: np.ndarray, rho: float) -> np.ndarray:
    a = np.concatenate([[-np.inf], cuts1, [np.inf]])
    b = np.concatenate([[-np.inf], cuts2, [np.inf]])
    F = bivariate_norm_cdf(a[:, None], b[None, :], rho)
    return F[1:, 1:] - F[:-1, 1:] - F[1:, :-1] + F[:-1, :-1]


def pair_log_likelihood(table: PairTable, cuts1, cuts2, rho: float) -> float:
    """Multinomial log likelihood of the table at correlation rho.

    Parameters
    ----------
    table : PairTable
    cuts1, cuts2 : array_like
        Strictly increasing thresholds for the row and column variables.
    rho : float
        |rho| <= 1 - 1e-6.

    Returns
    -------
    float
        Sum of count * log(cell probability); cell probabilities are
        rectangle masses of the bivariate normal between consecutive
        thresholds (outermost bounds at +-infinity) and are floored at
        1e-300 inside the log.
    """
    K = table.counts.shape[0]
    cuts1 = _validate_cuts(cuts1, K, "cuts1")
    cuts2 = _validate_cuts(cuts2, K, "cuts2")
    if abs(rho) > _RHO_BOUND:
        raise ValueError("|rho| must be at most 1 - 1e-6")
    probs = _cell_probs(cuts1, cuts2, rho)
    return float(np.sum(table.counts * np.log(np.maximum(probs, _PROB_FLOOR))))


def fit_pair(table: PairTable, cuts1, cuts2) -> PolychoricFit:
    """Maximize the plug-in likelihood over the correlation.

    Scans rho over a 0.05 grid on [-0.95, 0.95] to bracket the optimum
    (sparse tables can have flat stretches), then refines with bounded
    scalar minimization to a 1e-6 tolerance.

    Parameters
    ----------
    table : PairTable
    cuts1, cuts2 : array_like
        Plug-in thresholds, strictly increasing.

    Returns
    -------
    PolychoricFit
        converged is False only if the refinement hit its 200-iteration
        cap.

    Raises
    ------
    UndefinedCorrelationError
        If either margin of the table is concentrated in one category.
    """
    counts = table.counts
    if np.count_nonzero(counts.sum(axis=1)) < 2 or np.count_nonzero(counts.sum(axis=0)) < 2:
        raise UndefinedCorrelationError(
            "undefined correlation: a variable is constant in the table"
        )
    K = counts.shape[0]
    cuts1 = _validate_cuts(cuts1, K, "cuts1")
    cuts2 = _validate_cuts(cuts2, K, "cuts2")

    def neg_ll(rho: float) -> float:
        probs = _cell_probs(cuts1, cuts2, rho)
        return -float(np.sum(counts * np.log(np.maximum(probs, _PROB_FLOOR))))

    scan_vals = np.array([neg_ll(r) for r in _SCAN])
    best = int(np.argmin(scan_vals))
    lo = _SCAN[best - 1] if best > 0 else -_RHO_BOUND
    hi = _SCAN[best + 1] if best < len(_SCAN) - 1 else _RHO_BOUND
    res = minimize_scalar(
        neg_ll,
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-6, "maxiter": 200},
    )
    rho = float(np.clip(res.x, -_RHO_BOUND, _RHO_BOUND))
    return PolychoricFit(rho, -neg_ll(rho), bool(res.success))

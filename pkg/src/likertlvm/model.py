"""Latent variable model for longitudinal Likert data.

Each observed response is a coarsened view of a latent variable

    X_ijt = sigma_j * Z_i + tau_j * e_it + gamma_j * eps_ijt

with Z (person signal), e (occasion-specific transient error), and eps
(measurement error) independent standard normals and loadings normalized
so every item has unit total variance. Categories come from item-specific
cut points on the latent scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _structfit

__all__ = [
    "ModelParams",
    "CutPointSet",
    "LikertDataset",
    "LatentDataset",
    "build_covariance",
    "simulate",
    "canonicalize",
]

_DISK_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Signal and transient-error loadings for J items.

    Parameters
    ----------
    sigma : array_like, shape (J,)
        Signal loadings.
    tau : array_like, shape (J,)
        Transient-error loadings; signs are meaningful relative to each
        other, only the two global signs are unidentified.

    Notes
    -----
    Measurement-error loadings are derived: gamma_j^2 = 1 - sigma_j^2 -
    tau_j^2, which the disk constraint sigma_j^2 + tau_j^2 <= 1 keeps
    nonnegative.
    """

    sigma: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        tau = np.asarray(self.tau, dtype=float)
        if sigma.ndim != 1 or tau.ndim != 1 or sigma.shape != tau.shape:
            raise ValueError("sigma and tau must be 1-D vectors of equal length")
        if sigma.shape[0] < 2:
            raise ValueError("the model needs at least 2 items")
        if not (np.all(np.isfinite(sigma)) and np.all(np.isfinite(tau))):
            raise ValueError("loadings must be finite")
        if np.any(sigma**2 + tau**2 > 1.0 + _DISK_TOL):
            raise ValueError("sigma_j^2 + tau_j^2 must not exceed 1")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "tau", tau)

    @property
    def num_items(self) -> int:
        return self.sigma.shape[0]

    @property
    def gamma(self) -> np.ndarray:
        """Measurement-error loadings sqrt(1 - sigma^2 - tau^2)."""
        return np.sqrt(np.clip(1.0 - self.sigma**2 - self.tau**2, 0.0, None))


@dataclass(frozen=True)
class CutPointSet:
    """Per-item thresholds separating adjacent response categories.

    `cuts` has shape (J, C) with strictly increasing rows; C cuts produce
    C + 1 categories.
    """

    cuts: np.ndarray

    def __post_init__(self):
        cuts = np.asarray(self.cuts, dtype=float)
        if cuts.ndim != 2 or cuts.shape[1] < 1:
            raise ValueError("cuts must be a J x C matrix with C >= 1")
        if not np.all(np.isfinite(cuts)):
            raise ValueError("cut points must be finite")
        if not np.all(np.diff(cuts, axis=1) > 0.0):
            raise ValueError("each item's cut points must be strictly increasing")
        object.__setattr__(self, "cuts", cuts)

    @property
    def num_items(self) -> int:
        return self.cuts.shape[0]

    @property
    def num_categories(self) -> int:
        return self.cuts.shape[1] + 1


@dataclass(frozen=True)
class LikertDataset:
    """Observed categorical panel: responses[i, j, t] in 1..num_categories."""

    responses: np.ndarray
    num_categories: int

    def __post_init__(self):
        resp = np.asarray(self.responses)
        if not np.issubdtype(resp.dtype, np.integer):
            resp = resp.astype(np.int64, casting="unsafe")
        if resp.ndim != 3:
            raise ValueError("responses must have shape (n, J, T)")
        n, J, T = resp.shape
        if n < 1 or J < 2 or T < 2:
            raise ValueError("need n >= 1, J >= 2, and T >= 2 occasions")
        if self.num_categories < 2:
            raise ValueError("num_categories must be at least 2")
        if resp.min() < 1 or resp.max() > self.num_categories:
            raise ValueError("responses must lie in 1..num_categories")
        object.__setattr__(self, "responses", resp)

    @property
    def num_subjects(self) -> int:
        return self.responses.shape[0]

    @property
    def num_items(self) -> int:
        return self.responses.shape[1]

    @property
    def num_times(self) -> int:
        return self.responses.shape[2]


@dataclass(frozen=True)
class LatentDataset:
    """Continuous latent panel aligned with a LikertDataset."""

    latent: np.ndarray

    def __post_init__(self):
        latent = np.asarray(self.latent, dtype=float)
        if latent.ndim != 3:
            raise ValueError("latent must have shape (n, J, T)")
        if not np.all(np.isfinite(latent)):
            raise ValueError("latent values must be finite")
        object.__setattr__(self, "latent", latent)

    @property
    def num_subjects(self) -> int:
        return self.latent.shape[0]


def build_covariance(params: ModelParams, T: int) -> np.ndarray:
    """Covariance of the stacked latent vector over J items and T occasions.

    Parameters
    ----------
    params : ModelParams
    T : int
        Number of occasions, at least 1.

    Returns
    -------
    ndarray, shape (J*T, J*T)
        Symmetric with unit diagonal. Coordinates are item-major within
        occasion: position t*J + j (0-based). Same-occasion blocks have
        off-diagonals sigma_j sigma_k + tau_j tau_k; cross-occasion blocks
        are sigma_j sigma_k throughout.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    return _structfit.structured_cov(params.sigma, params.tau, T)


def simulate(
    params: ModelParams,
    cuts: CutPointSet,
    n: int,
    T: int,
    seed: int,
) -> tuple[LatentDataset, LikertDataset]:
    """Draw a latent panel and its coarsened Likert observations.

    Parameters
    ----------
    params : ModelParams
    cuts : CutPointSet
        Must cover the same items as `params`.
    n : int
        Number of subjects, at least 1.
    T : int
        Number of occasions.
    seed : int
        Seed for the dedicated generator; fixed seed gives identical data.

    Returns
    -------
    (LatentDataset, LikertDataset)
    """
    if cuts.num_items != params.num_items:
        raise ValueError("params and cuts must cover the same items")
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    J = params.num_items
    z = rng.standard_normal(n)
    e = rng.standard_normal((n, T))
    eps = rng.standard_normal((n, J, T))
    x = (
        params.sigma[None, :, None] * z[:, None, None]
        + params.tau[None, :, None] * e[:, None, :]
        + params.gamma[None, :, None] * eps
    )
    y = np.empty((n, J, T), dtype=np.int64)
    for j in range(J):
        # category k+1 for z_k <= x < z_{k+1}: count cuts at or below x
        y[:, j, :] = np.searchsorted(cuts.cuts[j], x[:, j, :], side="right") + 1
    return LatentDataset(x), LikertDataset(y, cuts.num_categories)


def _canonical_sign(v: np.ndarray) -> float:
    total = float(np.sum(v))
    if total != 0.0:
        return 1.0 if total > 0.0 else -1.0
    nonzero = v[v != 0.0]
    if nonzero.size == 0:
        return 1.0
    return 1.0 if nonzero[0] > 0.0 else -1.0


def canonicalize(params: ModelParams) -> ModelParams:
    """Resolve the two global sign ambiguities.

    Flips sigma and tau independently so each sums to a nonnegative value
    (first nonzero entry decides ties). The implied covariance is
    unchanged since it depends only on the outer products.
    """
    return ModelParams(
        _canonical_sign(params.sigma) * params.sigma,
        _canonical_sign(params.tau) * params.tau,
    )

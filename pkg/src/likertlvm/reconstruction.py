"""Correlation reconstruction and minimum-distance recovery of loadings.

All pairwise polychoric fits are assembled into one correlation matrix
over the (item, occasion) coordinates; the loadings are then recovered by
minimizing the Frobenius distance between that matrix and the structured
model covariance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._structfit import block_sums, disk_projector, minimize_spg, structured_cov
from .cutpoints import CutPointEstimate
from .model import LikertDataset, ModelParams, canonicalize
from .polychoric import PairTable, UndefinedCorrelationError, fit_pair

__all__ = ["ReconstructedCorrelation", "FitResult", "reconstruct", "fit_frobenius"]

_MAX_ITER = 10_000
_GRAD_TOL = 1e-8


@dataclass(frozen=True)
class ReconstructedCorrelation:
    """Matrix of pairwise polychoric correlations over item-occasion
    coordinates (position t*J + j, item-major within occasion)."""

    matrix: np.ndarray
    num_items: int
    num_times: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        d = self.num_items * self.num_times
        if m.shape != (d, d):
            raise ValueError("matrix shape must be (J*T, J*T)")
        if not np.allclose(m, m.T, atol=1e-12):
            raise ValueError("matrix must be symmetric")
        if not np.allclose(np.diag(m), 1.0, atol=1e-12):
            raise ValueError("matrix must have unit diagonal")
        if np.any(np.abs(m) > 1.0 + 1e-12):
            raise ValueError("entries must lie in [-1, 1]")
        object.__setattr__(self, "matrix", m)

    def same_time_block(self, t: int) -> np.ndarray:
        J = self.num_items
        return self.matrix[t * J : (t + 1) * J, t * J : (t + 1) * J]

    def cross_time_block(self, s: int, t: int) -> np.ndarray:
        if s == t:
            raise ValueError("cross-occasion block needs s != t")
        J = self.num_items
        return self.matrix[s * J : (s + 1) * J, t * J : (t + 1) * J]


@dataclass(frozen=True)
class FitResult:
    """Recovered loadings with the attained Frobenius distance H."""

    params: ModelParams
    objective: float
    gamma_sq: np.ndarray
    converged: bool


def reconstruct(data: LikertDataset, cuts: CutPointEstimate) -> ReconstructedCorrelation:
    """Fit every pairwise polychoric correlation and assemble the matrix.

    Parameters
    ----------
    data : LikertDataset
    cuts : CutPointEstimate
        Pooled estimates are plugged into each pairwise likelihood.

    Returns
    -------
    ReconstructedCorrelation

    Raises
    ------
    UndefinedCorrelationError
        If any pair's table has a constant margin; the message names the
        offending (item, occasion) pair.
    """
    resp = data.responses
    n, J, T = resp.shape
    pooled = cuts.pooled
    if pooled.shape[0] != J:
        raise ValueError("cut estimate covers a different number of items")
    d = J * T
    out = np.eye(d)
    coords = [(j, t) for t in range(T) for j in range(J)]
    for p in range(d):
        j, t = coords[p]
        for q in range(p + 1, d):
            k, s = coords[q]
            table = PairTable.from_responses(
                resp[:, j, t], resp[:, k, s], data.num_categories
            )
            try:
                fit = fit_pair(table, pooled[j], pooled[k])
            except UndefinedCorrelationError as exc:
                raise UndefinedCorrelationError(
                    f"{exc} [item {j + 1} time {t + 1} vs item {k + 1} time {s + 1}]"
                ) from None
            out[p, q] = out[q, p] = fit.rho
    return ReconstructedCorrelation(out, J, T)


def _fit_starts(target: np.ndarray, J: int, T: int) -> list[np.ndarray]:
    if T > 1:
        acc = np.zeros(J)
        for s in range(T):
            for t in range(T):
                if s != t:
                    acc += np.diag(target[s * J : (s + 1) * J, t * J : (t + 1) * J])
        diag_mean = acc / (T * (T - 1))
    else:
        diag_mean = np.zeros(J)
    sig0 = np.sqrt(np.clip(diag_mean, 0.0, 1.0))
    alternating = 0.3 * (-1.0) ** np.arange(J)
    return [
        np.concatenate([np.full(J, 0.5), np.full(J, 0.5)]),
        np.concatenate([sig0, np.zeros(J)]),
        np.concatenate([sig0, np.full(J, 0.3)]),
        np.concatenate([sig0, alternating]),
        np.zeros(2 * J),
    ]


def _frobenius_fun_grad(target: np.ndarray, J: int, T: int):
    """Squared-distance objective and analytic gradient in theta =
    [sigma; tau]. The diagonal is excluded from the residual; it is
    identically matched by construction.
    """

    def fun_grad(theta: np.ndarray) -> tuple[float, np.ndarray]:
        sig = theta[:J]
        tau = theta[J:]
        resid = target - structured_cov(sig, tau, T)
        np.fill_diagonal(resid, 0.0)
        h = float(np.sum(resid * resid))
        full, same = block_sums(resid, J, T)
        return h, np.concatenate([-4.0 * (full @ sig), -4.0 * (same @ tau)])

    return fun_grad


def fit_frobenius(recon, J: int, T: int) -> FitResult:
    """Recover loadings by minimum Frobenius distance to the model
    structure.

    Parameters
    ----------
    recon : ReconstructedCorrelation or ndarray
        Target matrix; an ndarray is accepted directly (it must be
        symmetric with unit diagonal).
    J, T : int
        Item and occasion counts; must match the target's shape.

    Returns
    -------
    FitResult
        Loadings are canonicalized; `objective` is the Frobenius distance
        H itself (not squared). The squared distance is minimized with
        analytic gradients under the per-item disk constraints, from five
        deterministic starts; a greedy per-coordinate sign sweep on tau
        then guards against sign-pattern basins. `converged` is False
        only if every local solve hit the iteration cap.

    Notes
    -----
    The target is used as-is even if indefinite; positive definiteness is
    not required by the distance fit.
    """
    target = recon.matrix if isinstance(recon, ReconstructedCorrelation) else np.asarray(recon, dtype=float)
    if target.shape != (J * T, J * T):
        raise ValueError("target shape must be (J*T, J*T)")

    fun_grad = _frobenius_fun_grad(target, J, T)
    project = disk_projector(J)
    best = None
    any_converged = False
    for x0 in _fit_starts(target, J, T):
        res = minimize_spg(fun_grad, x0, project, _MAX_ITER, _GRAD_TOL)
        any_converged = any_converged or res.converged
        if best is None or res.fun < best.fun:
            best = res

    # sign-pattern basins of tau are separated by saddles the descent
    # cannot cross; flip one coordinate at a time and keep improvements
    improved = True
    sweeps = 0
    while improved and sweeps < J:
        improved = False
        sweeps += 1
        for j in range(J):
            trial = best.x.copy()
            trial[J + j] = -trial[J + j]
            res = minimize_spg(fun_grad, trial, project, _MAX_ITER, _GRAD_TOL)
            if res.fun < best.fun - 1e-14:
                any_converged = any_converged or res.converged
                best = res
                improved = True

    params = canonicalize(ModelParams(best.x[:J], best.x[J:]))
    gamma_sq = 1.0 - params.sigma**2 - params.tau**2
    return FitResult(params, float(np.sqrt(max(best.fun, 0.0))), np.clip(gamma_sq, 0.0, None), any_converged)

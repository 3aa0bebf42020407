"""Stochastic EM estimation of loadings and cut points.

Each iteration imputes one latent panel consistent with the observed
categories (Gibbs draws from the truncated model normal), maximizes the
completed-data likelihood over the loadings, and updates the cut points
in closed form; final estimates average the post-burn-in trajectory.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ._structfit import block_sums, disk_projector, minimize_spg, structured_cov
from .cutpoints import estimate_cuts
from .model import (
    CutPointSet,
    LatentDataset,
    LikertDataset,
    ModelParams,
    build_covariance,
    canonicalize,
)
from .reconstruction import fit_frobenius, reconstruct
from .statprims import gibbs_truncated_mvn_batch

__all__ = [
    "StemConfig",
    "StemChain",
    "impute_latent",
    "maximize_q1",
    "update_cuts",
    "q1_objective",
    "run_stem",
]

_EIG_FLOOR = 1e-8
_PD_MIN = 1e-10
_BOX_MARGIN = 1e-6


@dataclass(frozen=True)
class StemConfig:
    """Settings for one stochastic EM run.

    burn_in defaults to 10% of the iteration count; set it to 0 to
    average the whole trajectory. init_params / init_cuts default to the
    reconstruction fit and the method-of-moments cuts.
    """

    iterations: int
    seed: int
    burn_in: int | None = None
    gibbs_sweeps: int = 10
    init_params: ModelParams | None = None
    init_cuts: CutPointSet | None = None
    inner_tol: float = 1e-6
    inner_max_iter: int = 500

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", self.iterations // 10)
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must lie in [0, iterations)")
        if self.gibbs_sweeps < 1:
            raise ValueError("gibbs_sweeps must be at least 1")


@dataclass(frozen=True)
class StemChain:
    """Recorded parameter trajectory plus the averaged final estimates.

    `objective` is the completed-data log likelihood of the final
    averaged loadings under the last iteration's imputation.
    """

    sigma_trace: np.ndarray
    tau_trace: np.ndarray
    cut_trace: np.ndarray
    final_params: ModelParams
    final_cuts: CutPointSet
    objective: float = 0.0
    log: tuple[str, ...] = field(default_factory=tuple)


def _padded_cuts(cuts: CutPointSet) -> np.ndarray:
    J = cuts.num_items
    return np.hstack(
        [np.full((J, 1), -np.inf), cuts.cuts, np.full((J, 1), np.inf)]
    )


def _boxes(data: LikertDataset, cuts: CutPointSet) -> tuple[np.ndarray, np.ndarray]:
    """Per-subject truncation bounds on the stacked (n, J*T) layout."""
    resp = data.responses
    n, J, T = resp.shape
    padded = _padded_cuts(cuts)
    item_idx = np.tile(np.arange(J), T)
    flat = resp.transpose(0, 2, 1).reshape(n, J * T)
    lower = padded[item_idx, flat - 1]
    upper = padded[item_idx, flat]
    return lower, upper


def _stack(latent: np.ndarray) -> np.ndarray:
    n, J, T = latent.shape
    return latent.transpose(0, 2, 1).reshape(n, J * T)


def _unstack(flat: np.ndarray, J: int, T: int) -> np.ndarray:
    n = flat.shape[0]
    return flat.reshape(n, T, J).transpose(0, 2, 1)


def _repaired_covariance(params: ModelParams, T: int) -> np.ndarray:
    sigma = build_covariance(params, T)
    eigvals = np.linalg.eigvalsh(sigma)
    if eigvals[0] > _PD_MIN:
        return sigma
    vals, vecs = np.linalg.eigh(sigma)
    vals = np.clip(vals, _EIG_FLOOR, None)
    repaired = (vecs * vals) @ vecs.T
    scale = 1.0 / np.sqrt(np.diag(repaired))
    repaired = repaired * np.outer(scale, scale)
    warnings.warn(
        "model covariance was not positive definite; eigenvalues floored "
        "and the diagonal rescaled",
        stacklevel=3,
    )
    return repaired


def impute_latent(
    data: LikertDataset,
    params: ModelParams,
    cuts: CutPointSet,
    prev: LatentDataset,
    rng: np.random.Generator,
    sweeps: int = 10,
) -> LatentDataset:
    """Draw one latent panel from its conditional given the responses.

    Parameters
    ----------
    data : LikertDataset
    params : ModelParams
        Current loadings; they define the latent covariance.
    cuts : CutPointSet
        Current thresholds; they define each subject's truncation box.
    prev : LatentDataset
        Warm start, one state per subject. Values that fell outside a
        box because the cuts moved are clamped to the interior first.
    rng : numpy.random.Generator
    sweeps : int
        Gibbs scans per subject.

    Returns
    -------
    LatentDataset
        One Gibbs state per subject, inside its truncation box.

    Notes
    -----
    A covariance that loses positive definiteness at the disk boundary
    (some gamma_j = 0) is repaired by flooring its eigenvalues at 1e-8
    and rescaling to unit diagonal, with a warning.
    """
    n, J, T = data.responses.shape
    sigma = _repaired_covariance(params, T)
    factor = cho_factor(sigma)
    precision = cho_solve(factor, np.eye(J * T))
    lower, upper = _boxes(data, cuts)
    start = _stack(prev.latent)
    width = upper - lower
    margin = np.where(np.isfinite(width), np.minimum(_BOX_MARGIN, 0.25 * width), _BOX_MARGIN)
    start = np.minimum(np.maximum(start, lower + margin), upper - margin)
    out = gibbs_truncated_mvn_batch(precision, lower, upper, start, sweeps, rng)
    return LatentDataset(_unstack(out, J, T))


def q1_objective(latent: LatentDataset, params: ModelParams) -> float:
    """Completed-data log likelihood term for the loadings (up to the
    additive constant): -(n/2) (log|Sigma| + tr(Sigma^{-1} S))."""
    x = _stack(latent.latent)
    n, d = x.shape
    T = d // params.num_items
    s_bar = (x.T @ x) / n
    sigma = structured_cov(params.sigma, params.tau, T)
    factor = cho_factor(sigma)
    logdet = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    trace = float(np.trace(cho_solve(factor, s_bar)))
    return -0.5 * n * (logdet + trace)


def maximize_q1(
    latent: LatentDataset,
    warm: ModelParams,
    tol: float = 1e-6,
    max_iter: int = 500,
) -> ModelParams:
    """Maximize the completed-data likelihood over the loadings.

    Parameters
    ----------
    latent : LatentDataset
    warm : ModelParams
        Start point, typically the previous iteration's estimate.
    tol : float
        Projected-gradient tolerance of the inner solver.
    max_iter : int
        Inner iteration cap; hitting it returns the best iterate with a
        warning.

    Returns
    -------
    ModelParams
        Canonicalized maximizer under the per-item disk constraints. The
        objective never falls below its value at the warm start.
    """
    x = _stack(latent.latent)
    n, d = x.shape
    J = warm.num_items
    T = d // J
    if J * T != d:
        raise ValueError("latent layout does not match the warm start's items")
    s_bar = (x.T @ x) / n
    eye = np.eye(d)

    def fun_grad(theta: np.ndarray) -> tuple[float, np.ndarray]:
        sig = theta[:J]
        tau = theta[J:]
        cov = structured_cov(sig, tau, T)
        try:
            factor = cho_factor(cov)
        except np.linalg.LinAlgError:
            return np.inf, np.zeros_like(theta)
        diag = np.diag(factor[0])
        if np.any(diag <= 0.0) or not np.all(np.isfinite(diag)):
            return np.inf, np.zeros_like(theta)
        inv = cho_solve(factor, eye)
        inv_s = inv @ s_bar
        f = 2.0 * float(np.sum(np.log(diag))) + float(np.trace(inv_s))
        W = inv - inv_s @ inv
        W = 0.5 * (W + W.T)
        np.fill_diagonal(W, 0.0)
        full, same = block_sums(W, J, T)
        return f, np.concatenate([2.0 * (full @ sig), 2.0 * (same @ tau)])

    x0 = np.concatenate([warm.sigma, warm.tau])
    res = minimize_spg(fun_grad, x0, disk_projector(J), max_iter, tol)
    if not res.converged:
        warnings.warn(
            "loading maximization stopped at its iteration cap; returning "
            "the best iterate",
            stacklevel=2,
        )
    return canonicalize(ModelParams(res.x[:J], res.x[J:]))


def update_cuts(
    latent: LatentDataset,
    data: LikertDataset,
    prev: CutPointSet | None = None,
) -> CutPointSet:
    """Closed-form cut update: the midpoint between the largest imputed
    value answering k and the smallest answering k+1.

    Parameters
    ----------
    latent : LatentDataset
        Current imputation, consistent with the data's categories.
    data : LikertDataset
    prev : CutPointSet, optional
        Fallback source when category k or k+1 is empty for an item;
        that cut is carried forward unchanged. Without a fallback an
        empty category raises.

    Returns
    -------
    CutPointSet
        Rows are strictly increasing whenever every category is occupied
        (midpoints are nested between occupied bands); carried-forward
        values preserve monotonicity because imputations respect the
        previous thresholds.
    """
    resp = data.responses
    x = latent.latent
    if x.shape != resp.shape:
        raise ValueError("latent and data shapes differ")
    n, J, T = resp.shape
    K = data.num_categories
    band_max = np.full((J, K), -np.inf)
    band_min = np.full((J, K), np.inf)
    for k in range(1, K + 1):
        mask = resp == k
        band_max[:, k - 1] = np.where(mask, x, -np.inf).max(axis=(0, 2))
        band_min[:, k - 1] = np.where(mask, x, np.inf).min(axis=(0, 2))
    new_cuts = 0.5 * (band_max[:, :-1] + band_min[:, 1:])
    empty = ~np.isfinite(new_cuts)
    if np.any(empty):
        if prev is None:
            raise ValueError(
                "empty response category and no previous cuts to carry forward"
            )
        if prev.cuts.shape != new_cuts.shape:
            raise ValueError("previous cuts have the wrong shape")
        new_cuts = np.where(empty, prev.cuts, new_cuts)
    return CutPointSet(new_cuts)


def _initial_latent(data: LikertDataset, cuts: CutPointSet) -> LatentDataset:
    lower, upper = _boxes(data, cuts)
    mid = np.where(
        np.isfinite(lower) & np.isfinite(upper),
        0.5 * (lower + upper),
        np.where(
            np.isfinite(lower),
            lower + 1.0,
            np.where(np.isfinite(upper), upper - 1.0, 0.0),
        ),
    )
    _, J, T = data.responses.shape
    return LatentDataset(_unstack(mid, J, T))


def run_stem(data: LikertDataset, config: StemConfig) -> StemChain:
    """Run the full stochastic EM chain.

    Parameters
    ----------
    data : LikertDataset
    config : StemConfig

    Returns
    -------
    StemChain
        Traces for every iteration plus final estimates equal to the
        post-burn-in trace means. Runs are reproducible from the seed:
        iteration r draws from a stream spawned as (seed, r). Warnings
        raised by the inner steps are collected into `log`.
    """
    n, J, T = data.responses.shape
    log: list[str] = []
    with warnings.catch_warnings(record=True) as captured:
        warnings.simplefilter("always")
        if config.init_cuts is not None:
            cuts = config.init_cuts
        else:
            cuts = estimate_cuts(data).as_cutpoints()
        if config.init_params is not None:
            params = config.init_params
        else:
            params = fit_frobenius(reconstruct(data, estimate_cuts(data)), J, T).params
    log.extend(str(w.message) for w in captured)

    if cuts.num_items != J or cuts.num_categories != data.num_categories:
        raise ValueError("initial cuts do not match the data's shape")
    if params.num_items != J:
        raise ValueError("initial params do not match the data's items")

    R = config.iterations
    C = data.num_categories - 1
    sigma_trace = np.empty((R, J))
    tau_trace = np.empty((R, J))
    cut_trace = np.empty((R, J, C))
    prev_latent = _initial_latent(data, cuts)

    for r in range(R):
        rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(r,)))
        with warnings.catch_warnings(record=True) as captured:
            warnings.simplefilter("always")
            latent = impute_latent(
                data, params, cuts, prev_latent, rng, sweeps=config.gibbs_sweeps
            )
            params = maximize_q1(latent, params, config.inner_tol, config.inner_max_iter)
            cuts = update_cuts(latent, data, prev=cuts)
        log.extend(f"iteration {r + 1}: {w.message}" for w in captured)
        prev_latent = latent
        sigma_trace[r] = params.sigma
        tau_trace[r] = params.tau
        cut_trace[r] = cuts.cuts

    keep = slice(config.burn_in, R)
    final_params = ModelParams(
        sigma_trace[keep].mean(axis=0), tau_trace[keep].mean(axis=0)
    )
    final_cuts = CutPointSet(cut_trace[keep].mean(axis=0))
    return StemChain(
        sigma_trace,
        tau_trace,
        cut_trace,
        final_params,
        final_cuts,
        q1_objective(prev_latent, final_params),
        tuple(log),
    )

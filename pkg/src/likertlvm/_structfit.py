"""Shared internals for fitting the structured covariance.

Holds the projected spectral gradient minimizer used by both covariance
fitters plus small helpers tied to the block layout. The minimizer is
monotone: every accepted step satisfies an Armijo condition along the
projected direction, so the objective never increases. Step lengths
follow Barzilai and Borwein between safeguards.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "SpgResult",
    "minimize_spg",
    "disk_projector",
    "block_sums",
    "structured_cov",
]

_ARMIJO = 1e-4
_STEP_MIN = 1e-12
_STEP_MAX = 1e4
_MAX_BACKTRACKS = 40


@dataclass
class SpgResult:
    x: np.ndarray
    fun: float
    converged: bool
    iterations: int


def disk_projector(J: int, radius: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """Projector for stacked loadings theta = [sigma; tau] of length 2J:
    each (sigma_j, tau_j) pair is pulled onto the disk of the given radius.
    """

    def project(theta: np.ndarray) -> np.ndarray:
        s = theta[:J]
        t = theta[J:]
        r = np.hypot(s, t)
        scale = np.where(r > radius, radius / np.maximum(r, 1e-300), 1.0)
        return np.concatenate([s * scale, t * scale])

    return project


def block_sums(W: np.ndarray, J: int, T: int) -> tuple[np.ndarray, np.ndarray]:
    """Sum a (J*T, J*T) matrix over its occasion blocks.

    Returns (full, same): full[j, k] sums W over all occasion pairs, same
    sums only matching occasions. Coordinates are item-major within
    occasion, matching build_covariance.
    """
    W4 = W.reshape(T, J, T, J)
    full = np.einsum("tjsk->jk", W4)
    same = np.einsum("tjtk->jk", W4)
    return full, same


def structured_cov(sigma: np.ndarray, tau: np.ndarray, T: int) -> np.ndarray:
    """Model covariance from raw loading vectors, without container
    validation; see model.build_covariance for the public contract.
    """
    J = sigma.shape[0]
    out = np.kron(np.ones((T, T)), np.outer(sigma, sigma))
    out += np.kron(np.eye(T), np.outer(tau, tau))
    idx = np.arange(J * T)
    out[idx, idx] = 1.0
    return out


def minimize_spg(
    fun_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    project: Callable[[np.ndarray], np.ndarray],
    max_iter: int,
    grad_tol: float,
    history: list[float] | None = None,
) -> SpgResult:
    """Minimize fun over a convex set given by a projection operator.

    Parameters
    ----------
    fun_grad : callable
        Maps x to (value, gradient). May return value = inf outside the
        region where the objective is defined; the line search treats
        that as a rejected step.
    x0 : ndarray
        Feasible start with finite value.
    project : callable
        Euclidean projection onto the feasible set.
    max_iter : int
        Outer iteration cap.
    grad_tol : float
        Stop when the unit-step projected gradient residual
        ||project(x - g) - x||_inf falls below this.
    history : list, optional
        Receives the objective value at the start and after every
        accepted step.

    Returns
    -------
    SpgResult
        converged is False only if the iteration cap was reached first.
    """
    x = project(np.asarray(x0, dtype=float))
    f, g = fun_grad(x)
    if not np.isfinite(f):
        raise ValueError("start point has non-finite objective")
    if history is not None:
        history.append(f)
    step = 1.0 / max(np.max(np.abs(g)), 1.0)
    step = min(max(step, _STEP_MIN), _STEP_MAX)
    stalled = 0
    for it in range(1, max_iter + 1):
        residual = np.max(np.abs(project(x - g) - x))
        if residual <= grad_tol:
            return SpgResult(x, f, True, it - 1)
        d = project(x - step * g) - x
        gd = float(g @ d)
        if gd >= 0.0:
            # projected direction lost descent (numerical corner); reset step
            step = _STEP_MIN
            d = project(x - step * g) - x
            gd = float(g @ d)
            if gd >= 0.0:
                return SpgResult(x, f, True, it - 1)
        lam = 1.0
        for _ in range(_MAX_BACKTRACKS):
            x_new = x + lam * d
            f_new, g_new = fun_grad(x_new)
            if np.isfinite(f_new) and f_new <= f + _ARMIJO * lam * gd:
                break
            lam *= 0.5
        else:
            return SpgResult(x, f, True, it)
        if history is not None:
            history.append(f_new)
        if np.array_equal(x_new, x):
            # no representable progress left
            return SpgResult(x, f, True, it)
        if f - f_new <= 1e-15 * max(1.0, abs(f)):
            stalled += 1
            if stalled >= 100:
                return SpgResult(x_new, f_new, True, it)
        else:
            stalled = 0
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 0.0:
            step = float(s @ s) / sy
        else:
            step = _STEP_MAX
        step = min(max(step, _STEP_MIN), _STEP_MAX)
        x, f, g = x_new, f_new, g_new
    return SpgResult(x, f, False, max_iter)

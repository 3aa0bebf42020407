"""Numerical primitives: normal CDF/quantile, bivariate normal CDF, and
truncated (multivariate) normal sampling.

The bivariate CDF follows the Drezner-Wesolowsky / Genz quadrature of the
derivative-in-correlation identity, with a transformed integral for high
correlations. Truncated sampling uses inverse-CDF arithmetic that stays on
the small side of the normal CDF, so intervals far out in a tail keep full
relative precision.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import ndtr, ndtri

__all__ = [
    "TruncationBox",
    "norm_cdf",
    "norm_quantile",
    "bivariate_norm_cdf",
    "sample_truncated_normal",
    "gibbs_truncated_mvn",
    "gibbs_truncated_mvn_batch",
]

_TWO_PI = 2.0 * np.pi

# 20-point Gauss-Legendre rule on [-1, 1], split in half as Genz does; the
# dot products below are order-insensitive so the halves are concatenated.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


@dataclass(frozen=True)
class TruncationBox:
    """Axis-aligned truncation region; coordinates may be +-inf."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise ValueError("lower and upper must be 1-D vectors of equal length")
        if not np.all(lower < upper):
            raise ValueError("every lower bound must be strictly below its upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x > self.lower) and np.all(x < self.upper))


def norm_cdf(x):
    """Standard normal CDF; accepts scalars or arrays, +-inf allowed."""
    return ndtr(x)


def norm_quantile(p):
    """Standard normal quantile for p in the open interval (0, 1).

    Parameters
    ----------
    p : float or array_like
        Probabilities, all strictly inside (0, 1).

    Returns
    -------
    float or ndarray
    """
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr <= 0.0) or np.any(p_arr >= 1.0):
        raise ValueError("probabilities must lie strictly inside (0, 1)")
    out = ndtri(p_arr)
    return float(out) if np.isscalar(p) or p_arr.ndim == 0 else out


def _bvnu(h, k, r: float):
    """Genz's upper-quadrant probability P(X > h, Y > k) for standard
    bivariate normal with correlation r, vectorized over finite h, k.

    Port of the bvnu routine from Genz's bvn.m (Drezner & Wesolowsky 1989,
    Drezner 1978); absolute accuracy is around 5e-16.
    """
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    # the formulas are symmetric in (h, k); order them so the branchy
    # high-correlation path is evaluated identically for swapped arguments
    h, k = np.minimum(h, k), np.maximum(h, k)
    hk = h * k

    x = 1.0 + _GL_X  # nodes mapped to [0, 2]
    w = _GL_W

    if abs(r) < 0.925:
        hs = 0.5 * (h * h + k * k)
        asr = 0.5 * np.arcsin(r)
        sn = np.sin(asr * x)
        integrand = np.exp((np.multiply.outer(hk, sn) - hs[..., None]) / (1.0 - sn**2))
        bvn = integrand @ w
        bvn = bvn * asr / _TWO_PI + ndtr(-h) * ndtr(-k)
        return np.clip(bvn, 0.0, 1.0)

    if r < 0.0:
        k = -k
        hk = -hk

    bvn = np.zeros(np.broadcast(h, k).shape)
    if abs(r) < 1.0:
        as_ = (1.0 - r) * (1.0 + r)
        a = np.sqrt(as_)
        bs = (h - k) ** 2
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 80.0
        asr = -0.5 * (bs / as_ + hk)
        m = asr > -100.0
        bvn = np.where(
            m,
            a * np.exp(asr) * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0 + c * d * as_**2),
            0.0,
        )
        m = hk > -100.0
        b = np.sqrt(bs)
        sp = np.sqrt(_TWO_PI) * ndtr(-b / a)
        bvn = bvn - np.where(m, np.exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0), 0.0)

        a = 0.5 * a
        xs = (a * x) ** 2  # (20,)
        asr = -0.5 * (np.divide.outer(bs, xs) + hk[..., None])
        sp = 1.0 + np.multiply.outer(c, xs) * (1.0 + 5.0 * np.multiply.outer(d, xs))
        rs = np.sqrt(1.0 - xs)
        ep = np.exp(-0.5 * np.multiply.outer(hk, xs / (1.0 + rs) ** 2)) / rs
        terms = np.where(asr > -100.0, np.exp(asr) * (sp - ep), 0.0)
        bvn = (a * (terms @ w) - bvn) / _TWO_PI

    if r > 0.0:
        bvn = bvn + ndtr(-np.maximum(h, k))
    else:
        # here k carries a flipped sign, so h >= k need not hold elementwise
        flip = h < k
        tail = np.where(
            h < 0.0,
            ndtr(k) - ndtr(h),
            ndtr(-h) - ndtr(-k),
        )
        bvn = np.where(flip, tail - bvn, -bvn)
    return np.clip(bvn, 0.0, 1.0)


def bivariate_norm_cdf(x, y, rho: float):
    """Bivariate standard normal CDF P(X <= x, Y <= y) at correlation rho.

    Parameters
    ----------
    x, y : float or array_like
        Upper integration limits; +-inf allowed and broadcast together.
    rho : float
        Correlation, |rho| <= 1 - 1e-10.

    Returns
    -------
    float or ndarray
        Probabilities, absolute error below 1e-10.
    """
    rho = float(rho)
    if abs(rho) > 1.0 - 1e-10:
        raise ValueError("|rho| must be at most 1 - 1e-10")
    scalar = np.isscalar(x) and np.isscalar(y)
    x_arr, y_arr = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    out = np.zeros(x_arr.shape)

    neg_inf = (x_arr == -np.inf) | (y_arr == -np.inf)
    x_pinf = x_arr == np.inf
    y_pinf = y_arr == np.inf
    core = ~neg_inf & ~x_pinf & ~y_pinf

    out[x_pinf & ~neg_inf] = ndtr(y_arr[x_pinf & ~neg_inf])
    out[y_pinf & ~neg_inf] = ndtr(x_arr[y_pinf & ~neg_inf])
    out[x_pinf & y_pinf] = 1.0
    if np.any(core):
        # P(X <= x, Y <= y) equals the upper quadrant of the negated pair
        out[core] = _bvnu(-x_arr[core], -y_arr[core], rho)
    return float(out) if scalar else out


def _sample_std_truncated(a, b, rng: np.random.Generator):
    """One draw per element from N(0,1) restricted to (a, b).

    Both bounds in the right tail use survival-function coordinates, so the
    arithmetic never subtracts numbers near 1; left-tail and straddling
    intervals are already well conditioned on the CDF scale.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    u = rng.random(np.broadcast(a, b).shape)

    right = a >= 0.0
    # survival coordinates: decreasing in x, so the interval maps to (Q(b), Q(a))
    qa = ndtr(-a)
    qb = ndtr(-b)
    pa = ndtr(a)
    pb = ndtr(b)
    with np.errstate(invalid="ignore"):
        x_right = -ndtri(qb + u * (qa - qb))
        x_plain = ndtri(pa + u * (pb - pa))
    x = np.where(right, x_right, x_plain)
    # keep draws strictly inside the open interval despite rounding
    x = np.minimum(np.maximum(x, np.nextafter(a, np.inf)), np.nextafter(b, -np.inf))
    return x


def sample_truncated_normal(mean, sd, lo, hi, rng: np.random.Generator):
    """Draw from a normal(mean, sd) restricted to the open interval (lo, hi).

    Parameters
    ----------
    mean, sd : float or array_like
        Location and scale, sd > 0.
    lo, hi : float or array_like
        Truncation bounds, lo < hi elementwise; +-inf allowed.
    rng : numpy.random.Generator
        Source of randomness; one draw is made per broadcast element.

    Returns
    -------
    float or ndarray
        Draws lying strictly inside (lo, hi); stable for intervals many
        standard deviations into a tail.
    """
    scalar = all(np.isscalar(v) for v in (mean, sd, lo, hi))
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(sd <= 0.0):
        raise ValueError("sd must be positive")
    if not np.all(lo < hi):
        raise ValueError("lo must be strictly below hi")
    a = (lo - mean) / sd
    b = (hi - mean) / sd
    z = _sample_std_truncated(a, b, rng)
    x = mean + sd * z
    x = np.minimum(np.maximum(x, np.nextafter(lo, np.inf)), np.nextafter(hi, -np.inf))
    return float(x) if scalar else x


def _validate_covariance(sigma: np.ndarray, min_eig: float = 1e-10) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError("Sigma must be square")
    if not np.allclose(sigma, sigma.T, atol=1e-12):
        raise ValueError("Sigma must be symmetric")
    if np.linalg.eigvalsh(sigma)[0] <= min_eig:
        raise ValueError("Sigma must be positive definite (min eigenvalue > 1e-10)")
    return sigma


def gibbs_truncated_mvn_batch(
    precision: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    start: np.ndarray,
    sweeps: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Run independent Gibbs chains that share one precision matrix.

    Parameters
    ----------
    precision : ndarray, shape (d, d)
        Inverse of the target covariance.
    lower, upper : ndarray, shape (m, d)
        Per-chain truncation bounds.
    start : ndarray, shape (m, d)
        Per-chain states strictly inside their boxes.
    sweeps : int
        Number of full systematic coordinate scans.
    rng : numpy.random.Generator

    Returns
    -------
    ndarray, shape (m, d)
        The chain states after the final sweep.
    """
    x = np.array(start, dtype=float)
    d = precision.shape[0]
    cond_sd = 1.0 / np.sqrt(np.diag(precision))
    for _ in range(sweeps):
        for j in range(d):
            t = x @ precision[:, j]
            mu = x[:, j] - t * cond_sd[j] ** 2
            a = (lower[:, j] - mu) / cond_sd[j]
            b = (upper[:, j] - mu) / cond_sd[j]
            z = _sample_std_truncated(a, b, rng)
            x[:, j] = mu + cond_sd[j] * z
    np.clip(x, np.nextafter(lower, np.inf), np.nextafter(upper, -np.inf), out=x)
    return x


def gibbs_truncated_mvn(
    Sigma: np.ndarray,
    box: TruncationBox,
    start,
    sweeps: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw from a multivariate normal N(0, Sigma) restricted to a box.

    Performs `sweeps` systematic scans of single-coordinate conditional
    draws; the coordinate conditionals come from the precision matrix,
    which is factored once per call.

    Parameters
    ----------
    Sigma : ndarray, shape (d, d)
        Positive definite covariance (min eigenvalue > 1e-10).
    box : TruncationBox
    start : array_like, shape (d,)
        Initial state strictly inside the box.
    sweeps : int
        Full coordinate scans to perform, at least 1.
    rng : numpy.random.Generator

    Returns
    -------
    ndarray, shape (d,)
        The state after the final sweep; always inside the box.
    """
    sigma = _validate_covariance(Sigma)
    if sigma.shape[0] != box.dim:
        raise ValueError("Sigma and box dimensions differ")
    start = np.asarray(start, dtype=float)
    if not box.contains(start):
        raise ValueError("start must lie strictly inside the box")
    if sweeps < 1:
        raise ValueError("sweeps must be at least 1")
    factor = cho_factor(sigma)
    precision = cho_solve(factor, np.eye(sigma.shape[0]))
    out = gibbs_truncated_mvn_batch(
        precision,
        box.lower[None, :],
        box.upper[None, :],
        start[None, :],
        sweeps,
        rng,
    )
    return out[0]

"""Inverse-normal method-of-moments estimation of item cut points.

Each threshold is the normal quantile of the adjusted empirical
probability of responding at or below a category; per-occasion estimates
are pooled by an unweighted mean because the thresholds do not vary over
time in the model.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import CutPointSet, LikertDataset
from .statprims import norm_quantile

__all__ = ["CutPointEstimate", "estimate_cuts"]

_TIE_BUMP = 1e-6


@dataclass(frozen=True)
class CutPointEstimate:
    """Method-of-moments cut estimates.

    per_time holds the occasion-specific estimates (J x C x T); pooled is
    their mean over occasions (J x C), with tied adjacent values repaired
    to keep rows usable as strictly increasing thresholds.
    """

    per_time: np.ndarray
    pooled: np.ndarray

    def as_cutpoints(self) -> CutPointSet:
        return CutPointSet(self.pooled)


def estimate_cuts(data: LikertDataset) -> CutPointEstimate:
    """Estimate all item thresholds from observed responses.

    Parameters
    ----------
    data : LikertDataset

    Returns
    -------
    CutPointEstimate
        Threshold k for item j at occasion t is the normal quantile of
        (#{i: Y_ijt <= k} + 1) / (n + 2); the +1/+2 adjustment keeps the
        argument inside (0, 1) so every estimate is finite. Pooled rows
        are nondecreasing by construction; exact ties (a category empty
        at every occasion) are separated by +1e-6 with a warning.
    """
    resp = data.responses
    n, J, T = resp.shape
    C = data.num_categories - 1
    per_time = np.empty((J, C, T))
    for k in range(1, C + 1):
        at_or_below = (resp <= k).sum(axis=0)  # (J, T)
        per_time[:, k - 1, :] = norm_quantile((at_or_below + 1.0) / (n + 2.0))
    pooled = per_time.mean(axis=2)
    for j in range(J):
        for k in range(1, C):
            if pooled[j, k] <= pooled[j, k - 1]:
                pooled[j, k] = pooled[j, k - 1] + _TIE_BUMP
                warnings.warn(
                    f"item {j + 1}: cut estimates {k} and {k + 1} tied "
                    "(empty category); upper value bumped by 1e-6",
                    stacklevel=2,
                )
    return CutPointEstimate(per_time, pooled)

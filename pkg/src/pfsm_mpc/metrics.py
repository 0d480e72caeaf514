"""Tracking-accuracy metrics for dual-axis trajectories.

Both metrics reduce the per-step Euclidean error norm over a run.  The RMSE
here is normalized by the reference energy and is therefore a dimensionless
ratio; the maximum absolute error is reported in microradians.
"""

from __future__ import annotations

import numpy as np

__all__ = ["rmse", "mae"]


def _check(desired, actual, warmup_skip):
    d = np.atleast_2d(np.asarray(desired, dtype=float))
    a = np.atleast_2d(np.asarray(actual, dtype=float))
    if d.shape != a.shape:
        raise ValueError("desired and actual trajectories must have equal shapes")
    if warmup_skip < 0 or warmup_skip >= d.shape[0]:
        raise ValueError("warmup skip must leave at least one sample")
    return d[warmup_skip:], a[warmup_skip:]


def rmse(desired: np.ndarray, actual: np.ndarray, warmup_skip: int = 0) -> float:
    """Normalized root-mean-square tracking error (dimensionless ratio).

    sqrt( sum_k ||theta_d(k) - theta(k)||^2 / sum_k ||theta_d(k)||^2 ).
    A reference with zero energy has no defined value and is rejected.
    """
    d, a = _check(desired, actual, warmup_skip)
    denom = float(np.sum(d * d))
    if denom == 0.0:
        raise ValueError("reference trajectory is identically zero; RMSE is undefined")
    return float(np.sqrt(np.sum((d - a) ** 2) / denom))


def mae(desired: np.ndarray, actual: np.ndarray, warmup_skip: int = 0) -> float:
    """Maximum per-step Euclidean error norm, in microradians (inputs in mrad)."""
    d, a = _check(desired, actual, warmup_skip)
    if d.shape[0] == 0:
        raise ValueError("trajectories must contain at least one sample")
    return float(np.max(np.linalg.norm(d - a, axis=1)) * 1.0e3)

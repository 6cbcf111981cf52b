"""Disparity error metrics."""

from __future__ import annotations

import numpy as np

from .core import DisparityField, ParameterError
from .hires_warp import make_hypotheses, upsample_disparity_nn


def _as_array(f) -> np.ndarray:
    return f.w if isinstance(f, DisparityField) else np.asarray(f, dtype=np.float64)


def rmse_plain(est, gt) -> float:
    """Root-mean-square difference of two equally sized fields."""
    a, b = _as_array(est), _as_array(gt)
    if a.shape != b.shape:
        raise ParameterError(f"field dimensions differ: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.sqrt(np.mean(d * d)))


def rmse_hypotheses(w_est: DisparityField, gt: DisparityField) -> float:
    """RMSE against a doubled-grid ground truth over all nine NN hypotheses.

    The estimate is NN-upsampled (which doubles its pixel-unit values) and the
    nine unit-shifted hypotheses are compared after conversion back to the
    ground truth's base-pixel units.
    """
    if w_est.upsampled:
        raise ParameterError("estimate must live on the base grid")
    if not gt.upsampled or gt.shape != (2 * w_est.height, 2 * w_est.width):
        raise ParameterError(
            f"ground truth must be exactly 2x the estimate, got {gt.shape} "
            f"for estimate {w_est.shape}"
        )
    hyp = make_hypotheses(upsample_disparity_nn(w_est))
    acc = 0.0
    for _, f in hyp:
        d = 0.5 * f - gt.w
        acc += float(np.sum(d * d))
    return float(np.sqrt(acc / (9.0 * gt.w.size)))

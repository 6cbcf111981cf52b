"""Disciplined warping at doubled resolution.

Disparity fields are not bandlimited, so instead of interpolating them we
upsample 2x with a nearest-neighbour policy, form the nine unit-shifted
hypothesis fields, warp the sinc-upsampled image with every hypothesis,
average the nine candidates, and sinc-decimate back to base resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import BaselineVec, DisparityField, ImageGrid, ParameterError
from .imgproc import decimate_sinc2, upsample_sinc2

SHIFTS = tuple((hy, hx) for hy in (-1, 0, 1) for hx in (-1, 0, 1))


def upsample_disparity_nn(w: DisparityField) -> DisparityField:
    """Replicate each pixel into a 2x2 block and double the values.

    Disparities are in pixel units, so doubling the sampling density doubles
    the displacement a given w represents.
    """
    if w.upsampled:
        raise ParameterError("field is already on the doubled grid")
    up = 2.0 * np.repeat(np.repeat(w.w, 2, axis=0), 2, axis=1)
    return DisparityField(up, upsampled=True)


@dataclass(frozen=True)
class HypothesisSet:
    """Nine unit-shifted copies w_h[m] = w[m + h], h in {-1,0,1}^2.

    Iteration follows the fixed shift order of ``SHIFTS`` (hy outer, hx inner).
    """

    fields: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.fields) != 9:
            raise ParameterError("a hypothesis set has exactly 9 fields")
        shape = self.fields[0].shape
        for f in self.fields:
            if f.shape != shape:
                raise ParameterError("hypothesis fields must share one shape")
        object.__setattr__(self, "fields", tuple(np.asarray(f, dtype=np.float64) for f in self.fields))

    def __iter__(self):
        return iter(zip(SHIFTS, self.fields))

    def field(self, hy: int, hx: int) -> np.ndarray:
        return self.fields[SHIFTS.index((hy, hx))]


def make_hypotheses(w2: DisparityField) -> HypothesisSet:
    """Shifted copies of a doubled-grid field, borders replicated."""
    if not w2.upsampled:
        raise ParameterError("hypotheses are built from a doubled-grid field")
    h, w = w2.shape
    pad = np.pad(w2.w, 1, mode="edge")
    fields = tuple(
        pad[1 + hy : 1 + hy + h, 1 + hx : 1 + hx + w].copy() for hy, hx in SHIFTS
    )
    return HypothesisSet(fields)


@njit(cache=True)
def _warp9_mean_kernel(up, w2, bx, by, out, valid):  # pragma: no cover - jitted
    h, w = up.shape
    for i in range(h):
        for j in range(w):
            acc = 0.0
            ok = True
            for hy in range(-1, 2):
                ii = i + hy
                if ii < 0:
                    ii = 0
                elif ii > h - 1:
                    ii = h - 1
                for hx in range(-1, 2):
                    jj = j + hx
                    if jj < 0:
                        jj = 0
                    elif jj > w - 1:
                        jj = w - 1
                    wv = w2[ii, jj]
                    xs = j + bx * wv
                    ys = i + by * wv
                    inb = (xs >= 0.0) and (xs <= w - 1.0) and (ys >= 0.0) and (ys <= h - 1.0)
                    if xs < 0.0:
                        xs = 0.0
                    elif xs > w - 1.0:
                        xs = w - 1.0
                    if ys < 0.0:
                        ys = 0.0
                    elif ys > h - 1.0:
                        ys = h - 1.0
                    x0 = int(xs)
                    y0 = int(ys)
                    if x0 > w - 2:
                        x0 = w - 2
                    if y0 > h - 2:
                        y0 = h - 2
                    fx = xs - x0
                    fy = ys - y0
                    v0 = (1.0 - fx) * up[y0, x0] + fx * up[y0, x0 + 1]
                    v1 = (1.0 - fx) * up[y0 + 1, x0] + fx * up[y0 + 1, x0 + 1]
                    acc += (1.0 - fy) * v0 + fy * v1
                    ok = ok and inb
            out[i, j] = acc / 9.0
            valid[i, j] = ok


def multi_hypothesis_warp(
    img: ImageGrid, w: DisparityField, baseline: BaselineVec
) -> tuple[ImageGrid, np.ndarray]:
    """Average of nine hypothesis warps at 2x resolution, decimated back.

    The displacement applied per hypothesis is d_h = baseline * w_h. The
    returned mask marks base pixels whose 2x2 block was valid in all nine
    warps.
    """
    if w.upsampled:
        raise ParameterError("multi_hypothesis_warp expects a base-resolution field")
    if w.shape != img.shape:
        raise ParameterError(
            f"disparity shape {w.shape} does not match image {img.shape}"
        )
    up = upsample_sinc2(img)
    w2 = upsample_disparity_nn(w)
    mean2 = np.empty(up.shape)
    valid2 = np.empty(up.shape, dtype=np.bool_)
    _warp9_mean_kernel(up.samples, w2.w, baseline.bx, baseline.by, mean2, valid2)
    out = decimate_sinc2(ImageGrid(mean2))
    valid = (
        valid2[0::2, 0::2]
        & valid2[0::2, 1::2]
        & valid2[1::2, 0::2]
        & valid2[1::2, 1::2]
    )
    return out, valid

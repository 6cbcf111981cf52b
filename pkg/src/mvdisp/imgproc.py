"""Filtering, differentiation, resampling, and warping primitives.

Every kernel here is applied with symmetric (reflect) boundary extension, and
no operation introduces NaNs. Samples that a warp would fetch from outside the
image are clamped to the border and reported through a validity mask instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit
from scipy import ndimage

from .core import GradientMode, ImageGrid, ParameterError


# --------------------------------------------------------------------------
# Kernels


@lru_cache(maxsize=32)
def _gauss_kernel(sigma: float) -> np.ndarray:
    radius = int(np.ceil(4.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


@lru_cache(maxsize=32)
def _dgauss_kernel(sigma: float) -> np.ndarray:
    """Sampled derivative-of-Gaussian in correlation form.

    Zero DC (mean subtracted) and unit first moment, so correlating a linear
    ramp a*x yields exactly a in the interior.
    """
    radius = int(np.ceil(4.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = x * np.exp(-(x * x) / (2.0 * sigma * sigma))
    k -= k.mean()
    return k / (x * k).sum()


def _check_sigma(sigma: float):
    if not (np.isfinite(sigma) and sigma > 0):
        raise ParameterError(f"sigma must be positive, got {sigma}")


def _check_same_shape(a: ImageGrid, b: ImageGrid):
    if a.shape != b.shape:
        raise ParameterError(f"image dimensions differ: {a.shape} vs {b.shape}")


# --------------------------------------------------------------------------
# Blur and gradients


def gaussian_blur(img: ImageGrid, sigma: float) -> ImageGrid:
    """Separable Gaussian blur (kernel truncated at radius ceil(4*sigma))."""
    _check_sigma(sigma)
    k = _gauss_kernel(float(sigma))
    out = ndimage.correlate1d(img.samples, k, axis=0, mode="reflect")
    out = ndimage.correlate1d(out, k, axis=1, mode="reflect")
    return ImageGrid(out)


@dataclass(frozen=True)
class GradientPair:
    """x/y intensity gradients of a (blurred) image pair."""

    gx: np.ndarray
    gy: np.ndarray

    def __post_init__(self):
        gx = np.asarray(self.gx, dtype=np.float64)
        gy = np.asarray(self.gy, dtype=np.float64)
        if gx.shape != gy.shape or gx.ndim != 2:
            raise ParameterError("gradient components must be 2-D and equal shape")
        if not (np.all(np.isfinite(gx)) and np.all(np.isfinite(gy))):
            raise ParameterError("gradient contains non-finite values")
        object.__setattr__(self, "gx", gx)
        object.__setattr__(self, "gy", gy)


def dog_gradient(
    img_a: ImageGrid, img_b: ImageGrid, sigma: float, mode: GradientMode = "average"
) -> GradientPair:
    """Derivative-of-Gaussian gradient of the combined image pair.

    ``mode="paper_sum"`` differentiates (a + b); ``"average"`` differentiates
    0.5*(a + b), which keeps the two-view linearization gradient unscaled.
    """
    _check_same_shape(img_a, img_b)
    _check_sigma(sigma)
    if mode not in ("average", "paper_sum"):
        raise ParameterError(f"unknown gradient mode {mode!r}")
    s = img_a.samples + img_b.samples
    if mode == "average":
        s = 0.5 * s
    g = _gauss_kernel(float(sigma))
    d = _dgauss_kernel(float(sigma))
    gx = ndimage.correlate1d(s, d, axis=1, mode="reflect")
    gx = ndimage.correlate1d(gx, g, axis=0, mode="reflect")
    gy = ndimage.correlate1d(s, d, axis=0, mode="reflect")
    gy = ndimage.correlate1d(gy, g, axis=1, mode="reflect")
    return GradientPair(gx, gy)


def diff_blur(iq: ImageGrid, ip: ImageGrid, sigma: float) -> ImageGrid:
    """Gaussian-blurred intensity difference iq - ip."""
    _check_same_shape(iq, ip)
    return gaussian_blur(ImageGrid(iq.samples - ip.samples), sigma)


# --------------------------------------------------------------------------
# Bilinear warping


@njit(cache=True)
def _bilinear_kernel(img, dx, dy, out, valid):  # pragma: no cover - jitted
    h, w = img.shape
    for i in range(h):
        for j in range(w):
            xs = j + dx[i, j]
            ys = i + dy[i, j]
            ok = (xs >= 0.0) and (xs <= w - 1.0) and (ys >= 0.0) and (ys <= h - 1.0)
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
            v0 = (1.0 - fx) * img[y0, x0] + fx * img[y0, x0 + 1]
            v1 = (1.0 - fx) * img[y0 + 1, x0] + fx * img[y0 + 1, x0 + 1]
            out[i, j] = (1.0 - fy) * v0 + fy * v1
            valid[i, j] = ok


def bilinear_warp(
    img: ImageGrid, disp: np.ndarray
) -> tuple[ImageGrid, np.ndarray]:
    """Sample ``img`` at s + disp(s) with bilinear interpolation.

    ``disp`` has shape (H, W, 2), components (dx, dy). Samples falling outside
    the image are clamped to the border and flagged False in the mask.
    """
    disp = np.asarray(disp, dtype=np.float64)
    if disp.shape != img.shape + (2,):
        raise ParameterError(
            f"displacement shape {disp.shape} does not match image {img.shape}"
        )
    dx = np.ascontiguousarray(disp[..., 0])
    dy = np.ascontiguousarray(disp[..., 1])
    out = np.empty(img.shape)
    valid = np.empty(img.shape, dtype=np.bool_)
    _bilinear_kernel(img.samples, dx, dy, out, valid)
    return ImageGrid(out), valid


# --------------------------------------------------------------------------
# Windowed-sinc resampling (2x up / 2x down)

_UP_TAPS = 8  # interpolator taps for the half-sample phase
_DEC_HALF = 8  # half-width of the half-band decimation filter


@lru_cache(maxsize=1)
def _upsample_kernel() -> np.ndarray:
    # taps at offsets k - 0.5 for k in [-3, 4]; Hann window over the support
    t = np.arange(-_UP_TAPS // 2 + 1, _UP_TAPS // 2 + 1) - 0.5
    k = np.sinc(t) * (0.5 * (1.0 + np.cos(np.pi * t / (_UP_TAPS / 2))))
    return k / k.sum()


@lru_cache(maxsize=1)
def _decimate_kernel() -> np.ndarray:
    j = np.arange(-_DEC_HALF, _DEC_HALF + 1, dtype=np.float64)
    k = 0.5 * np.sinc(j / 2.0) * (0.5 * (1.0 + np.cos(np.pi * j / (_DEC_HALF + 1))))
    return k / k.sum()


def _upsample2_axis(a: np.ndarray, axis: int) -> np.ndarray:
    a = np.moveaxis(a, axis, -1)
    n = a.shape[-1]
    h = _upsample_kernel()
    left = _UP_TAPS // 2 - 1
    pad = np.pad(a, [(0, 0)] * (a.ndim - 1) + [(left, _UP_TAPS // 2)], mode="symmetric")
    odd = np.zeros_like(a)
    for k in range(_UP_TAPS):
        odd += h[k] * pad[..., k : k + n]
    out = np.empty(a.shape[:-1] + (2 * n,))
    out[..., 0::2] = a
    out[..., 1::2] = odd
    return np.moveaxis(out, -1, axis)


def _decimate2_axis(a: np.ndarray, axis: int) -> np.ndarray:
    a = np.moveaxis(a, axis, -1)
    n = a.shape[-1]
    g = _decimate_kernel()
    pad = np.pad(a, [(0, 0)] * (a.ndim - 1) + [(_DEC_HALF, _DEC_HALF)], mode="symmetric")
    out = np.zeros(a.shape[:-1] + (n // 2,))
    for j in range(2 * _DEC_HALF + 1):
        out += g[j] * pad[..., j : j + n - 1 : 2]
    return np.moveaxis(out, -1, axis)


def upsample_sinc2(img: ImageGrid) -> ImageGrid:
    """2x upsampling by Hann-windowed sinc interpolation (8 taps per axis).

    Output sample 2n coincides with input sample n; odd samples interpolate
    the half-integer positions, so the original samples are preserved.
    """
    out = _upsample2_axis(img.samples, 0)
    out = _upsample2_axis(out, 1)
    return ImageGrid(out)


def decimate_sinc2(img: ImageGrid) -> ImageGrid:
    """Half-band windowed-sinc low-pass followed by 2x subsampling."""
    h, w = img.shape
    if h % 2 or w % 2:
        raise ParameterError(f"decimation needs even dimensions, got {img.shape}")
    out = _decimate2_axis(img.samples, 0)
    out = _decimate2_axis(out, 1)
    return ImageGrid(out)

import numpy as np
import pytest

from mvdisp.core import BaselineVec, ImageGrid, View, ViewSet
from mvdisp.data.slats import make_texture


def texture_image(seed, shape=(40, 56), freq_hi=1.0, shift=(0.0, 0.0)):
    """Band-limited test image sampled at x + shift; exact at any subpixel shift."""
    tex = make_texture(seed, 30, freq_hi=freq_hi)
    ys = np.arange(shape[0], dtype=float)[:, None] + shift[1]
    xs = np.arange(shape[1], dtype=float)[None, :] + shift[0]
    return tex.evaluate(xs, ys)


def shifted_pair(seed, w0, baseline=(1.0, 0.0), shape=(40, 56), noise=0.0, freq_hi=1.0):
    """Two-view set where the non-reference view equals the reference sampled
    at x + B'*w0, i.e. the true constant disparity is w0."""
    bx, by = baseline
    ref = texture_image(seed, shape, freq_hi)
    other = texture_image(seed, shape, freq_hi, shift=(bx * w0, by * w0))
    if noise:
        rng = np.random.default_rng(seed + 10_000)
        ref = np.clip(ref + rng.normal(0, noise, shape), 0, 1)
        other = np.clip(other + rng.normal(0, noise, shape), 0, 1)
    return ViewSet(
        (
            View(ImageGrid(ref), BaselineVec(0.0, 0.0)),
            View(ImageGrid(other), BaselineVec(bx, by)),
        ),
        0,
    )


def linear_array_viewset(n, seed=0, shape=(24, 32)):
    """n views on the x axis with integer baselines and distinct flat images."""
    rng = np.random.default_rng(seed)
    center = n // 2
    views = tuple(
        View(ImageGrid(rng.random(shape)), BaselineVec(float(i - center), 0.0))
        for i in range(n)
    )
    return ViewSet(views, center)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

"""Synthetic slats scene: textured background plane plus nearer vertical bars.

Views are rendered analytically: each layer's texture is a band-limited sum of
cosines, so a view samples its layers at exactly x + B' * w_layer with no
resampling error, and the bars occlude the background wherever they land.
Ground truth is the reference view's w field sampled on the doubled grid (in
base-resolution pixel units).
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from ..core import (
    BaselineVec,
    DisparityField,
    ImageGrid,
    IngestionError,
    ParameterError,
    View,
    ViewSet,
    normalize_baselines,
)
from .pfm import read_pfm, write_pfm

_DEFAULT_SLATS = ((90.0, 36.0), (235.0, 28.0), (390.0, 40.0), (520.0, 22.0))


@dataclass(frozen=True)
class Slat:
    """Vertical bar: [x0, x0 + width) in reference/texture coordinates."""

    x0: float
    width: float


@dataclass(frozen=True)
class SceneSpec:
    n_views: int = 31
    width: int = 640
    height: int = 360
    view_spacing: float = 1.25  # mm
    focal_length: float = 50.0  # mm
    background_w: float = 0.4
    slat_w: float = 0.9
    slats: tuple[Slat, ...] = tuple(Slat(x, w) for x, w in _DEFAULT_SLATS)
    background_seed: int = 101
    slat_seed: int = 202
    texture_components: int = 8
    texture_max_freq: float = 1.0  # rad/px
    background_mean: float = 0.40  # distinct layer means keep occlusions visible
    slat_mean: float = 0.62
    background_tilt_x: float = 0.0  # slope of the background plane, w per px
    background_tilt_y: float = 0.0
    texture_share: float = 0.55  # fraction of slat texture shared with background

    def __post_init__(self):
        if self.n_views < 3 or self.n_views % 2 == 0:
            raise ParameterError("n_views must be odd and >= 3 (centre reference)")
        if self.width < 8 or self.height < 8:
            raise ParameterError("scene too small")
        if not (self.slat_w > self.background_w >= 0):
            raise ParameterError("need slat_w > background_w >= 0")
        span_x = abs(self.background_tilt_x) * self.width / 2
        span_y = abs(self.background_tilt_y) * self.height / 2
        if self.background_w - span_x - span_y < 0:
            raise ParameterError("tilted background reaches negative depth")
        if self.background_w + span_x + span_y >= self.slat_w:
            raise ParameterError("tilted background must stay behind the slats")
        covered = np.zeros(self.width, dtype=bool)
        for s in self.slats:
            if s.width <= 0 or s.x0 < 0 or s.x0 + s.width > self.width:
                raise ParameterError(f"slat {s} does not fit inside the image")
            x = np.arange(self.width)
            covered |= (x >= s.x0) & (x < s.x0 + s.width)
        if self.slats and covered.all():
            raise ParameterError("slats cover the whole reference view")

    @property
    def reference_index(self) -> int:
        return self.n_views // 2

    def background_field(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Background w at positions (x, y) on the reference grid."""
        return (
            self.background_w
            + self.background_tilt_x * (x - self.width / 2.0)
            + self.background_tilt_y * (y - self.height / 2.0)
        )


@dataclass(frozen=True)
class CosineTexture:
    """Band-limited procedural texture: mean + sum_k amp_k cos(u x + v y + phi)."""

    amps: np.ndarray
    us: np.ndarray
    vs: np.ndarray
    phases: np.ndarray
    mean: float = 0.5

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        out = np.full(np.broadcast_shapes(x.shape, y.shape), self.mean)
        for amp, u, v, ph in zip(self.amps, self.us, self.vs, self.phases):
            out += amp * np.cos(u * x + v * y + ph)
        return out


def make_texture(
    seed: int,
    n_components: int = 8,
    freq_lo: float = 0.25,
    freq_hi: float = 1.0,
    amplitude: float = 0.35,
    mean: float = 0.5,
) -> CosineTexture:
    """Random cosine mixture with most of its energy in the mid band.

    Few strong components keep the gradient energy well above the noise level
    a realistic sensor adds, which a spectrally flat mixture would not.
    """
    rng = np.random.default_rng(seed)
    mag = rng.uniform(freq_lo, freq_hi, n_components)
    theta = rng.uniform(0.0, 2.0 * np.pi, n_components)
    phases = rng.uniform(0.0, 2.0 * np.pi, n_components)
    amps = rng.uniform(0.7, 1.0, n_components)
    amps *= amplitude / amps.sum()
    return CosineTexture(amps, mag * np.cos(theta), mag * np.sin(theta), phases, mean)


def derive_texture(base: CosineTexture, seed: int, share: float, mean: float) -> CosineTexture:
    """Texture sharing a fraction of ``base``'s components (same material family).

    Shared components let an occluded region find a plausible false match at
    the occluder's disparity, which is what makes occlusions actively
    misleading rather than just uninformative.
    """
    if not 0.0 <= share <= 1.0:
        raise ParameterError("texture share must lie in [0, 1]")
    n = len(base.amps)
    fresh = make_texture(seed, n, mean=mean)
    k = int(round(share * n))
    take = np.arange(n) < k
    pick = lambda a, b: np.where(take, a, b)
    return CosineTexture(
        pick(base.amps, fresh.amps),
        pick(base.us, fresh.us),
        pick(base.vs, fresh.vs),
        pick(base.phases, fresh.phases),
        mean,
    )


def scene_baselines(spec: SceneSpec) -> list[BaselineVec]:
    """Normalized baselines of the linear x-axis array (centre view is zero)."""
    raw = [((i - spec.reference_index) * spec.view_spacing, 0.0) for i in range(spec.n_views)]
    return normalize_baselines(raw)


def slat_visibility(spec: SceneSpec, baseline: BaselineVec, x: np.ndarray) -> np.ndarray:
    """True where a slat is visible at column positions x in the given view."""
    u = x + baseline.bx * spec.slat_w
    vis = np.zeros(np.shape(u), dtype=bool)
    for s in spec.slats:
        vis |= (u >= s.x0) & (u < s.x0 + s.width)
    return vis


def generate_slats(spec: SceneSpec) -> tuple[ViewSet, DisparityField]:
    """Render the noiseless view set and the doubled-grid ground truth."""
    tex_bg = make_texture(spec.background_seed, spec.texture_components,
                          freq_hi=spec.texture_max_freq, mean=spec.background_mean)
    tex_slat = derive_texture(tex_bg, spec.slat_seed, spec.texture_share,
                              mean=spec.slat_mean)
    xs = np.arange(spec.width, dtype=np.float64)[None, :]
    ys = np.arange(spec.height, dtype=np.float64)[:, None]
    views = []
    for b in scene_baselines(spec):
        # a view equals the reference texture sampled at x + B' * w(x); for a
        # tilted plane the per-view field solves that relation in closed form
        denom = 1.0 - spec.background_tilt_x * b.bx - spec.background_tilt_y * b.by
        w_bg = spec.background_field(xs, ys) / denom
        bg = tex_bg.evaluate(xs + b.bx * w_bg, ys + b.by * w_bg)
        sl = tex_slat.evaluate(xs + b.bx * spec.slat_w, ys + b.by * spec.slat_w)
        vis = slat_visibility(spec, b, xs)
        img = np.where(vis, sl, bg)
        views.append(View(ImageGrid(np.clip(img, 0.0, 1.0)), b))
    x2 = np.arange(2 * spec.width, dtype=np.float64)[None, :] * 0.5
    y2 = np.arange(2 * spec.height, dtype=np.float64)[:, None] * 0.5
    ref_vis = slat_visibility(spec, BaselineVec(0.0, 0.0), x2)
    gt = np.where(ref_vis, spec.slat_w, spec.background_field(x2, y2))
    gt = np.broadcast_to(gt, (2 * spec.height, 2 * spec.width)).copy()
    return ViewSet(tuple(views), spec.reference_index), DisparityField(gt, upsampled=True)


# --------------------------------------------------------------------------
# Noise


def add_noise(img: ImageGrid, variance: float, seed: int) -> ImageGrid:
    """Add i.i.d. zero-mean Gaussian noise, then clamp to [0, 1]."""
    if variance < 0:
        raise ParameterError("noise variance must be >= 0")
    if variance == 0:
        return img
    rng = np.random.default_rng(seed)
    noisy = img.samples + rng.normal(0.0, np.sqrt(variance), img.shape)
    return ImageGrid(np.clip(noisy, 0.0, 1.0))


def noisy_viewset(viewset: ViewSet, variance: float, seed: int) -> ViewSet:
    """Per-view noise with per-view sub-seeds derived from ``seed``."""
    views = []
    for i, v in enumerate(viewset.views):
        sub = int(np.random.SeedSequence([seed, i]).generate_state(1)[0])
        views.append(View(add_noise(v.image, variance, sub), v.baseline))
    return ViewSet(tuple(views), viewset.reference_index)


# --------------------------------------------------------------------------
# On-disk layout (16-bit grayscale PNGs + PFM ground truth + parameters.cfg)


def save_slats_dir(
    out_dir: str | os.PathLike,
    viewset: ViewSet,
    gt: DisparityField,
    spec: SceneSpec,
    noise_variance: float,
    seed: int,
) -> None:
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    for i, v in enumerate(viewset.views):
        data = np.round(v.image.samples * 65535.0).astype(np.uint16)
        Image.fromarray(data).save(os.path.join(out_dir, f"input_Cam{i:03d}.png"))
    write_pfm(os.path.join(out_dir, "gt_disp.pfm"), gt.w)
    lines = [
        "dataset = slats",
        f"n_views = {spec.n_views}",
        f"width = {spec.width}",
        f"height = {spec.height}",
        f"view_spacing_mm = {spec.view_spacing!r}",
        f"focal_length_mm = {spec.focal_length!r}",
        f"reference_index = {spec.reference_index}",
        f"background_w = {spec.background_w!r}",
        f"slat_w = {spec.slat_w!r}",
        "slats = " + ";".join(f"{s.x0!r}:{s.width!r}" for s in spec.slats),
        f"noise_variance = {noise_variance!r}",
        f"seed = {seed}",
    ]
    with open(os.path.join(out_dir, "parameters.cfg"), "w") as f:
        f.write("\n".join(lines) + "\n")


def parse_flat_cfg(path: str | os.PathLike) -> dict[str, str]:
    """Flat ``key = value`` text; '#' starts a comment, blank lines ignored."""
    out: dict[str, str] = {}
    try:
        with open(os.fspath(path)) as f:
            for line in f:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise IngestionError(f"{path}: malformed line {line!r}")
                key, value = line.split("=", 1)
                out[key.strip()] = value.strip()
    except OSError as e:
        raise IngestionError(f"{path}: {e}") from e
    return out


def load_slats_dir(path: str | os.PathLike) -> tuple[ViewSet, DisparityField, dict[str, str]]:
    """Load a directory written by :func:`save_slats_dir`."""
    path = os.fspath(path)
    cfg = parse_flat_cfg(os.path.join(path, "parameters.cfg"))
    if cfg.get("dataset") != "slats":
        raise IngestionError(f"{path}: parameters.cfg does not describe a slats dataset")
    n = int(cfg["n_views"])
    ref = int(cfg["reference_index"])
    views = []
    baselines = normalize_baselines(
        [((i - ref) * float(cfg["view_spacing_mm"]), 0.0) for i in range(n)]
    )
    for i in range(n):
        name = os.path.join(path, f"input_Cam{i:03d}.png")
        if not os.path.exists(name):
            raise IngestionError(f"missing view image {name}")
        arr = np.asarray(Image.open(name), dtype=np.float64) / 65535.0
        views.append(View(ImageGrid(np.clip(arr, 0.0, 1.0)), baselines[i]))
    gt = DisparityField(read_pfm(os.path.join(path, "gt_disp.pfm")), upsampled=True)
    return ViewSet(tuple(views), ref), gt, cfg

"""Ingestion of 9x9 light-field benchmark scenes.

Expected directory layout: ``input_Cam000.png .. input_Cam080.png`` in grid
row-major order (Cam000 top-left), a ``parameters.cfg`` in INI style, and a
``gt_disp_lowres.pfm`` ground-truth disparity map at image resolution.

Sign convention: the camera at grid column c > centre gets baseline +x, and
ground-truth disparity is positive toward larger baselines, i.e. a view
equals the reference sampled at x + B' * w. Disparity values are in pixels
per unit (adjacent-view) baseline step, so they are already in w units.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from ..core import (
    DisparityField,
    ImageGrid,
    IngestionError,
    View,
    ViewSet,
    normalize_baselines,
)
from .pfm import read_pfm
from .slats import parse_flat_cfg

REC601 = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class LightFieldSet:
    views: ViewSet  # full grid, centre view is the reference
    rows: int
    cols: int
    gt: DisparityField  # native disparity units, image resolution
    disparity_unit: float  # native units per unit of w (1.0 for this layout)
    meta: dict


def _to_luminance(img: Image.Image) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim == 3:
        arr = arr[..., :3].astype(np.float64)
        arr = REC601[0] * arr[..., 0] + REC601[1] * arr[..., 1] + REC601[2] * arr[..., 2]
        scale = 255.0
    else:
        arr = arr.astype(np.float64)
        scale = 65535.0 if arr.max() > 255 else 255.0
    return np.clip(arr / scale, 0.0, 1.0)


def read_parameters_cfg(path: str | os.PathLike) -> dict[str, str]:
    """INI-style benchmark config flattened to one key/value namespace."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise IngestionError(f"missing camera configuration file {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path)
    except configparser.Error as e:
        raise IngestionError(f"{path}: {e}") from e
    if not parser.sections():
        return parse_flat_cfg(path)
    out: dict[str, str] = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            out[key] = value
    return out


def load_lightfield(path: str | os.PathLike) -> LightFieldSet:
    """Load all grid views, the camera configuration, and the GT disparity."""
    path = os.fspath(path)
    meta = read_parameters_cfg(os.path.join(path, "parameters.cfg"))
    rows = int(meta.get("num_cams_y", 9))
    cols = int(meta.get("num_cams_x", 9))
    rc, cc = rows // 2, cols // 2
    raw = []
    images = []
    for k in range(rows * cols):
        name = os.path.join(path, f"input_Cam{k:03d}.png")
        if not os.path.exists(name):
            raise IngestionError(f"missing view image {name}")
        with Image.open(name) as img:
            images.append(ImageGrid(_to_luminance(img)))
        raw.append((float(k % cols - cc), float(k // cols - rc)))
    baselines = normalize_baselines(raw)
    views = tuple(View(img, b) for img, b in zip(images, baselines))
    viewset = ViewSet(views, rc * cols + cc)
    gt_name = os.path.join(path, "gt_disp_lowres.pfm")
    if not os.path.exists(gt_name):
        candidates = sorted(
            f for f in os.listdir(path) if f.startswith("gt_disp") and f.endswith(".pfm")
        )
        if not candidates:
            raise IngestionError(f"missing ground-truth disparity {gt_name}")
        gt_name = os.path.join(path, candidates[0])
    gt_arr = read_pfm(gt_name)
    if gt_arr.shape != viewset.shape:
        raise IngestionError(
            f"{gt_name}: ground truth shape {gt_arr.shape} does not match "
            f"view resolution {viewset.shape}"
        )
    if "image_resolution_x_px" in meta:
        expect = (int(meta["image_resolution_y_px"]), int(meta["image_resolution_x_px"]))
        if expect != viewset.shape:
            raise IngestionError(
                f"{path}: views are {viewset.shape} but parameters.cfg says {expect}"
            )
    return LightFieldSet(viewset, rows, cols, DisparityField(gt_arr), 1.0, meta)


def crosshair_view_set(lf: LightFieldSet) -> ViewSet:
    """Centre row plus centre column of the grid (17 views on a 9x9 grid).

    Views are ordered reference first, then by growing baseline norm with
    x-axis views before y-axis views and negative before positive offsets.
    """
    rc, cc = lf.rows // 2, lf.cols // 2

    def key(i: int):
        b = lf.views.views[i].baseline
        axis = 0 if b.by == 0.0 else 1
        comp = b.bx if b.by == 0.0 else b.by
        return (b.norm_inf, axis, 0 if comp < 0 else 1)

    indices = [
        k
        for k in range(lf.rows * lf.cols)
        if (k // lf.cols == rc) or (k % lf.cols == cc)
    ]
    ref = rc * lf.cols + cc
    ordered = [ref] + sorted((i for i in indices if i != ref), key=key)
    return lf.views.subset(ordered)

"""Dataset generation and ingestion."""

from .lightfield import LightFieldSet, crosshair_view_set, load_lightfield, read_parameters_cfg
from .pfm import read_pfm, write_pfm, write_pgm
from .slats import (
    SceneSpec,
    Slat,
    add_noise,
    derive_texture,
    generate_slats,
    load_slats_dir,
    make_texture,
    noisy_viewset,
    parse_flat_cfg,
    save_slats_dir,
    scene_baselines,
    slat_visibility,
)

__all__ = [
    "LightFieldSet",
    "SceneSpec",
    "Slat",
    "add_noise",
    "crosshair_view_set",
    "generate_slats",
    "load_lightfield",
    "load_slats_dir",
    "make_texture",
    "noisy_viewset",
    "parse_flat_cfg",
    "read_parameters_cfg",
    "read_pfm",
    "save_slats_dir",
    "scene_baselines",
    "slat_visibility",
    "write_pfm",
    "write_pgm",
]

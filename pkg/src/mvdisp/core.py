"""Shared domain types: images, baselines, view sets, disparity fields, configs.

All types are immutable after construction (arrays are marked read-only), so
they can be shared freely between threads and solver runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Literal, Sequence

import numpy as np


# --------------------------------------------------------------------------
# Errors


class ParameterError(ValueError):
    """Invalid argument, field value, or configuration."""


class GeometryError(ParameterError):
    """Degenerate camera geometry (e.g. all baselines zero)."""


class PlanError(ParameterError):
    """Invalid progressive-inclusion plan."""


class SigmaUnboundError(RuntimeError):
    """A Welsch penalty with automatic scale was evaluated before binding."""


class SigmaEstimationError(RuntimeError):
    """No valid pixels were available to estimate the Welsch scale."""


class IngestionError(RuntimeError):
    """A dataset file could not be read or parsed."""


class UnsupportedFormatError(IngestionError):
    """Recognised but unhandled file variant (e.g. colour PFM)."""


class NumericalError(RuntimeError):
    """Non-finite values encountered during optimisation."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------
# Images and geometry


@dataclass(frozen=True)
class ImageGrid:
    """Single-channel intensity image, nominal range [0, 1], row-major (H, W)."""

    samples: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.samples, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ParameterError(f"image must be non-empty 2-D, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ParameterError("image contains non-finite samples")
        object.__setattr__(self, "samples", _freeze(a))

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape


@dataclass(frozen=True)
class BaselineVec:
    """Camera translation in normalized units (nearest view pair has inf-norm 1)."""

    bx: float
    by: float

    def __post_init__(self):
        if not (np.isfinite(self.bx) and np.isfinite(self.by)):
            raise ParameterError("baseline components must be finite")
        object.__setattr__(self, "bx", float(self.bx))
        object.__setattr__(self, "by", float(self.by))

    @property
    def norm_inf(self) -> float:
        return max(abs(self.bx), abs(self.by))

    @property
    def norm_one(self) -> float:
        return abs(self.bx) + abs(self.by)

    def as_tuple(self) -> tuple[float, float]:
        return (self.bx, self.by)


@dataclass(frozen=True)
class CameraGeometry:
    """Physical rig constants; only needed to convert to/from metric depth."""

    focal_length: float  # mm
    view_spacing: float  # mm, nearest-pair baseline
    pixel_pitch: float  # mm per pixel

    def __post_init__(self):
        for name in ("focal_length", "view_spacing", "pixel_pitch"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be strictly positive, got {v}")


@dataclass(frozen=True)
class View:
    image: ImageGrid
    baseline: BaselineVec


@dataclass(frozen=True)
class ViewSet:
    """A reference view plus co-planar views with normalized baselines."""

    views: tuple[View, ...]
    reference_index: int

    def __post_init__(self):
        views = tuple(self.views)
        object.__setattr__(self, "views", views)
        if len(views) < 2:
            raise ParameterError("a view set needs at least 2 views")
        if not 0 <= self.reference_index < len(views):
            raise ParameterError("reference index out of range")
        shape = views[0].image.shape
        for i, v in enumerate(views):
            if v.image.shape != shape:
                raise ParameterError(
                    f"view {i} has shape {v.image.shape}, expected {shape}"
                )
        ref_b = views[self.reference_index].baseline
        if ref_b.bx != 0.0 or ref_b.by != 0.0:
            raise ParameterError("reference view must have zero baseline")
        seen = set()
        for v in views:
            t = v.baseline.as_tuple()
            if t in seen:
                raise ParameterError(f"duplicate baseline {t}")
            seen.add(t)
        nonzero = [v.baseline.norm_inf for v in views if v.baseline.norm_inf > 0]
        if not nonzero or abs(min(nonzero) - 1.0) > 1e-9:
            raise ParameterError(
                "baselines are not normalized (min nonzero inf-norm must be 1)"
            )

    @property
    def reference(self) -> View:
        return self.views[self.reference_index]

    @property
    def shape(self) -> tuple[int, int]:
        return self.reference.image.shape

    def __len__(self) -> int:
        return len(self.views)

    def baseline_norms(self) -> np.ndarray:
        return np.array([v.baseline.norm_inf for v in self.views])

    def nonreference_indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(len(self.views)) if i != self.reference_index)

    def nearest_view_indices(
        self, active: Sequence[int] | None = None
    ) -> tuple[int, ...]:
        """Non-reference views (within ``active``) tied for the smallest inf-norm."""
        pool = self.nonreference_indices() if active is None else [
            i for i in active if i != self.reference_index
        ]
        if not pool:
            return ()
        lo = min(self.views[i].baseline.norm_inf for i in pool)
        return tuple(i for i in pool if self.views[i].baseline.norm_inf <= lo + 1e-9)

    def subset(self, indices: Sequence[int]) -> "ViewSet":
        indices = list(indices)
        if self.reference_index not in indices:
            raise ParameterError("subset must contain the reference view")
        views = tuple(self.views[i] for i in indices)
        return ViewSet(views, indices.index(self.reference_index))


@dataclass(frozen=True)
class DisparityField:
    """Scalar field w of normalized reciprocal depth on the reference grid.

    ``upsampled`` marks fields living on the doubled (2x) grid.
    """

    w: np.ndarray
    upsampled: bool = False

    def __post_init__(self):
        a = np.asarray(self.w, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ParameterError(f"disparity field must be 2-D, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ParameterError("disparity field contains non-finite values")
        object.__setattr__(self, "w", _freeze(a))

    @classmethod
    def zeros(cls, shape: tuple[int, int]) -> "DisparityField":
        return cls(np.zeros(shape))

    @property
    def height(self) -> int:
        return self.w.shape[0]

    @property
    def width(self) -> int:
        return self.w.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.w.shape


# --------------------------------------------------------------------------
# Penalty selection and solver configuration


PenaltyTag = Literal["l2", "huber", "welsch"]
GradientMode = Literal["average", "paper_sum"]
RegForm = Literal["divergence", "symmetrized", "literal"]


@dataclass(frozen=True)
class PenaltyKind:
    """Selects the data/regularizer cost: L2, Huber-L1(eps), or Welsch(sigma).

    A Welsch kind with ``sigma=None`` is "automatic": the scale must be bound
    (via :meth:`bound`) before the penalty can be evaluated.
    """

    tag: PenaltyTag
    epsilon: float | None = None
    sigma: float | None = None

    def __post_init__(self):
        if self.tag not in ("l2", "huber", "welsch"):
            raise ParameterError(f"unknown penalty tag {self.tag!r}")
        if self.tag == "huber":
            if self.epsilon is None or not (self.epsilon > 0):
                raise ParameterError("huber penalty needs epsilon > 0")
        if self.tag == "welsch" and self.sigma is not None and not (self.sigma > 0):
            raise ParameterError("welsch sigma must be positive when fixed")

    @classmethod
    def l2(cls) -> "PenaltyKind":
        return cls("l2")

    @classmethod
    def huber_l1(cls, epsilon: float = 1e-4) -> "PenaltyKind":
        return cls("huber", epsilon=epsilon)

    @classmethod
    def welsch(cls, sigma: float) -> "PenaltyKind":
        return cls("welsch", sigma=sigma)

    @classmethod
    def welsch_auto(cls) -> "PenaltyKind":
        return cls("welsch", sigma=None)

    @property
    def is_auto(self) -> bool:
        return self.tag == "welsch" and self.sigma is None

    def bound(self, sigma: float | None) -> "PenaltyKind":
        """Return a copy with the Welsch scale pinned (no-op for other kinds)."""
        if self.tag != "welsch":
            return self
        if sigma is None:
            if self.sigma is None:
                raise SigmaUnboundError("automatic Welsch sigma is not bound")
            return self
        return replace(self, sigma=float(sigma))


_DEFAULT_DATA = PenaltyKind.welsch_auto()
_DEFAULT_REG = PenaltyKind.huber_l1(1e-4)


@dataclass(frozen=True)
class SolverConfig:
    alpha: float = 0.1
    data_penalty: PenaltyKind = _DEFAULT_DATA
    reg_penalty: PenaltyKind = _DEFAULT_REG
    dog_sigma: float = 0.75
    irls_iters: int = 10
    cg_tol: float = 1e-6
    cg_max_iters: int = 500
    schedule_k: float = 1.0
    schedule_c: float = 1.0
    gradient_mode: GradientMode = "average"
    reg_form: RegForm = "divergence"
    seed: int = 0

    def __post_init__(self):
        if not (self.alpha > 0):
            raise ParameterError("alpha must be > 0")
        if not (self.dog_sigma > 0):
            raise ParameterError("dog_sigma must be > 0")
        if not (self.cg_tol > 0):
            raise ParameterError("cg_tol must be > 0")
        if self.irls_iters < 1:
            raise ParameterError("irls_iters must be >= 1")
        if self.cg_max_iters < 1:
            raise ParameterError("cg_max_iters must be >= 1")
        if self.gradient_mode not in ("average", "paper_sum"):
            raise ParameterError(f"unknown gradient_mode {self.gradient_mode!r}")
        if self.reg_form not in ("divergence", "symmetrized", "literal"):
            raise ParameterError(f"unknown reg_form {self.reg_form!r}")
        if self.reg_penalty.is_auto:
            raise ParameterError("regularizer penalty cannot use automatic sigma")


# --------------------------------------------------------------------------
# Geometry conversions


def normalize_baselines(
    raw: Iterable[tuple[float, float]],
    geometry: CameraGeometry | None = None,
) -> list[BaselineVec]:
    """Scale physical baseline vectors so the smallest nonzero inf-norm is 1.

    Ratios between baselines are preserved exactly; the ``geometry`` argument
    only documents the physical units and is not needed for the scaling.
    """
    vecs = [(float(x), float(y)) for x, y in raw]
    norms = [max(abs(x), abs(y)) for x, y in vecs]
    nonzero = [n for n in norms if n > 0]
    if not nonzero:
        raise GeometryError("all baselines are zero; geometry is degenerate")
    scale = min(nonzero)
    return [BaselineVec(x / scale, y / scale) for x, y in vecs]


def w_from_reciprocal_depth(r, geometry: CameraGeometry):
    """Pixel-unit normalized disparity w for metric reciprocal depth r (1/mm)."""
    return geometry.view_spacing * geometry.focal_length * np.asarray(r) / geometry.pixel_pitch


def reciprocal_depth_from_w(w, geometry: CameraGeometry):
    """Inverse of :func:`w_from_reciprocal_depth`."""
    return np.asarray(w) * geometry.pixel_pitch / (geometry.view_spacing * geometry.focal_length)


def disparity_from_w(w: DisparityField | np.ndarray, b: BaselineVec) -> np.ndarray:
    """Per-pixel displacement field (H, W, 2) with [..., 0] = bx*w, [..., 1] = by*w."""
    arr = w.w if isinstance(w, DisparityField) else np.asarray(w, dtype=np.float64)
    out = np.empty(arr.shape + (2,))
    out[..., 0] = b.bx * arr
    out[..., 1] = b.by * arr
    return out

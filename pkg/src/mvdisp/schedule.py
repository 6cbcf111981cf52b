"""Progressive inclusion of views, inter-stage warping, and low-pass fallback.

Views near the reference are solved first; each stage widens the admitted
baseline gate, re-warps the ORIGINAL views with the accumulated estimate, and
solves for the residual field only. Warping from originals avoids compounding
interpolation blur across stages.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    DisparityField,
    ImageGrid,
    NumericalError,
    ParameterError,
    PlanError,
    SolverConfig,
    ViewSet,
)
from .hires_warp import multi_hypothesis_warp
from .imgproc import gaussian_blur
from .robust import SigmaState
from .solver import IrlsStep, LinearizedView, irls_solve_linearized, linearize_view


# --------------------------------------------------------------------------
# Stage plans


@dataclass(frozen=True)
class GateFormula:
    """Admit view p at stage s when ||B'_p||_inf <= k + s*c."""

    k: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if not (self.k >= 1):
            raise ParameterError("gate constant k must be >= 1")
        if not (self.c > 0):
            raise ParameterError("gate increment c must be > 0")


@dataclass(frozen=True)
class CustomOrder:
    """Grow one view per stage following ``order`` (default: crosshair order)."""

    order: tuple[int, ...] | None = None


@dataclass(frozen=True)
class StagePlan:
    stages: tuple[tuple[int, ...], ...]
    mode: str

    def __post_init__(self):
        stages = tuple(tuple(s) for s in self.stages)
        if not stages:
            raise PlanError("a plan needs at least one stage")
        if len(stages[0]) < 2:
            raise PlanError("the first stage needs at least 2 views")
        for prev, nxt in zip(stages, stages[1:]):
            if not set(prev) <= set(nxt):
                raise PlanError("stage subsets must be nested")
        object.__setattr__(self, "stages", stages)

    def __len__(self) -> int:
        return len(self.stages)


def views_at_stage(viewset: ViewSet, k: float, c: float, s: int) -> tuple[int, ...]:
    """Indices whose baseline inf-norm passes the stage-s gate, plus reference."""
    GateFormula(k, c)  # validates k, c
    if s < 0:
        raise ParameterError("stage index must be >= 0")
    gate = k + s * c + 1e-12
    return tuple(
        i
        for i, v in enumerate(viewset.views)
        if i == viewset.reference_index or v.baseline.norm_inf <= gate
    )


def _crosshair_key(viewset: ViewSet, i: int):
    b = viewset.views[i].baseline
    if b.by == 0.0:
        axis, comp = 0, b.bx
    elif b.bx == 0.0:
        axis, comp = 1, b.by
    else:
        axis, comp = 2, b.bx
    return (b.norm_inf, axis, 0 if comp < 0 else 1, b.bx, b.by)


def plan_schedule(viewset: ViewSet, mode: GateFormula | CustomOrder) -> StagePlan:
    """Stage subsets for progressive inclusion, ending with all views."""
    nonref = set(viewset.nonreference_indices())
    if isinstance(mode, GateFormula):
        stages: list[tuple[int, ...]] = []
        s = 0
        while True:
            subset = views_at_stage(viewset, mode.k, mode.c, s)
            if not stages or subset != stages[-1]:
                stages.append(subset)
            if len(subset) == len(viewset):
                break
            s += 1
        return StagePlan(tuple(stages), "gate_formula")
    if isinstance(mode, CustomOrder):
        if mode.order is None:
            order = sorted(nonref, key=lambda i: _crosshair_key(viewset, i))
        else:
            order = list(mode.order)
            if set(order) != nonref or len(order) != len(nonref):
                raise PlanError(
                    "custom order must list every non-reference view exactly once"
                )
        stages = []
        current = [viewset.reference_index, order[0]]
        stages.append(tuple(current))
        for i in order[1:]:
            current = current + [i]
            stages.append(tuple(current))
        return StagePlan(tuple(stages), "custom_order")
    raise ParameterError(f"unknown schedule mode {mode!r}")


def _validate_plan(viewset: ViewSet, plan: StagePlan):
    n = len(viewset)
    for si, stage in enumerate(plan.stages):
        if any(not 0 <= i < n for i in stage):
            raise PlanError(f"stage {si} references a view index out of range")
        if viewset.reference_index not in stage:
            raise PlanError(f"stage {si} does not contain the reference view")
    if set(plan.stages[-1]) != set(range(n)):
        raise PlanError("the final stage must contain every view")


# --------------------------------------------------------------------------
# Low-pass fallback trigger


def needs_lowpass(
    viewset: ViewSet,
    w_est: DisparityField,
    omega_max: float,
    active: Sequence[int] | None = None,
) -> tuple[bool, int]:
    """Check the pi/2 linearization bound for the expected residual disparity.

    Uses the 95th percentile of |w| as the expected per-pixel residual; the
    worst view is the one with the largest 1-norm baseline. Returns whether
    low-pass filtering is needed and how many 2x pyramid levels bring the
    frequency-displacement product back under pi/2.
    """
    if not (0 < omega_max <= np.pi):
        raise ParameterError("omega_max must lie in (0, pi]")
    indices = viewset.nonreference_indices() if active is None else [
        i for i in active if i != viewset.reference_index
    ]
    if not indices:
        return False, 0
    r95 = float(np.percentile(np.abs(w_est.w), 95))
    worst = max(viewset.views[i].baseline.norm_one for i in indices)
    product = omega_max * worst * r95
    limit = np.pi / 2
    if product <= limit + 1e-12:
        return False, 0
    levels = int(np.ceil(np.log2(product / limit) - 1e-12))
    return True, levels


def linearization_error_curve(n: int = 256, theta_max: float = np.pi) -> np.ndarray:
    """Columns (theta, |linear term|, |1 - exp(j theta)|, abs error).

    Diagnostic for how the first-order expansion of a phase shift degrades as
    theta = omega^T B' w grows; the two magnitudes separate past pi/2.
    """
    theta = np.linspace(0.0, theta_max, n)
    exact = 2.0 * np.abs(np.sin(theta / 2.0))
    return np.column_stack([theta, theta, exact, np.abs(theta - exact)])


# --------------------------------------------------------------------------
# Progressive driver


@dataclass(frozen=True)
class StageResult:
    stage: int
    view_indices: tuple[int, ...]
    w: DisparityField  # accumulated estimate after this stage
    steps: tuple[IrlsStep, ...]
    lowpass_levels: int
    runtime_s: float = 0.0


def _decimate_pyramid(arr: np.ndarray) -> np.ndarray:
    return gaussian_blur(ImageGrid(arr), 1.0).samples[::2, ::2]


def _nn_upsample_to(w: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    up = 2.0 * np.repeat(np.repeat(w, 2, axis=0), 2, axis=1)
    return up[: shape[0], : shape[1]]


def _solve_stage_pyramid(
    ref: np.ndarray,
    items: list[tuple[int, np.ndarray, np.ndarray]],
    viewset: ViewSet,
    n_views: int,
    levels: int,
    config: SolverConfig,
    state: SigmaState,
) -> tuple[np.ndarray, tuple[IrlsStep, ...], SigmaState]:
    """Coarse-to-fine solve of one stage on a Gaussian pyramid of its images.

    Each level warps that level's images by the accumulated estimate and
    solves for the residual, so the linearization is re-taken around the
    current alignment (solving the same fixed linear system at every level
    would make the pyramid a no-op).
    """
    ref_pyr = [ref]
    view_pyrs = [[img for _, img, _ in items]]
    mask_pyrs = [[m for _, _, m in items]]
    for _ in range(levels):
        ref_pyr.append(_decimate_pyramid(ref_pyr[-1]))
        view_pyrs.append([_decimate_pyramid(v) for v in view_pyrs[-1]])
        mask_pyrs.append([m[::2, ::2] for m in mask_pyrs[-1]])
    w = np.zeros(ref_pyr[-1].shape)
    steps: list[IrlsStep] = []
    for lvl in range(levels, -1, -1):
        views = []
        rewarp = np.any(w != 0.0)
        for vi, img in enumerate(view_pyrs[lvl]):
            baseline = viewset.views[items[vi][0]].baseline
            mask = mask_pyrs[lvl][vi]
            if rewarp:
                warped, ok = multi_hypothesis_warp(
                    ImageGrid(img), DisparityField(-w), baseline
                )
                img, mask = warped.samples, ok & mask
            views.append(
                linearize_view(
                    ImageGrid(ref_pyr[lvl]),
                    ImageGrid(img),
                    baseline,
                    config.dog_sigma,
                    config.gradient_mode,
                    mask=mask,
                )
            )
        res = irls_solve_linearized(
            views, n_views, np.zeros(ref_pyr[lvl].shape), config, state
        )
        state = res.sigma_state
        steps.extend(res.steps)
        w = w + res.w.w
        if lvl > 0:
            w = _nn_upsample_to(w, ref_pyr[lvl - 1].shape)
    return w, tuple(steps), state


def run_progressive(
    viewset: ViewSet,
    plan: StagePlan,
    config: SolverConfig,
    lowpass: str = "off",
    omega_max: float = np.pi,
) -> list[StageResult]:
    """Solve each stage for the residual field and accumulate the estimate.

    Stage 0 works on the original views directly; every later stage re-warps
    the original views with the accumulated field (multi-hypothesis warp) and
    solves for what remains. With ``lowpass="auto"`` a stage whose expected
    residual violates the pi/2 bound is solved coarse-to-fine instead.
    """
    if lowpass not in ("off", "auto"):
        raise ParameterError(f"unknown lowpass mode {lowpass!r}")
    _validate_plan(viewset, plan)
    ref_i = viewset.reference_index
    ref_img = viewset.reference.image
    shape = viewset.shape
    w_tot = np.zeros(shape)
    state = SigmaState()
    prev_res: np.ndarray | None = None
    results: list[StageResult] = []
    for si, idx in enumerate(plan.stages):
        t0 = time.perf_counter()
        try:
            items: list[tuple[int, np.ndarray, np.ndarray]] = []
            for i in idx:
                if i == ref_i:
                    continue
                v = viewset.views[i]
                if si == 0:
                    items.append((i, v.image.samples, np.ones(shape, dtype=np.bool_)))
                else:
                    warped, valid = multi_hypothesis_warp(
                        v.image, DisparityField(-w_tot), v.baseline
                    )
                    items.append((i, warped.samples, valid))
            levels = 0
            if lowpass == "auto" and prev_res is not None:
                need, levels = needs_lowpass(
                    viewset, DisparityField(prev_res), omega_max, active=idx
                )
                levels = levels if need else 0
            if levels > 0:
                w_res, steps, state = _solve_stage_pyramid(
                    ref_img.samples, items, viewset, len(idx), levels, config, state
                )
            else:
                views = [
                    linearize_view(
                        ref_img,
                        ImageGrid(img),
                        viewset.views[i].baseline,
                        config.dog_sigma,
                        config.gradient_mode,
                        mask=m,
                    )
                    for i, img, m in items
                ]
                res = irls_solve_linearized(
                    views, len(idx), np.zeros(shape), config, state
                )
                state = res.sigma_state
                steps = res.steps
                w_res = res.w.w
        except NumericalError as e:
            raise NumericalError(f"stage {si}: {e}") from e
        w_tot = w_tot + w_res
        prev_res = w_res
        results.append(
            StageResult(si, tuple(idx), DisparityField(w_tot), steps, levels,
                        time.perf_counter() - t0)
        )
    return results

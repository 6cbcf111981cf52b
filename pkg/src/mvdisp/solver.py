"""Linearized multiview energy and its IRLS / conjugate-gradient minimisation.

The energy is E = E_data + alpha_eff^2 * E_reg with a per-view linearized data
residual a_p*w + b_p and a gradient-magnitude regularizer. Each IRLS step
freezes the penalty weights at the current iterate and solves the weighted
Euler-Lagrange system with preconditioned CG, warm-started at the iterate, so
every step can only decrease the energy.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numba import njit
from scipy import ndimage

from .core import (
    BaselineVec,
    DisparityField,
    ImageGrid,
    NumericalError,
    ParameterError,
    RegForm,
    SolverConfig,
    ViewSet,
)
from .imgproc import diff_blur, dog_gradient
from .robust import (
    SigmaState,
    clamp_sigma,
    estimate_sigma_d,
    penalty_value,
    penalty_weight,
)

LAPLACIAN_STENCIL = np.array(
    [
        [1.0 / 12.0, 1.0 / 6.0, 1.0 / 12.0],
        [1.0 / 6.0, -1.0, 1.0 / 6.0],
        [1.0 / 12.0, 1.0 / 6.0, 1.0 / 12.0],
    ]
)


# --------------------------------------------------------------------------
# Linearization


@dataclass(frozen=True)
class LinearizedView:
    """Per-view linearized data term: residual(w) = a*w + b on valid pixels."""

    a: np.ndarray
    b: np.ndarray
    mask: np.ndarray
    baseline: BaselineVec

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=np.bool_)
        if not (a.shape == b.shape == mask.shape) or a.ndim != 2:
            raise ParameterError("linearized fields must share a 2-D shape")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ParameterError("linearized fields contain non-finite values")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "mask", mask)


def linearize_view(
    ref: ImageGrid,
    other: ImageGrid,
    baseline: BaselineVec,
    sigma: float,
    mode: str = "average",
    mask: np.ndarray | None = None,
) -> LinearizedView:
    """Build a = <DoG gradient, baseline>, b = blurred (ref - other)."""
    grad = dog_gradient(ref, other, sigma, mode)
    a = baseline.bx * grad.gx + baseline.by * grad.gy
    b = diff_blur(ref, other, sigma).samples
    if mask is None:
        mask = np.ones(ref.shape, dtype=np.bool_)
    return LinearizedView(a, b, mask, baseline)


# --------------------------------------------------------------------------
# Discrete operators


def laplacian_apply(w: DisparityField | np.ndarray) -> np.ndarray:
    """3x3 discrete Laplacian (corners 1/12, edges 1/6, centre -1), reflect border."""
    arr = w.w if isinstance(w, DisparityField) else np.asarray(w, dtype=np.float64)
    return ndimage.correlate(arr, LAPLACIAN_STENCIL, mode="reflect")


@lru_cache(maxsize=16)
def _laplacian_diag(shape: tuple[int, int]) -> np.ndarray:
    """Diagonal of the Laplacian stencil operator under reflect folding."""
    h, w = shape
    diag = np.zeros(shape)
    for di in (-1, 0, 1):
        rows = np.zeros(h)
        if di == 0:
            rows[:] = 1.0
        elif di == -1:
            rows[0] = 1.0
        else:
            rows[h - 1] = 1.0
        for dj in (-1, 0, 1):
            cols = np.zeros(w)
            if dj == 0:
                cols[:] = 1.0
            elif dj == -1:
                cols[0] = 1.0
            else:
                cols[w - 1] = 1.0
            diag += LAPLACIAN_STENCIL[di + 1, dj + 1] * np.outer(rows, cols)
    diag.setflags(write=False)
    return diag


def forward_gradient(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward differences with symmetric border (zero beyond the last row/col)."""
    gx = np.zeros_like(w)
    gy = np.zeros_like(w)
    gx[:, :-1] = w[:, 1:] - w[:, :-1]
    gy[:-1, :] = w[1:, :] - w[:-1, :]
    return gx, gy


def gradient_magnitude(w: np.ndarray) -> np.ndarray:
    gx, gy = forward_gradient(w)
    return np.sqrt(gx * gx + gy * gy)


@njit(cache=True)
def _div_apply_kernel(w, wr, diag, a2, out):  # pragma: no cover - jitted
    h, n = w.shape
    for i in range(h):
        for j in range(n):
            acc = 0.0
            wc = w[i, j]
            ww = wr[i, j]
            if j + 1 < n:
                acc += ww * (wc - w[i, j + 1])
            if i + 1 < h:
                acc += ww * (wc - w[i + 1, j])
            if j > 0:
                acc += wr[i, j - 1] * (wc - w[i, j - 1])
            if i > 0:
                acc += wr[i - 1, j] * (wc - w[i - 1, j])
            out[i, j] = diag[i, j] * wc + a2 * acc


def _reg_apply(w: np.ndarray, wr: np.ndarray, form: RegForm) -> np.ndarray:
    """Positive-semidefinite(-intended) regularizer operator application."""
    if form == "divergence":
        out = np.empty_like(w)
        _div_apply_kernel(w, wr, np.zeros_like(w), 1.0, out)
        return out
    if form == "symmetrized":
        return -0.5 * (wr * laplacian_apply(w) + laplacian_apply(wr * w))
    if form == "literal":
        return -wr * laplacian_apply(w)
    raise ParameterError(f"unknown reg_form {form!r}")


def _reg_diag(wr: np.ndarray, form: RegForm) -> np.ndarray:
    if form == "divergence":
        d = np.zeros_like(wr)
        d[:, :-1] += wr[:, :-1]
        d[:, 1:] += wr[:, :-1]
        d[:-1, :] += wr[:-1, :]
        d[1:, :] += wr[:-1, :]
        return d
    return -wr * _laplacian_diag(wr.shape)


# --------------------------------------------------------------------------
# Weighted Euler-Lagrange system


def _residuals_at(views: Sequence[LinearizedView], w: np.ndarray) -> list[np.ndarray]:
    return [v.a * w + v.b for v in views]


def _weights_from_residuals(
    views: Sequence[LinearizedView],
    residuals: Sequence[np.ndarray],
    w: np.ndarray,
    data_kind,
    reg_kind,
) -> tuple[list[np.ndarray], np.ndarray]:
    wd = [penalty_weight(data_kind, r) * v.mask for v, r in zip(views, residuals)]
    wr = penalty_weight(reg_kind, gradient_magnitude(w))
    return wd, wr


def assemble_weights(
    views: Sequence[LinearizedView],
    w: np.ndarray,
    data_kind,
    reg_kind,
) -> tuple[list[np.ndarray], np.ndarray]:
    """IRLS weights at the current iterate: per-view W_d (masked) and W_r."""
    return _weights_from_residuals(views, _residuals_at(views, w), w, data_kind, reg_kind)


class ELSystem:
    """Matrix-free weighted Euler-Lagrange operator with a Jacobi diagonal."""

    def __init__(
        self,
        views: Sequence[LinearizedView],
        wd_fields: Sequence[np.ndarray],
        wr: np.ndarray,
        alpha_eff: float,
        reg_form: RegForm = "divergence",
    ):
        if len(views) != len(wd_fields):
            raise ParameterError("one data-weight field per view is required")
        self.views = list(views)
        self.wd_fields = [np.asarray(f, dtype=np.float64) for f in wd_fields]
        self.wr = np.asarray(wr, dtype=np.float64)
        self.alpha_eff = float(alpha_eff)
        self.reg_form = reg_form
        diag = np.zeros_like(self.wr)
        for v, wd in zip(self.views, self.wd_fields):
            diag += wd * v.a * v.a
        self.data_diag = diag
        a2 = self.alpha_eff * self.alpha_eff
        self.jacobi = np.maximum(diag + a2 * _reg_diag(self.wr, reg_form), 1e-30)

    def apply(self, w: np.ndarray) -> np.ndarray:
        a2 = self.alpha_eff * self.alpha_eff
        if self.reg_form == "divergence":
            out = np.empty_like(w)
            _div_apply_kernel(w, self.wr, self.data_diag, a2, out)
            return out
        return self.data_diag * w + a2 * _reg_apply(w, self.wr, self.reg_form)

    def rhs(self) -> np.ndarray:
        out = np.zeros_like(self.wr)
        for v, wd in zip(self.views, self.wd_fields):
            out -= wd * v.a * v.b
        return out


def el_operator(
    w: DisparityField | np.ndarray,
    views: Sequence[LinearizedView],
    wd_fields: Sequence[np.ndarray],
    wr: np.ndarray,
    alpha_eff: float,
    reg_form: RegForm = "divergence",
) -> np.ndarray:
    """One application of the weighted Euler-Lagrange operator to w."""
    arr = w.w if isinstance(w, DisparityField) else np.asarray(w, dtype=np.float64)
    return ELSystem(views, wd_fields, wr, alpha_eff, reg_form).apply(arr)


# --------------------------------------------------------------------------
# Conjugate gradient


def cg_solve(
    operator: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    tol: float,
    max_iters: int,
    precond_diag: np.ndarray | None = None,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, int, float]:
    """Preconditioned CG for SPD systems; returns (x, iterations, rel_residual).

    Stops when ||A x - rhs|| <= tol * ||rhs|| or after ``max_iters`` (the
    reached residual is reported either way). Deterministic given inputs.
    """
    if not (tol > 0):
        raise ParameterError("cg tolerance must be > 0")
    rhs = np.asarray(rhs, dtype=np.float64)
    bnorm = float(np.linalg.norm(rhs))
    if bnorm == 0.0:
        return np.zeros_like(rhs), 0, 0.0
    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=np.float64)
    r = rhs - operator(x)
    res = float(np.linalg.norm(r)) / bnorm
    if res <= tol:
        return x, 0, res
    minv = None if precond_diag is None else 1.0 / np.asarray(precond_diag)
    z = r if minv is None else minv * r
    p = z.copy()
    rho = float(np.vdot(r, z).real)
    iters = 0
    for iters in range(1, max_iters + 1):
        q = operator(p)
        denom = float(np.vdot(p, q).real)
        alpha = rho / denom if denom != 0.0 else np.inf
        if not np.isfinite(alpha):
            raise NumericalError(
                f"conjugate gradient encountered a non-finite step at iteration {iters}"
            )
        x += alpha * p
        r -= alpha * q
        res = float(np.linalg.norm(r)) / bnorm
        if not np.isfinite(res):
            raise NumericalError(
                f"conjugate gradient residual became non-finite at iteration {iters}"
            )
        if res <= tol:
            break
        z = r if minv is None else minv * r
        rho_new = float(np.vdot(r, z).real)
        beta = rho_new / rho
        rho = rho_new
        p *= beta
        p += z
    return x, iters, res


# --------------------------------------------------------------------------
# Energy evaluation


@dataclass(frozen=True)
class EnergyBreakdown:
    e_data: float
    e_reg: float
    e_total: float
    alpha_eff: float

    def __post_init__(self):
        for name in ("e_data", "e_reg", "e_total", "alpha_eff"):
            if not np.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} is not finite")


def _energy_from_residuals(
    residuals: Sequence[np.ndarray],
    views: Sequence[LinearizedView],
    w: np.ndarray,
    config: SolverConfig,
    n_views: int,
    sigma: float | None,
) -> EnergyBreakdown:
    data_kind = config.data_penalty.bound(sigma)
    e_data = 0.0
    for v, r in zip(views, residuals):
        e_data += float((penalty_value(data_kind, r) * v.mask).sum())
    e_reg = float(penalty_value(config.reg_penalty, gradient_magnitude(w)).sum())
    alpha_eff = config.alpha * float(np.sqrt(n_views))
    return EnergyBreakdown(e_data, e_reg, e_data + alpha_eff**2 * e_reg, alpha_eff)


def energy_from_views(
    w: np.ndarray,
    views: Sequence[LinearizedView],
    config: SolverConfig,
    n_views: int,
    sigma: float | None = None,
) -> EnergyBreakdown:
    """E_data + alpha_eff^2 * E_reg with alpha_eff = alpha * sqrt(n_views)."""
    w = np.asarray(w, dtype=np.float64)
    return _energy_from_residuals(
        _residuals_at(views, w), views, w, config, n_views, sigma
    )


def energy_eval(
    w: DisparityField,
    viewset: ViewSet,
    config: SolverConfig,
    sigma: float | None = None,
    active: Sequence[int] | None = None,
) -> EnergyBreakdown:
    """Energy of ``w`` for the (sub)set of views, linearizing on the fly."""
    active = list(range(len(viewset))) if active is None else list(active)
    views = _linearize_active(viewset, active, config)
    return energy_from_views(w.w, views, config, len(active), sigma)


# --------------------------------------------------------------------------
# IRLS driver


@dataclass(frozen=True)
class IrlsStep:
    iteration: int
    sigma: float | None
    energy: EnergyBreakdown
    cg_iterations: int
    cg_residual: float


@dataclass(frozen=True)
class IrlsResult:
    w: DisparityField
    steps: tuple[IrlsStep, ...]
    sigma_state: SigmaState

    @property
    def energies(self) -> list[float]:
        return [s.energy.e_total for s in self.steps]


def _linearize_active(
    viewset: ViewSet,
    active: Sequence[int],
    config: SolverConfig,
    masks: dict[int, np.ndarray] | None = None,
) -> list[LinearizedView]:
    ref = viewset.reference.image
    views = []
    for i in active:
        if i == viewset.reference_index:
            continue
        v = viewset.views[i]
        mask = None if masks is None else masks.get(i)
        views.append(
            linearize_view(ref, v.image, v.baseline, config.dog_sigma,
                           config.gradient_mode, mask=mask)
        )
    return views


def _nearest_of(views: Sequence[LinearizedView]) -> list[int]:
    lo = min(v.baseline.norm_inf for v in views)
    return [i for i, v in enumerate(views) if v.baseline.norm_inf <= lo + 1e-9]


def irls_solve_linearized(
    views: Sequence[LinearizedView],
    n_views: int,
    w_init: np.ndarray,
    config: SolverConfig,
    sigma_state: SigmaState | None = None,
) -> IrlsResult:
    """IRLS on pre-linearized views; ``n_views`` counts the reference too."""
    if not views:
        raise ParameterError("at least one non-reference view is required")
    sigma_state = SigmaState() if sigma_state is None else sigma_state
    w = np.array(w_init, dtype=np.float64)
    alpha_eff = config.alpha * float(np.sqrt(n_views))
    auto = config.data_penalty.is_auto
    adjacent = _nearest_of(views)
    sigma: float | None = None
    if config.data_penalty.tag == "welsch" and not auto:
        sigma = config.data_penalty.sigma
    steps: list[IrlsStep] = []
    residuals = _residuals_at(views, w)
    for it in range(1, config.irls_iters + 1):
        if auto:
            sigma_state = clamp_sigma(
                sigma_state, estimate_sigma_d(views, w, adjacent)
            )
            sigma = sigma_state.current
        data_kind = config.data_penalty.bound(sigma)
        if it == 1:
            steps.append(
                IrlsStep(0, sigma,
                         _energy_from_residuals(residuals, views, w, config, n_views, sigma),
                         0, 0.0)
            )
        wd, wr = _weights_from_residuals(views, residuals, w, data_kind, config.reg_penalty)
        system = ELSystem(views, wd, wr, alpha_eff, config.reg_form)
        w, cg_iters, cg_res = cg_solve(
            system.apply,
            system.rhs(),
            config.cg_tol,
            config.cg_max_iters,
            precond_diag=system.jacobi,
            x0=w,
        )
        residuals = _residuals_at(views, w)
        steps.append(
            IrlsStep(it, sigma,
                     _energy_from_residuals(residuals, views, w, config, n_views, sigma),
                     cg_iters, cg_res)
        )
    return IrlsResult(DisparityField(w), tuple(steps), sigma_state)


def irls_solve(
    viewset: ViewSet,
    w_init: DisparityField,
    config: SolverConfig,
    sigma_state: SigmaState | None = None,
    active: Sequence[int] | None = None,
    masks: dict[int, np.ndarray] | None = None,
) -> IrlsResult:
    """Estimate the disparity field for a view subset (default: all views)."""
    active = list(range(len(viewset))) if active is None else list(active)
    if w_init.shape != viewset.shape:
        raise ParameterError(
            f"w_init shape {w_init.shape} does not match views {viewset.shape}"
        )
    views = _linearize_active(viewset, active, config, masks)
    n_views = len(active) if viewset.reference_index in active else len(active) + 1
    return irls_solve_linearized(views, n_views, w_init.w, config, sigma_state)

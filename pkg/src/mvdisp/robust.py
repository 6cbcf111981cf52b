"""Robust penalties, their IRLS weights, and the automatic Welsch scale.

The Welsch scale sigma_d can be re-estimated at every reweighting step; a
monotonicity clamp (see :class:`SigmaState`) prevents it from ever growing, so
the robust data cost can only tighten as the iteration proceeds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .core import (
    ParameterError,
    PenaltyKind,
    SigmaEstimationError,
    SigmaUnboundError,
)

if TYPE_CHECKING:  # pragma: no cover
    from .solver import LinearizedView

SIGMA_FLOOR = 1e-4  # keeps IRLS weights finite on noiseless data


def _require_bound(kind: PenaltyKind):
    if kind.is_auto:
        raise SigmaUnboundError(
            "Welsch sigma is automatic and has not been bound to a value"
        )


def penalty_value(kind: PenaltyKind, x):
    """Pointwise cost. L2: x^2/2; Huber: quadratic below eps, |x|-eps/2 above;
    Welsch: sigma^2*(1 - exp(-x^2/(2 sigma^2)))."""
    _require_bound(kind)
    x = np.asarray(x, dtype=np.float64)
    if kind.tag == "l2":
        out = 0.5 * x * x
    elif kind.tag == "huber":
        eps = kind.epsilon
        ax = np.abs(x)
        out = np.where(ax <= eps, x * x / (2.0 * eps), ax - 0.5 * eps)
    else:
        s2 = kind.sigma * kind.sigma
        out = s2 * (1.0 - np.exp(-(x * x) / (2.0 * s2)))
    return out if out.ndim else float(out)


def penalty_weight(kind: PenaltyKind, x):
    """IRLS weight phi'(x)/x; finite at x = 0 for every kind."""
    _require_bound(kind)
    x = np.asarray(x, dtype=np.float64)
    if kind.tag == "l2":
        out = np.ones_like(x)
    elif kind.tag == "huber":
        eps = kind.epsilon
        ax = np.abs(x)
        out = np.where(ax <= eps, 1.0 / eps, 1.0 / np.maximum(ax, eps))
    else:
        s2 = kind.sigma * kind.sigma
        out = np.exp(-(x * x) / (2.0 * s2))
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# Automatic sigma_d


@dataclass(frozen=True)
class SigmaState:
    """Monotone history of the Welsch data scale across reweighting steps."""

    history: tuple[float, ...] = ()

    def __post_init__(self):
        h = tuple(float(v) for v in self.history)
        for prev, nxt in zip(h, h[1:]):
            if nxt > prev:
                raise ParameterError("sigma history must be non-increasing")
        object.__setattr__(self, "history", h)

    @property
    def current(self) -> float:
        if not self.history:
            raise SigmaUnboundError("no sigma has been observed yet")
        return self.history[-1]


def clamp_sigma(state: SigmaState, proposal: float) -> SigmaState:
    """Accept ``proposal`` only if it does not exceed the current scale."""
    if not (np.isfinite(proposal) and proposal > 0):
        raise ParameterError(f"sigma proposal must be positive, got {proposal}")
    new = proposal if not state.history else min(state.current, proposal)
    return SigmaState(state.history + (new,))


def estimate_sigma_d(
    views: Sequence["LinearizedView"],
    w: np.ndarray,
    adjacent: Sequence[int],
    floor: float = SIGMA_FLOOR,
) -> float:
    """Mean over centre-adjacent views of the RMS linearized residual a*w + b.

    Per view, the RMS runs over its valid-mask pixels; views with an empty
    mask are excluded from the mean. The result is floored at ``floor`` so a
    perfect fit on noiseless data cannot collapse the Welsch weights.
    """
    if not adjacent:
        raise ParameterError("adjacency set is empty")
    w = np.asarray(w, dtype=np.float64)
    per_view = []
    for i in adjacent:
        v = views[i]
        m = v.mask
        if not m.any():
            continue
        r = v.a[m] * w[m] + v.b[m]
        per_view.append(float(np.sqrt(np.mean(r * r))))
    if not per_view:
        raise SigmaEstimationError(
            "all adjacent views have empty valid-pixel sets; cannot estimate sigma"
        )
    return max(float(np.mean(per_view)), floor)

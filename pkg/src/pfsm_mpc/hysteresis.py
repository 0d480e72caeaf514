"""Asymmetric Bouc-Wen hysteresis: forward stepping and exact inversion.

The nonlinearity between drive voltage u and effective hysteresis voltage
v_h = u + h is rate independent: the internal variable h moves only with the
increments of u, never with elapsed time.  One discrete transition from
u_prev to u_next advances h by

    dh = alpha*du - beta*|du|*|h|^(n-1)*h - gamma*du*|h|^n + delta*du*u_prev

with du = u_next - u_prev.  Because dh is linear in du and |du| for the old
(h, u_prev), the step can be inverted in closed form: given a target v_h the
drive u that produces it is recovered exactly, which is what the cascaded
compensation stage relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BoucWenParams",
    "HysteresisState",
    "bouc_wen_step",
    "bouc_wen_inverse_step",
    "simulate_forward",
]


@dataclass(frozen=True)
class BoucWenParams:
    """Shape parameters of the asymmetric Bouc-Wen nonlinearity.

    All-zero parameters degenerate the model to the identity map v_h = u.
    ``delta`` (1/volt) is the asymmetry coefficient; ``n >= 1`` shapes the
    loop's saturation.
    """

    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    delta: float = 0.0
    n: float = 1.0

    def __post_init__(self):
        vals = (self.alpha, self.beta, self.gamma, self.delta, self.n)
        if not all(np.isfinite(vals)):
            raise ValueError("Bouc-Wen parameters must be finite")
        if self.n < 1.0:
            raise ValueError("exponent n must be >= 1")

    def is_identity(self) -> bool:
        return self.alpha == self.beta == self.gamma == self.delta == 0.0


# Synthetic default loop: visibly open yet comfortably invertible.  The
# identified values for real hardware are not bundled; experiment configs
# override these.
DEFAULT_PARAMS = BoucWenParams(alpha=0.4, beta=0.02, gamma=0.01, delta=0.001, n=1.0)


@dataclass(frozen=True)
class HysteresisState:
    """Internal variable h and the last applied drive voltage."""

    h: float = 0.0
    u_prev: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.h) and np.isfinite(self.u_prev)):
            raise ValueError("hysteresis state must be finite")


def _signed_power(h: float, n: float) -> float:
    # |h|^(n-1) * h with the continuous extension 0 at h = 0
    if h == 0.0:
        return 0.0
    return abs(h) ** (n - 1.0) * h


def _increment(params: BoucWenParams, h: float, u_prev: float, du: float) -> float:
    return (
        params.alpha * du
        - params.beta * abs(du) * _signed_power(h, params.n)
        - params.gamma * du * abs(h) ** params.n
        + params.delta * du * u_prev
    )


def bouc_wen_step(
    state: HysteresisState, params: BoucWenParams, u_next: float, dt: float
) -> tuple[HysteresisState, float]:
    """Advance the hysteresis variable by one drive transition.

    ``dt`` is validated but does not enter the update: the model is rate
    independent, so the trajectory of h depends only on the sequence of
    drive values.

    Returns
    -------
    (HysteresisState, float)
        The advanced state and the hysteresis voltage v_h = u_next + h_next.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not np.isfinite(u_next):
        raise ValueError("drive voltage must be finite")
    du = u_next - state.u_prev
    h_next = state.h + _increment(params, state.h, state.u_prev, du)
    return HysteresisState(h=h_next, u_prev=u_next), u_next + h_next


def bouc_wen_inverse_step(
    state: HysteresisState, params: BoucWenParams, v_h_next: float
) -> tuple[HysteresisState, float]:
    """Solve one forward transition for the drive that realizes ``v_h_next``.

    The forward step is piecewise linear in the drive increment, so the
    inversion is a closed-form two-branch solve; feeding the returned drive
    into :func:`bouc_wen_step` from the same state reproduces ``v_h_next``
    to rounding.  Raises if the loop parameters make the transition
    non-invertible (the increment map loses monotonicity).
    """
    if not np.isfinite(v_h_next):
        raise ValueError("target hysteresis voltage must be finite")
    h, u_prev = state.h, state.u_prev
    p = params.alpha - params.gamma * abs(h) ** params.n + params.delta * u_prev
    q = params.beta * _signed_power(h, params.n)
    r = v_h_next - u_prev - h
    slope = (1.0 + p - q) if r >= 0 else (1.0 + p + q)
    if slope <= 0.0:
        raise ValueError("hysteresis transition is not invertible for this state")
    du = r / slope
    h_next = h + _increment(params, h, u_prev, du)
    u_next = v_h_next - h_next
    return HysteresisState(h=h_next, u_prev=u_next), u_next


def simulate_forward(
    params: BoucWenParams, u_seq: np.ndarray, dt: float, state: HysteresisState | None = None
) -> np.ndarray:
    """Run a drive sequence through the forward model; returns the v_h sequence."""
    st = state if state is not None else HysteresisState()
    out = np.empty(len(u_seq))
    for k, u in enumerate(np.asarray(u_seq, dtype=float)):
        st, out[k] = bouc_wen_step(st, params, u, dt)
    return out

"""Drive-voltage synthesis: per-axis hysteresis inversion after the controller.

The controller commands hysteresis voltages v_h1; each axis' inverse model
tracks its own copy of the hysteresis state and solves for the drive u that
realizes the command.  The physical amplifier range is enforced on u after
inversion, so the inverse tracker evolves on its own (unclamped) drive
history; a saturation episode therefore leaves the tracker and the actual
actuator state apart, which downstream feedback has to absorb.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hysteresis import BoucWenParams, HysteresisState, bouc_wen_inverse_step

__all__ = ["CompensatorState", "compensate", "HysteresisCompensator"]


@dataclass(frozen=True)
class CompensatorState:
    """Per-axis inverse-model tracker states."""

    inv_x: HysteresisState
    inv_y: HysteresisState


def compensate(
    state: CompensatorState,
    params_x: BoucWenParams,
    params_y: BoucWenParams,
    v_h1: np.ndarray,
    u_min: float = 0.0,
    u_max: float = 100.0,
) -> tuple[CompensatorState, np.ndarray, np.ndarray]:
    """Invert one command sample per axis and clamp to the amplifier range.

    Returns (new state, drive 2-vector, per-axis saturation flags).
    """
    v = np.asarray(v_h1, dtype=float)
    if v.shape != (2,) or not np.all(np.isfinite(v)):
        raise ValueError("commanded voltage must be a finite 2-vector")
    st_x, ux = bouc_wen_inverse_step(state.inv_x, params_x, v[0])
    st_y, uy = bouc_wen_inverse_step(state.inv_y, params_y, v[1])
    u = np.array([ux, uy])
    clamped = np.clip(u, u_min, u_max)
    saturated = clamped != u
    return CompensatorState(inv_x=st_x, inv_y=st_y), clamped, saturated


class HysteresisCompensator:
    """Stateful per-loop wrapper around :func:`compensate`."""

    def __init__(
        self,
        params_x: BoucWenParams,
        params_y: BoucWenParams,
        u_min: float = 0.0,
        u_max: float = 100.0,
        bias: float = 50.0,
    ):
        self.params_x = params_x
        self.params_y = params_y
        self.u_min = u_min
        self.u_max = u_max
        self.state = CompensatorState(
            inv_x=HysteresisState(h=0.0, u_prev=bias),
            inv_y=HysteresisState(h=0.0, u_prev=bias),
        )
        self.saturated_steps = 0

    def step(self, v_h1: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        self.state, u, sat = compensate(
            self.state, self.params_x, self.params_y, v_h1, self.u_min, self.u_max
        )
        if np.any(sat):
            self.saturated_steps += 1
        return u, sat

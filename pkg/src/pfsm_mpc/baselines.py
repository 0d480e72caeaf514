"""Comparison controllers: per-axis PID and open-loop inverse-model feedforward.

Both emit drive voltages around the 50 V supply bias.  The PID is the
model-free reference point (filtered derivative, conditional-integration
anti-windup); the feedforward baseline inverts the plant's zero-frequency
gain matrix and the hysteresis stage but never looks at a measurement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compensator import HysteresisCompensator
from .hysteresis import BoucWenParams
from .lti import MimoPlantModel

__all__ = ["PidGains", "PidController", "DimFeedforward"]


@dataclass(frozen=True)
class PidGains:
    """Parallel-form gains, shared by both axes unless overridden per axis.

    Units: kp V/mrad, ki V/(mrad s), kd V s/mrad; ``derivative_filter_tau``
    is the first-order filter time constant on the derivative term.
    Defaults come from scripts/tune_pid.py (best 100 Hz sine RMSE on the
    bundled plant).
    """

    kp: float = 30.0
    ki: float = 40000.0
    kd: float = 0.0015
    derivative_filter_tau: float = 2.5e-3
    u_min: float = 0.0
    u_max: float = 100.0

    def __post_init__(self):
        if min(self.kp, self.ki, self.kd) < 0 or self.derivative_filter_tau < 0:
            raise ValueError("gains must be non-negative")
        if not self.u_min < self.u_max:
            raise ValueError("output limits must be ordered")


class PidController:
    """Two independent PID loops on the angle error, biased to mid-supply."""

    def __init__(self, gains: PidGains, dt: float, bias: float = 50.0):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.g = gains
        self.dt = dt
        self.bias = bias
        self.integral = np.zeros(2)
        self.deriv = np.zeros(2)
        self.err_prev = np.zeros(2)

    def step(self, error: np.ndarray) -> np.ndarray:
        """One update on the per-axis error (mrad); returns the drive (V)."""
        e = np.asarray(error, dtype=float)
        g, dt = self.g, self.dt
        # filtered derivative: first-order smoothing of the raw difference
        raw = (e - self.err_prev) / dt
        alpha = dt / (g.derivative_filter_tau + dt) if g.derivative_filter_tau > 0 else 1.0
        self.deriv = self.deriv + alpha * (raw - self.deriv)
        self.err_prev = e

        candidate = self.integral + e * dt
        rest = self.bias + g.kp * e + g.kd * self.deriv
        u = np.clip(rest + g.ki * candidate, g.u_min, g.u_max)
        if g.ki > 0.0:
            # back-calculation anti-windup: wherever the output saturates,
            # hold the integrator at the value consistent with the limit
            self.integral = np.minimum(np.maximum(candidate, (g.u_min - rest) / g.ki), (g.u_max - rest) / g.ki)
        return u


class DimFeedforward:
    """Open-loop inverse-model command: static decoupling then hysteresis inversion.

    The linear stage is approximated by the inverse of the plant's 2x2
    zero-frequency gain matrix; the resulting hysteresis-voltage command is
    pushed through the exact Bouc-Wen inversion.  No feedback anywhere.
    """

    def __init__(
        self,
        plant: MimoPlantModel,
        params_x: BoucWenParams,
        params_y: BoucWenParams,
        bias: float = 50.0,
    ):
        gains = np.array(
            [
                [plant.g_xx.dc_gain(), plant.g_yx.dc_gain()],
                [plant.g_xy.dc_gain(), plant.g_yy.dc_gain()],
            ]
        )
        dc = plant.input_gain * gains
        if abs(np.linalg.det(dc)) < 1e-300:
            raise ValueError("plant zero-frequency gain matrix is singular")
        self.dc_inv = np.linalg.inv(dc)
        self.bias = bias
        self.comp = HysteresisCompensator(params_x, params_y, bias=bias)

    def step(self, theta_d: np.ndarray) -> np.ndarray:
        """Drive command for the current reference sample (mrad -> V)."""
        v = self.dc_inv @ np.asarray(theta_d, dtype=float)
        u, _ = self.comp.step(v + self.bias)
        return u

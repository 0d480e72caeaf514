"""Closed-loop simulation target: hysteresis stages cascaded into the MIMO
linear dynamics, with optional disturbances and sensor noise.

Each axis drive u first passes through its Bouc-Wen stage (plus any input
disturbance), producing the hysteresis voltage v_h1.  The differential
recentering v = v_h1 - bias (bias 50 V for the 100 V push-pull supply) then
drives the discrete linear model.  Angles are in mrad, voltages in volts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hysteresis import BoucWenParams, HysteresisState, bouc_wen_step
from .lti import StateSpaceModel

__all__ = ["DisturbanceSpec", "PlantState", "PfsmPlant", "SUPPLY_BIAS"]

SUPPLY_BIAS = 50.0  # volts; half the fixed push-pull supply


@dataclass(frozen=True)
class DisturbanceSpec:
    """Deterministic per-step disturbances injected into the plant.

    ``kind`` is one of ``none``, ``constant``, ``sine`` or ``step`` (constant
    switched on at ``start_time``).  ``value`` is the per-axis amplitude:
    volts for the input side, mrad for the output side.
    """

    kind: str = "none"
    value: tuple = (0.0, 0.0)
    frequency: float = 0.0
    start_time: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "constant", "sine", "step"):
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        v = [float(x) for x in np.atleast_1d(self.value)]
        if len(v) == 1:
            v = v * 2
        if len(v) != 2:
            raise ValueError("disturbance value must be a scalar or a 2-vector")
        object.__setattr__(self, "value", tuple(v))

    def sample(self, t: float) -> np.ndarray:
        v = np.asarray(self.value)
        if self.kind == "none":
            return np.zeros(2)
        if self.kind == "constant":
            return v.copy()
        if self.kind == "step":
            return v.copy() if t >= self.start_time else np.zeros(2)
        return v * np.sin(2.0 * np.pi * self.frequency * t)


@dataclass
class PlantState:
    """Mutable simulation state: per-axis hysteresis plus the linear state vector."""

    hx: HysteresisState
    hy: HysteresisState
    x_lin: np.ndarray
    rng_seed: int = 0


class PfsmPlant:
    """Stepping simulator of the full Hammerstein mirror plant.

    One instance owns one simulation (the internal RNG makes runs with equal
    seeds bit-identical); create a fresh instance per experiment.
    """

    def __init__(
        self,
        model: StateSpaceModel,
        params_x: BoucWenParams,
        params_y: BoucWenParams,
        dt: float,
        sensor_noise_std: float = 0.0,
        input_disturbance: DisturbanceSpec | None = None,
        output_disturbance: DisturbanceSpec | None = None,
        u_min: float = 0.0,
        u_max: float = 100.0,
        seed: int = 0,
        bias: float = SUPPLY_BIAS,
    ):
        if model.dt <= 0:
            raise ValueError("plant model must be discrete")
        if sensor_noise_std < 0:
            raise ValueError("sensor noise std must be non-negative")
        if not u_min < u_max:
            raise ValueError("u_min must be below u_max")
        self.model = model
        self.params_x = params_x
        self.params_y = params_y
        self.dt = dt
        self.noise_std = sensor_noise_std
        self.dist_in = input_disturbance or DisturbanceSpec()
        self.dist_out = output_disturbance or DisturbanceSpec()
        self.u_min = u_min
        self.u_max = u_max
        self.bias = bias
        self.rng = np.random.default_rng(seed)
        # rest point: both stages relaxed at the supply bias
        self.state = PlantState(
            hx=HysteresisState(h=0.0, u_prev=bias),
            hy=HysteresisState(h=0.0, u_prev=bias),
            x_lin=np.zeros(model.n_states),
            rng_seed=seed,
        )
        self.k = 0
        self.clamped_steps = 0

    def step(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Apply one drive sample; returns (theta_meas, theta_true) in mrad.

        The drive is clamped to the physical range before the hysteresis
        stages; the output row reflects the state at the current instant.
        """
        u = np.asarray(u, dtype=float)
        if u.shape != (2,) or not np.all(np.isfinite(u)):
            raise ValueError("drive must be a finite 2-vector")
        t = self.k * self.dt
        uc = np.clip(u, self.u_min, self.u_max)
        if np.any(uc != u):
            self.clamped_steps += 1
        eps = self.dist_in.sample(t)
        st_x, vh_x = bouc_wen_step(self.state.hx, self.params_x, uc[0] + eps[0], self.dt)
        st_y, vh_y = bouc_wen_step(self.state.hy, self.params_y, uc[1] + eps[1], self.dt)
        v = np.array([vh_x, vh_y]) - self.bias
        m = self.model
        theta_true = m.C @ self.state.x_lin + m.D @ v + self.dist_out.sample(t)
        if self.noise_std > 0.0:
            theta_meas = theta_true + self.rng.normal(0.0, self.noise_std, 2)
        else:
            theta_meas = theta_true.copy()
        self.state = PlantState(
            hx=st_x,
            hy=st_y,
            x_lin=m.A @ self.state.x_lin + m.B @ v,
            rng_seed=self.state.rng_seed,
        )
        self.k += 1
        return theta_meas, theta_true

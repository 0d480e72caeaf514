"""Experiment configuration: one YAML tree per run, resolved into objects.

The file mirrors the pipeline: a plant block (channel coefficients, creep,
hysteresis parameters, noise, disturbances, drive limits), a controller block
(mpc | pid | dim plus the compensator), and a trajectory block.  Every value
has a default, so a minimal config can be just a controller kind and a
trajectory.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .baselines import PidGains
from .estimator import KalmanConfig
from .hysteresis import DEFAULT_PARAMS, BoucWenParams
from .lti import MimoPlantModel, TransferFunction, default_creep, default_mirror_model
from .mpc import MpcConfig
from .plant import DisturbanceSpec
from .trajectories import AxisWaveform, TrajectorySpec

__all__ = ["PlantConfig", "ControllerConfig", "ExperimentConfig", "load_config", "resolve_config", "set_by_path"]


@dataclass
class PlantConfig:
    model: MimoPlantModel
    include_creep: bool = False
    bouc_wen_x: BoucWenParams = field(default_factory=lambda: DEFAULT_PARAMS)
    bouc_wen_y: BoucWenParams = field(default_factory=lambda: DEFAULT_PARAMS)
    sensor_noise_std: float = 0.002
    u_min: float = 0.0
    u_max: float = 100.0
    input_disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    output_disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)


@dataclass
class ControllerConfig:
    kind: str = "mpc"
    mpc: MpcConfig = field(default_factory=MpcConfig)
    kalman: KalmanConfig = field(default_factory=KalmanConfig)
    pid: PidGains = field(default_factory=PidGains)
    compensator_enabled: bool = True
    compensator_x: BoucWenParams | None = None  # None -> match the plant
    compensator_y: BoucWenParams | None = None


@dataclass
class ExperimentConfig:
    dt: float
    duration: float
    seed: int
    warmup_skip: int
    output_dir: str
    name: str
    plant: PlantConfig
    controller: ControllerConfig
    trajectory: TrajectorySpec
    raw: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.duration < self.dt:
            raise ValueError("duration must cover at least one sample")
        if self.warmup_skip < 0:
            raise ValueError("warmup_skip must be non-negative")


def load_config(path) -> dict:
    """Read the raw YAML tree (kept raw so sweeps can patch dotted keys)."""
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"config root must be a mapping, got {type(data).__name__}")
    data.setdefault("name", Path(path).stem)
    return data


def _bouc_wen(d: dict | None, fallback: BoucWenParams) -> BoucWenParams:
    if d is None:
        return fallback
    return BoucWenParams(
        alpha=float(d.get("alpha", 0.0)),
        beta=float(d.get("beta", 0.0)),
        gamma=float(d.get("gamma", 0.0)),
        delta=float(d.get("delta", 0.0)),
        n=float(d.get("n", 1.0)),
    )


def _tf(d: dict) -> TransferFunction:
    return TransferFunction(tuple(d["num"]), tuple(d["den"]))


def _disturbance(d: dict | None) -> DisturbanceSpec:
    if not d:
        return DisturbanceSpec()
    return DisturbanceSpec(
        kind=d.get("kind", "none"),
        value=d.get("value", 0.0),
        frequency=float(d.get("frequency", 0.0)),
        start_time=float(d.get("start_time", 0.0)),
    )


def _plant(d: dict) -> PlantConfig:
    channels = d.get("channels", "default")
    include_creep = bool(d.get("include_creep", False))
    creep_cfg = d.get("creep", {}) or {}
    creep = TransferFunction(
        (1.0, float(creep_cfg.get("zero", 0.8))),
        (1.0, float(creep_cfg.get("pole", 0.5))),
    ) if (creep_cfg or include_creep) else default_creep()
    if channels == "default":
        base = default_mirror_model()
        model = MimoPlantModel(
            g_xx=base.g_xx, g_yy=base.g_yy, g_xy=base.g_xy, g_yx=base.g_yx,
            creep_x=creep, creep_y=creep,
            input_gain=float(d.get("input_gain", 2.0)),
        )
    else:
        model = MimoPlantModel(
            g_xx=_tf(channels["g_xx"]),
            g_yy=_tf(channels["g_yy"]),
            g_xy=_tf(channels["g_xy"]),
            g_yx=_tf(channels["g_yx"]),
            creep_x=creep,
            creep_y=creep,
            input_gain=float(d.get("input_gain", 2.0)),
        )
    bw = d.get("bouc_wen", {}) or {}
    bw_x = _bouc_wen(bw.get("x"), DEFAULT_PARAMS)
    bw_y = _bouc_wen(bw.get("y"), DEFAULT_PARAMS)
    return PlantConfig(
        model=model,
        include_creep=include_creep,
        bouc_wen_x=bw_x,
        bouc_wen_y=bw_y,
        sensor_noise_std=float(d.get("sensor_noise_std", 0.002)),
        u_min=float(d.get("u_min", 0.0)),
        u_max=float(d.get("u_max", 100.0)),
        input_disturbance=_disturbance(d.get("input_disturbance")),
        output_disturbance=_disturbance(d.get("output_disturbance")),
    )


def _controller(d: dict, plant: PlantConfig) -> ControllerConfig:
    kind = d.get("kind", "mpc")
    if kind not in ("mpc", "pid", "dim"):
        raise ValueError(f"unknown controller kind {kind!r}")
    m = d.get("mpc", {}) or {}
    mpc = MpcConfig(
        horizon=int(m.get("horizon", 4)),
        rho=float(m.get("rho", 1.0e-8)),
        ki=m.get("ki", 1.0),
        theta_min=m.get("theta_min", -2.0),
        theta_max=m.get("theta_max", 2.0),
        v_min=m.get("v_min", -50.0),
        v_max=m.get("v_max", 50.0),
        cd_sweeps=int(m.get("cd_sweeps", 50)),
        cd_tol=float(m.get("cd_tol", 1.0e-8)),
        output_constraints=bool(m.get("output_constraints", True)),
    )
    kal = m.get("kalman", {}) or {}
    kalman = KalmanConfig(
        q_scale=float(kal.get("q_scale", 200.0)),
        r_scale=float(kal.get("r_scale", 4.0e3)),
    )
    p = d.get("pid", {}) or {}
    defaults = PidGains()
    pid = PidGains(
        kp=float(p.get("kp", defaults.kp)),
        ki=float(p.get("ki", defaults.ki)),
        kd=float(p.get("kd", defaults.kd)),
        derivative_filter_tau=float(p.get("derivative_filter_tau", defaults.derivative_filter_tau)),
        u_min=plant.u_min,
        u_max=plant.u_max,
    )
    comp = d.get("compensator", {}) or {}
    return ControllerConfig(
        kind=kind,
        mpc=mpc,
        kalman=kalman,
        pid=pid,
        compensator_enabled=bool(comp.get("enabled", True)),
        compensator_x=_bouc_wen(comp.get("x"), plant.bouc_wen_x) if comp.get("x") else None,
        compensator_y=_bouc_wen(comp.get("y"), plant.bouc_wen_y) if comp.get("y") else None,
    )


def _waveform(d: dict | None) -> AxisWaveform:
    d = d or {}
    return AxisWaveform(
        kind=d.get("kind", "sine"),
        amplitude=float(d.get("amplitude", 0.8)),
        frequency=float(d.get("frequency", 100.0)),
        phase=float(d.get("phase", 0.0)),
        offset=float(d.get("offset", 0.0)),
        slope=float(d.get("slope", 0.0)),
        step_time=float(d.get("step_time", 0.0)),
    )


def resolve_config(data: dict) -> ExperimentConfig:
    """Turn a raw config mapping into validated pipeline objects."""
    plant = _plant(data.get("plant", {}) or {})
    controller = _controller(data.get("controller", {}) or {}, plant)
    traj_d = data.get("trajectory", {}) or {}
    duration = float(data.get("duration", 0.5))
    if "both" in traj_d:
        # one waveform driving the two axes simultaneously (sweep-friendly)
        wf = _waveform(traj_d["both"])
        trajectory = TrajectorySpec.both(wf, duration)
    else:
        trajectory = TrajectorySpec(
            x=_waveform(traj_d.get("x")),
            y=_waveform(traj_d.get("y")),
            duration=duration,
        )
    return ExperimentConfig(
        dt=float(data.get("dt", 5.0e-4)),
        duration=duration,
        seed=int(data.get("seed", 0)),
        warmup_skip=int(data.get("warmup_skip", 0)),
        output_dir=str(data.get("output_dir", "results")),
        name=str(data.get("name", "experiment")),
        plant=plant,
        controller=controller,
        trajectory=trajectory,
        raw=copy.deepcopy(data),
    )


def set_by_path(data: dict, dotted: str, value) -> None:
    """Assign into a nested mapping by dotted key, creating levels as needed."""
    keys = dotted.split(".")
    node = data
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ValueError(f"cannot descend into {dotted!r}: {k!r} is not a mapping")
    node[keys[-1]] = value

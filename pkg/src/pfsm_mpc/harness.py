"""Experiment runner: wires plant, estimator, controller, and compensator
into a closed-loop run, collects per-step records, and persists CSV output.

The loop follows the hardware timing: the command applied at sample k was
computed at k-1, so the controller always works one period ahead.  All
randomness flows from the experiment seed; rerunning a config reproduces its
CSV byte for byte.
"""

from __future__ import annotations

import copy
import itertools
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import DimFeedforward, PidController
from .compensator import HysteresisCompensator
from .config import ExperimentConfig, resolve_config, set_by_path
from .estimator import KalmanFilter
from .lti import StateSpaceModel, assemble_mimo
from .metrics import mae, rmse
from .mpc import MpcController
from .plant import SUPPLY_BIAS, PfsmPlant
from .trajectories import generate

__all__ = [
    "ExperimentRecord",
    "build_plant_model",
    "reference_window",
    "run_experiment",
    "run_sweep",
    "write_record_csv",
    "write_summary_csv",
    "write_sweep_csv",
    "output_directory",
]

ENV_OUTPUT_DIR = "PFSM_MPC_OUTPUT_DIR"

STEP_COLUMNS = [
    "t_s",
    "theta_d_x_mrad",
    "theta_d_y_mrad",
    "theta_x_mrad",
    "theta_y_mrad",
    "theta_meas_x_mrad",
    "theta_meas_y_mrad",
    "u_x_V",
    "u_y_V",
    "v_h1_x_V",
    "v_h1_y_V",
    "v_tilde_x_V",
    "v_tilde_y_V",
    "err_norm_mrad",
    "solver_sweeps",
]


@dataclass
class ExperimentRecord:
    """Per-step trajectories plus summary metrics of one closed-loop run."""

    name: str
    controller: str
    dt: float
    seed: int
    warmup_skip: int
    time: np.ndarray
    theta_d: np.ndarray
    theta_true: np.ndarray
    theta_meas: np.ndarray
    u: np.ndarray
    v_h1: np.ndarray
    v_tilde: np.ndarray
    err_norm: np.ndarray
    sweeps: np.ndarray
    rmse: float | None
    mae_urad: float
    saturated_steps: int
    clamped_steps: int
    unconverged_steps: int
    solver_diverged: bool

    @property
    def steps(self) -> int:
        return len(self.time)


def build_plant_model(cfg: ExperimentConfig) -> StateSpaceModel:
    """Assembled discrete model shared by the plant and the controller."""
    return assemble_mimo(cfg.plant.model, cfg.dt, include_creep=cfg.plant.include_creep)


def reference_window(traj: np.ndarray, k: int, horizon: int) -> np.ndarray:
    """Rows k+1 .. k+horizon of the reference, holding the final sample."""
    idx = np.minimum(np.arange(k + 1, k + 1 + horizon), len(traj) - 1)
    return traj[idx]


def run_experiment(cfg: ExperimentConfig, model: StateSpaceModel | None = None) -> ExperimentRecord:
    """Simulate one closed-loop experiment described by ``cfg``.

    Both axes run simultaneously.  A non-finite controller output aborts the
    run and marks the record as diverged (the CLI turns that into a nonzero
    exit code).
    """
    if model is None:
        model = build_plant_model(cfg)
    traj = generate(cfg.trajectory, cfg.dt)
    steps = len(traj)
    if cfg.warmup_skip >= steps:
        raise ValueError("warmup_skip leaves no samples to record")

    plant = PfsmPlant(
        model,
        cfg.plant.bouc_wen_x,
        cfg.plant.bouc_wen_y,
        cfg.dt,
        sensor_noise_std=cfg.plant.sensor_noise_std,
        input_disturbance=cfg.plant.input_disturbance,
        output_disturbance=cfg.plant.output_disturbance,
        u_min=cfg.plant.u_min,
        u_max=cfg.plant.u_max,
        seed=cfg.seed,
    )

    kind = cfg.controller.kind
    comp = None
    kf = None
    ctrl = None
    pid = None
    dim = None
    if kind == "mpc":
        kf = KalmanFilter(model, cfg.controller.kalman)
        ctrl = MpcController(model, cfg.controller.mpc, bias=SUPPLY_BIAS)
        if cfg.controller.compensator_enabled:
            comp = HysteresisCompensator(
                cfg.controller.compensator_x or cfg.plant.bouc_wen_x,
                cfg.controller.compensator_y or cfg.plant.bouc_wen_y,
                u_min=cfg.plant.u_min,
                u_max=cfg.plant.u_max,
                bias=SUPPLY_BIAS,
            )
    elif kind == "pid":
        pid = PidController(cfg.controller.pid, cfg.dt, bias=SUPPLY_BIAS)
    elif kind == "dim":
        dim = DimFeedforward(
            cfg.plant.model,
            cfg.controller.compensator_x or cfg.plant.bouc_wen_x,
            cfg.controller.compensator_y or cfg.plant.bouc_wen_y,
            bias=SUPPLY_BIAS,
        )
    else:
        raise ValueError(f"unknown controller kind {kind!r}")

    theta_true = np.zeros((steps, 2))
    theta_meas = np.zeros((steps, 2))
    u_log = np.zeros((steps, 2))
    vh1_log = np.zeros((steps, 2))
    vt_log = np.zeros((steps, 2))
    sweeps = np.zeros(steps, dtype=int)
    unconverged = 0
    diverged = False
    done = steps

    def drive_from_vh1(vh1):
        if comp is not None:
            u, _ = comp.step(vh1)
            return u
        return np.clip(vh1, cfg.plant.u_min, cfg.plant.u_max)

    v_cmd = np.zeros(2)          # recentred command applied at the current sample
    v_prev_cmd = np.zeros(2)     # command applied one sample earlier
    vh1_cmd = v_cmd + SUPPLY_BIAS
    u_cmd = drive_from_vh1(vh1_cmd) if kind == "mpc" else np.full(2, SUPPLY_BIAS)

    for k in range(steps):
        if kind == "dim":
            u_cmd = dim.step(traj[k])
            vh1_cmd = u_cmd.copy()
            v_cmd = u_cmd - SUPPLY_BIAS
        meas, true = plant.step(u_cmd)
        theta_true[k] = true
        theta_meas[k] = meas
        u_log[k] = u_cmd
        vh1_log[k] = vh1_cmd
        vt_log[k] = v_cmd

        if kind == "mpc":
            x_hat = kf.step(v_prev_cmd, meas, u_meas=v_cmd)
            vh1_next = ctrl.step(
                x_hat, meas, traj[k], reference_window(traj, k, cfg.controller.mpc.horizon)
            )
            sol = ctrl.last_solution
            sweeps[k] = sol.sweeps_used
            unconverged += 0 if sol.converged else 1
            if not np.all(np.isfinite(vh1_next)):
                diverged = True
                done = k + 1
                break
            v_prev_cmd = v_cmd
            v_cmd = vh1_next - SUPPLY_BIAS
            vh1_cmd = vh1_next
            u_cmd = drive_from_vh1(vh1_next)
        elif kind == "pid":
            u_cmd = pid.step(traj[k] - meas)
            vh1_cmd = u_cmd.copy()
            v_cmd = u_cmd - SUPPLY_BIAS

    skip = cfg.warmup_skip
    sl = slice(skip, done)
    t = np.arange(steps) * cfg.dt
    desired = traj[sl]
    actual = theta_true[sl]
    err = np.linalg.norm(desired - actual, axis=1)
    try:
        rmse_val = rmse(desired, actual)
    except ValueError:
        rmse_val = None  # zero-energy reference: only the absolute metric applies
    return ExperimentRecord(
        name=cfg.name,
        controller=kind,
        dt=cfg.dt,
        seed=cfg.seed,
        warmup_skip=skip,
        time=t[sl],
        theta_d=desired,
        theta_true=actual,
        theta_meas=theta_meas[sl],
        u=u_log[sl],
        v_h1=vh1_log[sl],
        v_tilde=vt_log[sl],
        err_norm=err,
        sweeps=sweeps[sl],
        rmse=rmse_val,
        mae_urad=mae(desired, actual),
        saturated_steps=comp.saturated_steps if comp is not None else 0,
        clamped_steps=plant.clamped_steps,
        unconverged_steps=unconverged,
        solver_diverged=diverged,
    )


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_record_csv(record: ExperimentRecord, path) -> None:
    """Per-step CSV with a fixed column order (units in the header)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(STEP_COLUMNS) + "\n")
        for i in range(record.steps):
            row = [
                _fmt(record.time[i]),
                _fmt(record.theta_d[i, 0]),
                _fmt(record.theta_d[i, 1]),
                _fmt(record.theta_true[i, 0]),
                _fmt(record.theta_true[i, 1]),
                _fmt(record.theta_meas[i, 0]),
                _fmt(record.theta_meas[i, 1]),
                _fmt(record.u[i, 0]),
                _fmt(record.u[i, 1]),
                _fmt(record.v_h1[i, 0]),
                _fmt(record.v_h1[i, 1]),
                _fmt(record.v_tilde[i, 0]),
                _fmt(record.v_tilde[i, 1]),
                _fmt(record.err_norm[i]),
                str(int(record.sweeps[i])),
            ]
            fh.write(",".join(row) + "\n")


def write_summary_csv(record: ExperimentRecord, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = [
        "name", "controller", "steps", "warmup_skip", "seed", "rmse", "mae_urad",
        "saturated_steps", "clamped_steps", "unconverged_steps", "solver_diverged",
    ]
    vals = [
        record.name,
        record.controller,
        str(record.steps),
        str(record.warmup_skip),
        str(record.seed),
        "" if record.rmse is None else _fmt(record.rmse),
        _fmt(record.mae_urad),
        str(record.saturated_steps),
        str(record.clamped_steps),
        str(record.unconverged_steps),
        str(int(record.solver_diverged)),
    ]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        fh.write(",".join(vals) + "\n")


def run_sweep(base: dict, grid: dict) -> list[dict]:
    """Run the cartesian product of a parameter grid over a base config.

    ``grid`` maps dotted config paths to value lists.  Returns one summary
    row per grid point, in grid order.
    """
    keys = list(grid.keys())
    rows = []
    if not keys:
        return rows
    for values in itertools.product(*(grid[k] for k in keys)):
        data = copy.deepcopy(base)
        for key, val in zip(keys, values):
            set_by_path(data, key, val)
        tag = "_".join(f"{k.split('.')[-1]}={v}" for k, v in zip(keys, values))
        data["name"] = f"{base.get('name', 'sweep')}_{tag}"
        cfg = resolve_config(data)
        rec = run_experiment(cfg)
        row = {k: v for k, v in zip(keys, values)}
        row.update(
            name=rec.name,
            controller=rec.controller,
            rmse=rec.rmse,
            mae_urad=rec.mae_urad,
            saturated_steps=rec.saturated_steps,
            unconverged_steps=rec.unconverged_steps,
            solver_diverged=rec.solver_diverged,
        )
        rows.append(row)
    return rows


def write_sweep_csv(rows: list[dict], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        if not rows:
            fh.write("\n")
            return
        cols = list(rows[0].keys())
        fh.write(",".join(cols) + "\n")
        for row in rows:
            out = []
            for c in cols:
                v = row[c]
                if v is None:
                    out.append("")
                elif isinstance(v, bool):
                    out.append(str(int(v)))
                elif isinstance(v, float):
                    out.append(_fmt(v))
                else:
                    out.append(str(v))
            fh.write(",".join(out) + "\n")


def output_directory(cfg_dir: str) -> Path:
    """Configured output directory, overridable through the environment."""
    return Path(os.environ.get(ENV_OUTPUT_DIR, cfg_dir))

"""Command-line front end.

Subcommands:
  run        simulate one experiment config, write per-step and summary CSVs
  sweep      run a parameter grid over a base config, write a summary table
  solve-qp   solve a serialized (M, m, W, b) instance and print KKT residuals
  dump-model write the assembled discrete A, B, C, D as CSV

Exit status is 2 when the QP solver diverges during a run.  The environment
variable PFSM_MPC_OUTPUT_DIR overrides the configured output directory.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import yaml

from .config import load_config, resolve_config
from .harness import (
    build_plant_model,
    output_directory,
    run_experiment,
    run_sweep,
    write_record_csv,
    write_summary_csv,
    write_sweep_csv,
)
from .mpc import kkt_residuals, solve_qp_instance

__all__ = ["main"]


def _cmd_run(args) -> int:
    cfg = resolve_config(load_config(args.config))
    record = run_experiment(cfg)
    out = output_directory(cfg.output_dir)
    steps_path = out / f"{cfg.name}_steps.csv"
    summary_path = out / f"{cfg.name}_summary.csv"
    write_record_csv(record, steps_path)
    write_summary_csv(record, summary_path)
    rmse_txt = "n/a" if record.rmse is None else f"{record.rmse:.6g}"
    print(
        f"{cfg.name}: controller={record.controller} steps={record.steps} "
        f"rmse={rmse_txt} mae={record.mae_urad:.4g} urad "
        f"saturated={record.saturated_steps} unconverged={record.unconverged_steps}"
    )
    print(f"wrote {steps_path} and {summary_path}")
    if record.solver_diverged:
        print("solver diverged (non-finite command)", file=sys.stderr)
        return 2
    return 0


def _cmd_sweep(args) -> int:
    base = load_config(args.config)
    with open(args.grid) as fh:
        grid = yaml.safe_load(fh) or {}
    if not isinstance(grid, dict):
        print("grid file must map dotted config keys to value lists", file=sys.stderr)
        return 1
    grid = {k: (v if isinstance(v, list) else [v]) for k, v in grid.items()}
    rows = run_sweep(base, grid)
    out = output_directory(str(base.get("output_dir", "results")))
    path = out / f"{base.get('name', 'sweep')}_sweep.csv"
    write_sweep_csv(rows, path)
    for row in rows:
        rmse_txt = "n/a" if row["rmse"] is None else f"{row['rmse']:.6g}"
        knobs = " ".join(f"{k}={row[k]}" for k in grid)
        print(f"{knobs}: rmse={rmse_txt} mae={row['mae_urad']:.4g} urad")
    print(f"wrote {path}")
    if any(row["solver_diverged"] for row in rows):
        return 2
    return 0


def _read_qp_instance(path):
    """Long-format CSV: rows ``name,i,j,value`` with names M, m, W, b."""
    entries = {"M": [], "m": [], "W": [], "b": []}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#") or line.lower().startswith("name"):
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 'name,i,j,value'")
            name, i, j, value = parts[0].strip(), int(parts[1]), int(parts[2]), float(parts[3])
            if name not in entries:
                raise ValueError(f"{path}:{lineno}: unknown block {name!r}")
            entries[name].append((i, j, value))

    def dense(items, what):
        if not items:
            raise ValueError(f"instance is missing block {what}")
        rows = 1 + max(i for i, _, _ in items)
        cols = 1 + max(j for _, j, _ in items)
        out = np.zeros((rows, cols))
        for i, j, v in items:
            out[i, j] = v
        return out

    M = dense(entries["M"], "M")
    m = dense(entries["m"], "m").ravel()
    W = dense(entries["W"], "W")
    b = dense(entries["b"], "b").ravel()
    return M, m, W, b


def _cmd_solve_qp(args) -> int:
    M, m, W, b = _read_qp_instance(args.instance)
    mu, v, sweeps, converged = solve_qp_instance(M, m, W, b, max_sweeps=args.sweeps, tol=args.tol)
    res = kkt_residuals(M, m, W, b, mu)
    print(f"sweeps={sweeps} converged={converged}")
    print("mu* =", " ".join(format(x, ".12g") for x in mu))
    print("V*  =", " ".join(format(x, ".12g") for x in v))
    for key, val in res.items():
        print(f"{key}: {val:.3e}")
    return 0 if np.all(np.isfinite(mu)) else 2


def _cmd_dump_model(args) -> int:
    cfg = resolve_config(load_config(args.config))
    model = build_plant_model(cfg)
    out = output_directory(cfg.output_dir)
    path = Path(args.output) if args.output else out / f"{cfg.name}_model.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write("matrix,i,j,value\n")
        for name, mat in (("A", model.A), ("B", model.B), ("C", model.C), ("D", model.D)):
            for i in range(mat.shape[0]):
                for j in range(mat.shape[1]):
                    fh.write(f"{name},{i},{j},{format(mat[i, j], '.17g')}\n")
    print(f"state dimension {model.n_states}; wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pfsm-mpc",
        description="Dual-axis steering-mirror tracking simulations (MPC, PID, inverse-model feedforward).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config", help="experiment YAML file")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter grid over a base config")
    p_sweep.add_argument("config", help="base experiment YAML file")
    p_sweep.add_argument("grid", help="YAML mapping dotted config keys to value lists")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_qp = sub.add_parser("solve-qp", help="solve a serialized QP instance")
    p_qp.add_argument("instance", help="CSV with rows name,i,j,value for M, m, W, b")
    p_qp.add_argument("--sweeps", type=int, default=5000)
    p_qp.add_argument("--tol", type=float, default=1e-12)
    p_qp.set_defaults(func=_cmd_solve_qp)

    p_dump = sub.add_parser("dump-model", help="write the assembled discrete state space as CSV")
    p_dump.add_argument("config", help="experiment YAML file")
    p_dump.add_argument("--output", help="destination CSV (defaults into the output dir)")
    p_dump.set_defaults(func=_cmd_dump_model)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""
Batch command-line front end.

Three subcommands, all driven by a JSON configuration document:

    sparseoc solve            --config cfg.json --out DIR
    sparseoc table            --config cfg.json --out DIR [--jobs N]
    sparseoc export-matrices  --level K --out DIR

`solve` runs one (example, level, solver) and writes report.json plus a
convergence CSV (header iter,eta1..eta5,eta,Rh,inner_iters); `table` runs a
level sweep for several solvers and writes table.csv/table.json.  Exit code
0 means converged / all cells ran, 1 a solver failure, 2 a bad config.

Outputs are deterministic for a fixed config; wall-clock timings go to
columns suffixed `_nondeterministic` and are exempt from that guarantee.
"""

import argparse
import json
import logging
import sys
import numpy as np
from dataclasses import dataclass, asdict, fields

from . import mesh as fem
from .experiments import (ExperimentSpec, build_example1, build_example2,
                          run_table, EXAMPLE1_PARAMS, EXAMPLE2_PARAMS)
from .solvers import SolverConfig, SOLVERS, solve_two_phase

log = logging.getLogger("sparseoc")

_SOLVER_NAMES = tuple(SOLVERS) + ("two_phase",)


class ConfigError(ValueError):
    """Configuration document failed validation."""


@dataclass
class RunConfig:
    """Everything one invocation needs, round-trippable through JSON."""

    example: str = "constructed"
    level: int = 4
    levels: list = None
    solver: str = "ihadmm"
    solvers: list = None
    tol: float = 1e-6
    max_iter: int = 500
    sigma: float = None
    tau: float = None
    eps0: float = 1e-2
    eps_decay: float = 1.2
    inner_backend: str = "direct"
    pdas_c: float = 1.0
    phase1_tol: float = 1e-3
    phase2_tol: float = 1e-10
    reference_level: int = None
    alpha: float = None
    beta: float = None
    a: float = None
    b: float = None
    seed: int = 0

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            cfg = cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        return cfg.validate()

    def validate(self):
        if self.example not in ("constructed", "stadler"):
            raise ConfigError(f"unknown example {self.example!r}")
        if self.solver not in _SOLVER_NAMES:
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.solvers is not None:
            bad = [s for s in self.solvers if s not in _SOLVER_NAMES]
            if bad:
                raise ConfigError(f"unknown solvers {bad}")
        if not isinstance(self.level, int) or self.level < 1:
            raise ConfigError("level must be a positive integer")
        if self.levels is not None:
            if (not self.levels
                    or any(not isinstance(l, int) or l < 1 for l in self.levels)
                    or list(self.levels) != sorted(self.levels)):
                raise ConfigError("levels must be a nonempty ascending list "
                                  "of positive integers")
        for name in ("tol", "phase1_tol", "phase2_tol"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        if self.inner_backend not in ("direct", "pmhss_gmres"):
            raise ConfigError(f"unknown inner backend {self.inner_backend!r}")
        return self

    def solver_config(self, tol=None):
        return SolverConfig(tol=tol if tol is not None else self.tol,
                            max_iter=self.max_iter, sigma=self.sigma,
                            tau=self.tau, eps0=self.eps0,
                            eps_decay=self.eps_decay,
                            inner_backend=self.inner_backend,
                            pdas_c=self.pdas_c)

    def params_overrides(self):
        return {k: getattr(self, k) for k in ("alpha", "beta", "a", "b")
                if getattr(self, k) is not None}


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config document must be a JSON object")
    return RunConfig.from_dict(data)


def _build_problem(cfg, level):
    from .experiments import ExampleParams
    base = EXAMPLE1_PARAMS if cfg.example == "constructed" else EXAMPLE2_PARAMS
    merged = {**asdict(base), **cfg.params_overrides()}
    params = ExampleParams(**merged)
    if cfg.example == "constructed":
        m, problem, _ = build_example1(level, params)
    else:
        m, problem = build_example2(level, params)
    return m, problem


def _fmt(v):
    if v is None or (isinstance(v, float) and not np.isfinite(v)):
        return ""
    if isinstance(v, float):
        return np.format_float_scientific(v, precision=16, trim="-")
    return str(v)


def cmd_solve(config_path, out_dir):
    """Run one (example, level, solver); report JSON + CSV artifacts."""
    cfg = load_config(config_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    m, problem = _build_problem(cfg, cfg.level)

    if cfg.solver == "two_phase":
        report = solve_two_phase(problem,
                                 cfg.solver_config(tol=cfg.phase1_tol),
                                 cfg.solver_config(tol=cfg.phase2_tol))
    else:
        report = SOLVERS[cfg.solver](problem, cfg.solver_config())

    report.write_log(out_dir / "convergence.csv")
    if report.final_state.u is not None:
        from .experiments import export_solution_csv
        export_solution_csv(out_dir / "solution.csv", m, report.final_state.u)
    last = report.eta_history[-1] if report.eta_history else None
    doc = {
        "example": cfg.example,
        "level": cfg.level,
        "solver": cfg.solver,
        "iterations": report.iterations,
        "converged": bool(report.converged),
        "final_eta": None if last is None else last.eta,
        "eta_components": None if last is None else list(last.as_tuple())[:5],
        "phase_iterations": report.phase_iterations,
        "wall_time_s_nondeterministic": report.wall_time,
        "config": cfg.to_dict(),
    }
    with open(out_dir / "report.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("solve: %s level %d solver %s: %d iterations, converged=%s",
             cfg.example, cfg.level, cfg.solver, report.iterations,
             report.converged)
    return 0 if report.converged else 1


def _table_spec(cfg):
    names = cfg.solvers if cfg.solvers else [cfg.solver]
    matrix = []
    for name in names:
        tol = cfg.phase2_tol if name == "two_phase" else cfg.tol
        matrix.append((name, cfg.solver_config(tol=tol)))
    if cfg.levels is None:
        raise ConfigError("table mode needs a 'levels' list")
    return ExperimentSpec(example_id=cfg.example, levels=list(cfg.levels),
                          solver_matrix=matrix,
                          reference_level=cfg.reference_level,
                          **cfg.params_overrides())


def cmd_table(config_path, out_dir, jobs=1):
    """Run the level sweep and emit table.csv / table.json."""
    cfg = load_config(config_path)
    spec = _table_spec(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = run_table(spec, jobs=jobs)

    names = [name for name, _ in spec.solver_matrix]
    header = ["level", "h", "n_dofs", "E2", "EOC"]
    for name in names:
        header += [f"{name}_iters", f"{name}_eta",
                   f"{name}_time_s_nondeterministic"]
    lines = [",".join(header)]
    for row in rows:
        vals = [str(row.level), _fmt(row.h), str(row.n_dofs),
                _fmt(row.E2), _fmt(row.eoc)]
        for cell in row.cells:
            iters = cell.iterations if cell.phase_iterations is None else \
                "+".join(str(i) for i in cell.phase_iterations)
            vals += [str(iters), _fmt(cell.eta), _fmt(cell.wall_time)]
        lines.append(",".join(vals))
    (out_dir / "table.csv").write_text("\n".join(lines) + "\n")

    doc = []
    for row in rows:
        doc.append({
            "level": row.level, "h": row.h, "n_dofs": row.n_dofs,
            "E2": None if not np.isfinite(row.E2) else row.E2,
            "EOC": row.eoc,
            "cells": [{"solver": c.solver, "iterations": c.iterations,
                       "eta": None if not np.isfinite(c.eta) else c.eta,
                       "converged": c.converged,
                       "phase_iterations": c.phase_iterations,
                       "error": c.error,
                       "wall_time_s_nondeterministic": c.wall_time}
                      for c in row.cells]})
    with open(out_dir / "table.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")

    failed = [c for row in rows for c in row.cells
              if c.error is not None or not c.converged]
    log.info("table: %d rows, %d failed cells", len(rows), len(failed))
    return 1 if failed else 0


def cmd_export_matrices(level, out_dir):
    """Write K, M, W of one grid level in MatrixMarket format."""
    if not isinstance(level, int) or level < 1:
        raise ConfigError(f"level must be a positive integer, got {level}")
    out_dir.mkdir(parents=True, exist_ok=True)
    m = fem.build_mesh(level)
    fem.write_matrix_market(out_dir / "K.mtx", fem.assemble_stiffness(m),
                            symmetric=True)
    fem.write_matrix_market(out_dir / "M.mtx", fem.assemble_mass(m),
                            symmetric=True)
    fem.write_matrix_market_diagonal(out_dir / "W.mtx",
                                     fem.assemble_lumped_mass(m))
    log.info("exported K, M, W for level %d to %s", level, out_dir)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sparseoc",
        description="solvers for L1-regularized elliptic optimal control")
    levels = ["debug", "info", "warning", "error"]
    parser.add_argument("--log-level", default="warning", choices=levels)
    sub = parser.add_subparsers(dest="command", required=True)

    # accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", dest="log_level_sub", default=None,
                        choices=levels)

    p_solve = sub.add_parser("solve", parents=[common],
                             help="run one solver on one level")
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--out", required=True)

    p_table = sub.add_parser("table", parents=[common],
                             help="run a level/solver sweep")
    p_table.add_argument("--config", required=True)
    p_table.add_argument("--out", required=True)
    p_table.add_argument("--jobs", type=int, default=1)

    p_exp = sub.add_parser("export-matrices", parents=[common],
                           help="write K, M, W in MatrixMarket format")
    p_exp.add_argument("--level", type=int, required=True)
    p_exp.add_argument("--out", required=True)
    return parser


def main(argv=None):
    from pathlib import Path
    args = build_parser().parse_args(argv)
    level = getattr(args, "log_level_sub", None) or args.log_level
    logging.basicConfig(level=level.upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "solve":
            return cmd_solve(args.config, Path(args.out))
        if args.command == "table":
            return cmd_table(args.config, Path(args.out), jobs=args.jobs)
        if args.command == "export-matrices":
            return cmd_export_matrices(args.level, Path(args.out))
    except ConfigError as exc:
        log.error("bad configuration: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())

"""Batch driver: flat dotted-key configs, solve/sweep/constants/verify
commands, JSON report and CSV emission."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .grid import DomainGrid, Field, build_grid, random_field, write_field_csv
from .riesz import Exponents, kernel_table, make_exponents, riesz_potential
from .fiber import (FiberDiagnostics, diagnostics_from_scalars, field_scalars,
                    empirical_lambda_crit_proxy)
from .bubble import CriticalConstants, estimate_critical_constants
from .solver import (SolutionReport, SolverConfig, minimize_nplus,
                     minimize_nminus, verify_solution)

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    n: int = 3
    mu: float = 1.0
    q: float = 0.5
    lam: float | None = None
    lambda_proxy_factor: float | None = None
    grid_shape: str = "ball"
    grid_extent: tuple = (2.0,)
    grid_m: tuple = (17,)
    solver: SolverConfig = dc_field(default_factory=lambda: SolverConfig(lam=0.0))
    commands: tuple = ("solve",)
    output_dir: str = "out"
    convolution: str = "fast"
    sweep_lambdas: tuple = ()
    constants_ladder_m: tuple = (61, 81, 121)
    raw: dict = dc_field(default_factory=dict)


def _parse_scalar(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _parse_tuple(text: str):
    return tuple(_parse_scalar(tok) for tok in str(text).split(",") if tok.strip())


def parse_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    kv = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        kv[key.strip()] = value.strip()

    cfg = RunConfig(raw=dict(kv))
    cfg.n = int(kv.get("problem.n", cfg.n))
    cfg.mu = float(kv.get("problem.mu", cfg.mu))
    cfg.q = float(kv.get("problem.q", cfg.q))
    if "problem.lambda" in kv:
        cfg.lam = float(kv["problem.lambda"])
    if "problem.lambda_proxy_factor" in kv:
        cfg.lambda_proxy_factor = float(kv["problem.lambda_proxy_factor"])
    if cfg.lam is None and cfg.lambda_proxy_factor is None:
        raise ConfigError(
            f"{path}: one of problem.lambda or problem.lambda_proxy_factor required")
    cfg.grid_shape = kv.get("grid.shape", cfg.grid_shape)
    if "grid.extent" in kv:
        cfg.grid_extent = _parse_tuple(kv["grid.extent"])
    if "grid.m" in kv:
        cfg.grid_m = _parse_tuple(kv["grid.m"])
    if "commands" in kv:
        cfg.commands = tuple(tok.strip() for tok in kv["commands"].split(",") if tok.strip())
    cfg.output_dir = kv.get("output_dir", cfg.output_dir)
    cfg.convolution = kv.get("convolution", cfg.convolution)
    if "sweep.lambdas" in kv:
        cfg.sweep_lambdas = tuple(float(v) for v in _parse_tuple(kv["sweep.lambdas"]))
    if "constants.ladder_m" in kv:
        cfg.constants_ladder_m = tuple(int(v) for v in _parse_tuple(kv["constants.ladder_m"]))

    solver_kwargs = {"lam": 0.0}
    mapping = {"solver.max_iters": ("max_iters", int),
               "solver.step0": ("step0", float),
               "solver.energy_tol": ("energy_tol", float),
               "solver.residual_tol": ("residual_tol", float),
               "solver.floor": ("floor", float),
               "solver.seed_kind": ("seed_kind", str),
               "solver.rng_seed": ("rng_seed", int),
               "solver.n_residual_tests": ("n_residual_tests", int)}
    for key, (attr, cast) in mapping.items():
        if key in kv:
            solver_kwargs[attr] = cast(kv[key])
    cfg.solver = SolverConfig(**solver_kwargs)
    return cfg


def _grid_from_config(cfg: RunConfig) -> DomainGrid:
    m = cfg.grid_m
    if len(m) == 1:
        m = m * cfg.n
    extent = cfg.grid_extent
    if len(extent) == 1:
        extent = extent * cfg.n
    return build_grid(cfg.grid_shape, extent, m)


def sweep_lambda(grid: DomainGrid, exps: Exponents, kt, probe: Field,
                 lambdas) -> list:
    """Per-lambda fiber-root table for a fixed probe field."""
    sc = field_scalars(probe, exps, kt)
    rows = []
    for lam in lambdas:
        diag = diagnostics_from_scalars(sc, float(lam))
        if diag.roots is not None:
            n_roots, t1, t2 = 2, diag.roots[0], diag.roots[1]
        else:
            n_roots, t1, t2 = 0, float("nan"), float("nan")
        rows.append({"lambda": float(lam), "n_roots": n_roots, "t1": t1, "t2": t2,
                     "m_max": diag.m_max, "lambda_crit": diag.lambda_crit})
    return rows


def _constants_to_dict(c: CriticalConstants) -> dict:
    return dataclasses.asdict(c)


def _fiber_to_dict(d: FiberDiagnostics) -> dict:
    out = dataclasses.asdict(d)
    out["roots"] = list(d.roots) if d.roots is not None else None
    return out


def _report_to_dict(r: SolutionReport, csv_path: str) -> dict:
    env = None
    if r.envelope is not None:
        env = {"L": r.envelope.L, "K": r.envelope.K,
               "band_stats": [list(b) for b in r.envelope.band_stats]}
    return {
        "branch": r.branch,
        "field_csv": csv_path,
        "energy": dataclasses.asdict(r.energy),
        "fiber": _fiber_to_dict(r.fiber),
        "residual_max": r.residual_max,
        "min_value": r.min_value,
        "linf": r.linf,
        "envelope": env,
        "iters": int(r.iters),
        "converged": bool(r.converged),
        "notes": list(r.notes),
    }


def serialize_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def run(config_path, convolution: str | None = None,
        grid_override: str | None = None) -> int:
    threads = os.environ.get("CHOQUARD_THREADS")
    if threads:
        _cap_threads(int(threads))
    try:
        cfg = parse_config(config_path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if convolution:
        cfg.convolution = convolution
    if grid_override:
        try:
            key, val = grid_override.split("=", 1)
            if key.strip() != "m":
                raise ValueError
            cfg.grid_m = (int(val),)
        except ValueError:
            print(f"error: bad --grid-override {grid_override!r}; expected m=NN",
                  file=sys.stderr)
            return 1

    try:
        return _run_commands(cfg)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _cap_threads(n: int):
    try:
        import numba
        numba.set_num_threads(max(1, n))
    except Exception:
        pass
    os.environ.setdefault("OMP_NUM_THREADS", str(n))


def _run_commands(cfg: RunConfig) -> int:
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    exps = make_exponents(cfg.n, cfg.mu, cfg.q)
    grid = _grid_from_config(cfg)
    kt = kernel_table(grid, cfg.mu)

    lam = cfg.lam
    if lam is None:
        proxy = empirical_lambda_crit_proxy(grid, exps, kt,
                                            rng_seed=cfg.solver.rng_seed)
        lam = cfg.lambda_proxy_factor * proxy
    cfg.solver.lam = lam

    report: dict = {"config_echo": dict(cfg.raw), "versions": {"schema": SCHEMA_VERSION},
                    "lambda_used": lam}
    constants = None
    nplus = None
    all_converged = True

    for command in cfg.commands:
        if command == "constants":
            ladder = [build_grid("ball", (2.0,) * cfg.n, (m,) * cfg.n)
                      for m in cfg.constants_ladder_m]
            constants = estimate_critical_constants(
                ladder, exps, work_grid=grid, work_kt=kt,
                rng_seed=cfg.solver.rng_seed)
            report["constants"] = _constants_to_dict(constants)
        elif command == "solve":
            if constants is None:
                ladder = [build_grid("ball", (2.0,) * cfg.n, (m,) * cfg.n)
                          for m in cfg.constants_ladder_m]
                constants = estimate_critical_constants(
                    ladder, exps, work_grid=grid, work_kt=kt,
                    rng_seed=cfg.solver.rng_seed)
                report["constants"] = _constants_to_dict(constants)
            nplus = minimize_nplus(cfg.solver, grid, exps, kt)
            write_field_csv(nplus.field, out_dir / "nplus_field.csv")
            report["nplus"] = _report_to_dict(nplus, "nplus_field.csv")
            all_converged &= nplus.converged
            if nplus.converged:
                nminus = minimize_nminus(cfg.solver, grid, exps, kt, nplus,
                                         constants)
                write_field_csv(nminus.field, out_dir / "nminus_field.csv")
                report["nminus"] = _report_to_dict(nminus, "nminus_field.csv")
                all_converged &= nminus.converged
            else:
                report["nminus"] = None
            if cfg.convolution in ("direct", "both"):
                report["convolution_check"] = _convolution_check(
                    nplus.field, exps, kt)
        elif command == "sweep":
            rng = np.random.default_rng([cfg.solver.rng_seed, 5])
            probe = random_field(grid, rng, positive=True)
            lambdas = cfg.sweep_lambdas
            if not lambdas:
                sc = field_scalars(probe, exps, kt)
                lambdas = tuple(sc.lambda_crit * f
                                for f in (0.25, 0.5, 0.75, 0.9, 1.1, 1.5, 2.0, 4.0))
            rows = sweep_lambda(grid, exps, kt, probe, lambdas)
            report["sweep"] = rows
            _write_sweep_csv(rows, out_dir / "sweep.csv")
        elif command == "verify":
            if nplus is None:
                raise ConfigError("verify command requires a prior solve command")
            ver = verify_solution(nplus, lam, exps, kt,
                                  n_tests=cfg.solver.n_residual_tests,
                                  rng_seed=cfg.solver.rng_seed)
            report["verify"] = ver
        else:
            raise ConfigError(f"unknown command {command!r}")

    (out_dir / "report.json").write_text(serialize_report(report))
    return 0 if all_converged else 2


def _convolution_check(u: Field, exps: Exponents, kt) -> dict:
    fast = riesz_potential(u, exps, kt, method="fast")
    direct = riesz_potential(u, exps, kt, method="direct")
    scale = np.max(np.abs(fast.values)) or 1.0
    rel = float(np.max(np.abs(fast.values - direct.values)) / scale)
    return {"max_rel_diff": rel, "agree_1e10": rel <= 1e-10}


def _write_sweep_csv(rows, path):
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "n_roots", "t1", "t2", "m_max"])
        for row in rows:
            writer.writerow([f"{row['lambda']:.17g}", row["n_roots"],
                             f"{row['t1']:.17g}", f"{row['t2']:.17g}",
                             f"{row['m_max']:.17g}"])


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="choquard",
        description="Nehari-manifold solver for the singular critical Choquard problem")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("config")
        p.add_argument("--convolution", choices=("direct", "fast", "both"))
        p.add_argument("--grid-override", dest="grid_override")
    args = parser.parse_args(argv)
    if args.command == "sweep":
        # sweep entry point: run only the sweep command from the config
        try:
            cfg = parse_config(args.config)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        cfg.commands = ("sweep",)
        if args.convolution:
            cfg.convolution = args.convolution
        try:
            return _run_commands(cfg)
        except (ConfigError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    return run(args.config, convolution=args.convolution,
               grid_override=args.grid_override)


if __name__ == "__main__":
    raise SystemExit(main())

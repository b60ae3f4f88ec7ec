#!/usr/bin/env python3
"""Full two-branch experiment on the unit ball: estimate the critical
constants, minimize on both Nehari branches, verify, and print a summary.

Usage: python3 scripts/two_solution_run.py [--m 33] [--lambda-factor 0.1]
                                           [--out out_two_solution]
"""

import argparse
import json
import time
from pathlib import Path

from choquard import (SolverConfig, build_grid, empirical_lambda_crit_proxy,
                      estimate_critical_constants, kernel_table,
                      make_exponents, minimize_nminus, minimize_nplus,
                      verify_solution, write_field_csv)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=33, help="nodes per axis")
    ap.add_argument("--lambda-factor", type=float, default=0.1,
                    help="lambda as a fraction of the empirical threshold proxy")
    ap.add_argument("--rng-seed", type=int, default=0)
    ap.add_argument("--out", default="out_two_solution")
    args = ap.parse_args()

    t0 = time.perf_counter()
    exps = make_exponents(3, 1.0, 0.5)
    grid = build_grid("ball", (2.0,) * 3, (args.m,) * 3)
    kt = kernel_table(grid, 1.0)

    proxy = empirical_lambda_crit_proxy(grid, exps, kt, rng_seed=args.rng_seed)
    lam = args.lambda_factor * proxy
    print(f"grid {args.m}^3 ball, lambda = {lam:.6g} "
          f"({args.lambda_factor} x proxy {proxy:.6g})")

    ladder = [build_grid("ball", (2.0,) * 3, (m,) * 3) for m in (61, 81, 121)]
    consts = estimate_critical_constants(ladder, exps, work_grid=grid,
                                         work_kt=kt, rng_seed=args.rng_seed)
    print(f"S_hat = {consts.S_hat:.6f} +- {consts.s_error:.2g}, "
          f"S_HL_hat = {consts.S_HL_hat:.6f}, level_gap = {consts.level_gap:.4f}")

    cfg = SolverConfig(lam=lam, rng_seed=args.rng_seed)
    nplus = minimize_nplus(cfg, grid, exps, kt)
    nminus = minimize_nminus(cfg, grid, exps, kt, nplus, consts)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for rep in (nplus, nminus):
        ver = verify_solution(rep, lam, exps, kt, n_tests=20,
                              rng_seed=args.rng_seed)
        write_field_csv(rep.field, out / f"{rep.branch.lower()}_field.csv")
        print(f"{rep.branch}: converged={rep.converged} iters={rep.iters} "
              f"I={rep.energy.total:.6f} residual={rep.residual_max:.2e} "
              f"min u={rep.min_value:.3e} class={rep.fiber.classification}")
        summary[rep.branch] = {"energy": rep.energy.total,
                               "residual_max": rep.residual_max,
                               "converged": bool(rep.converged),
                               "verify_residual_max": ver["residual_max"]}
    gap_ok = nminus.energy.total < nplus.energy.total + consts.level_gap
    print(f"level check: I(v) = {nminus.energy.total:.4f} "
          f"< I(u) + gap = {nplus.energy.total + consts.level_gap:.4f} -> {gap_ok}")
    summary["level_check"] = bool(gap_ok)
    summary["elapsed_s"] = time.perf_counter() - t0
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    print(f"done in {summary['elapsed_s']:.1f}s; fields and summary in {out}/")


if __name__ == "__main__":
    main()

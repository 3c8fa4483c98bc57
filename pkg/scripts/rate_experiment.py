"""Fitted decay rates across seeds for the built-in rate experiments.

Usage::

    python3 scripts/rate_experiment.py --seeds 0 1 2 --out rates.csv

Each experiment integrates one flow per seed and fits the slope of the
listed series. Seeds vary both the problem instance and the initial point.
"""
from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from thirdflow import diagnostics as dg
from thirdflow.integrator import SolverConfig, SystemState, integrate
from thirdflow.problems import make_affine_monotone, make_quadratic
from thirdflow.schedules import ConstantSchedule, PolySchedule

TIGHT = dict(abs_tol=1e-14, rel_tol=1e-13)


def _start(problem, t0, seed):
    n = problem.dim
    x0 = problem.x_star + np.random.default_rng(seed).standard_normal(n)
    return SystemState(t0, x0, np.zeros(n), np.zeros(n))


def _fvals(problem, points):
    return np.array([problem.f(p) for p in points]) - problem.f_star


def poly_case(schedule, lam1, lam2, seed):
    p = make_quadratic(8, 1e-6, 1e-4, seed=seed)
    traj = integrate(schedule, p.operator, _start(p, schedule.t0, seed),
                     SolverConfig(t_end=1000.0, **TIGHT))
    series = {"f_anchor": _fvals(p, dg.anchor_points(traj, lam1, lam2)),
              "f_x": _fvals(p, traj.x)}
    return {k: dg.fit_rate(traj.t, v, "power", (10.0, 1000.0), floor=1e-300).s
            for k, v in series.items()}


def exp_rate(seed):
    p = make_affine_monotone(10, 1.0, 0.0, seed=seed)
    traj = integrate(ConstantSchedule(185.0, 120.0, 17.0), p.operator, _start(p, 0.0, seed),
                     SolverConfig(t_end=14.0, abs_tol=1e-12, rel_tol=1e-12))
    y = np.sum((traj.x - p.x_star) ** 2, axis=1)
    return {"dist_sq": dg.fit_rate(traj.t, y, "exponential", (2.0, 12.0)).s}


def ergodic(seed):
    p = make_quadratic(10, 1e-3, 1.0, seed=seed)
    traj = integrate(ConstantSchedule(1.0, 2.0, 2.0), p.operator, _start(p, 0.0, seed),
                     SolverConfig(t_end=1000.0, abs_tol=1e-12, rel_tol=1e-10))
    gap = dg.ergodic_gap(traj, p.f, p.f_star)
    return {"ergodic_gap": dg.fit_rate(traj.t, gap, "power", (10.0, 1000.0), floor=1e-300).s}


EXPERIMENTS = {
    "case1": lambda s: poly_case(PolySchedule.case1(4.0, 1.0), 4.0, 1.0, s),
    "case2": lambda s: poly_case(PolySchedule.case2(0.25, 10.0), 0.25, 0.0, s),
    "exp_rate": exp_rate,
    "ergodic": ergodic,
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--only", choices=sorted(EXPERIMENTS), nargs="+")
    ap.add_argument("--out", help="optional CSV path")
    args = ap.parse_args(argv)

    rows = []
    for name in args.only or EXPERIMENTS:
        for seed in args.seeds:
            t0 = time.perf_counter()
            for series, slope in EXPERIMENTS[name](seed).items():
                rows.append({"experiment": name, "seed": seed, "series": series, "slope": slope})
                print(f"{name:9s} seed={seed:<3d} {series:12s} slope={slope:9.4f}"
                      f"  ({time.perf_counter() - t0:.1f}s)")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["experiment", "seed", "series", "slope"])
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())

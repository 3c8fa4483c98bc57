"""Command-line front end.

Subcommands: ``validate``, ``run``, ``rate``, ``sweep``, ``check-operator``.
Exit codes: 0 success/pass, 1 domain failure (validation, convergence,
falsified constant), 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import copy
import datetime as _dt
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .errors import CapabilityError, DomainError, ParameterError, ThirdFlowError
from .integrator import SolverConfig, SystemState, integrate, read_csv, write_csv, write_sidecar
from .operators import PROPERTIES, certify_property, operator_from_dict
from .problems import ProblemInstance
from .schedules import (ConstantD, ConstantSchedule, ExpSchedule, PolySchedule, d_from_dict,
                        derived_coefficients, schedule_from_dict)
from .validation import THEOREMS, validate

ENV_OUTPUT_DIR = "THIRDFLOW_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "thirdflow_out"
SWEEP_CAP = 10_000
VIOLATION_TOL = 1e-9

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Malformed input; maps to exit code 2."""


# ---------------------------------------------------------------------------
# Config helpers
# ---------------------------------------------------------------------------

def load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON in {path}: {exc}") from None


def _resolve(value, base_dir):
    """Inline dicts pass through; strings are JSON file paths relative to the config."""
    if isinstance(value, str):
        p = Path(value)
        return load_json(p if p.is_absolute() else Path(base_dir) / p)
    return value


def load_problem(spec) -> ProblemInstance:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise UsageError("problem must be an object with a 'kind' field")
    return ProblemInstance.from_dict(spec)


def theorem_params(theorem, schedule, problem, D=None) -> dict:
    """Validator parameters implied by a schedule and a problem's operator metadata."""
    op = problem.operator
    if theorem in ("WeakConstant", "ExpRate", "Ergodic") and not isinstance(schedule, ConstantSchedule):
        raise UsageError(f"{theorem} needs a constant schedule")
    if theorem == "WeakConstant":
        if schedule.lam1 or schedule.lam2:
            raise UsageError("WeakConstant needs lam1 = lam2 = 0")
        return {"q0": schedule.q0, "q1": schedule.q1, "q2": schedule.q2,
                "omega": _need(op.cocoercivity, "cocoercivity")}
    if theorem == "WeakExpFamily":
        if not isinstance(schedule, ExpSchedule):
            raise UsageError("WeakExpFamily needs an exponential-family schedule")
        return {"schedule": schedule.to_dict(), "omega": _need(op.cocoercivity, "cocoercivity")}
    if theorem == "AssumptionMain":
        omega = _need(op.cocoercivity, "cocoercivity")
        return {"schedule": schedule.to_dict(), "omega": omega,
                "D": (D or ConstantD(omega)).to_dict()}
    if theorem == "ExpRate":
        return {"beta0": schedule.q0, "beta1": schedule.q1, "beta2": schedule.q2,
                "lam1": schedule.lam1, "lam2": schedule.lam2,
                "rho": _need(op.strong_monotonicity, "strong_monotonicity"),
                "lipschitz": _need(op.lipschitz, "lipschitz"), "kappa": op.kappa}
    if theorem in ("OptCase1", "OptCase2"):
        if not isinstance(schedule, PolySchedule):
            raise UsageError(f"{theorem} needs a polynomial schedule")
        if theorem == "OptCase1":
            return {"xi1": schedule.xi1, "xi2": schedule.xi2, "alpha0": schedule.alpha0}
        return {"xi1": schedule.xi1, "nu2": schedule.nu2, "alpha0": schedule.alpha0}
    if theorem == "Ergodic":
        return {"beta0": schedule.q0, "beta1": schedule.q1, "beta2": schedule.q2,
                "M": _need(op.lipschitz, "lipschitz")}
    raise UsageError(f"unknown theorem {theorem!r}; expected one of {THEOREMS}")


def _need(value, name):
    if value is None:
        raise UsageError(f"operator metadata lacks {name}")
    return value


def default_theorem(schedule) -> str:
    if isinstance(schedule, ConstantSchedule):
        return "WeakConstant"
    if isinstance(schedule, ExpSchedule):
        return "WeakExpFamily"
    return "OptCase1" if schedule.xi2 > 0 else "OptCase2"


def _forced_mismatch(theorem, schedule, report):
    """Polynomial schedules must carry the forced nu values of their case."""
    if theorem == "OptCase1":
        want = (report.derived["nu1"], report.derived["nu2"])
        got = (schedule.nu1, schedule.nu2)
    elif theorem == "OptCase2":
        want, got = (report.derived["nu1"],), (schedule.nu1,)
    else:
        return None
    if not np.allclose(want, got, rtol=1e-12, atol=0):
        return f"schedule nu {got} differs from forced values {want}"
    return None


# ---------------------------------------------------------------------------
# Experiment runner (shared by `run`, `sweep` and scripts)
# ---------------------------------------------------------------------------

SERIES = ("dist_sq", "residual", "f_gap", "f_anchor_gap", "ergodic_gap", "f_inner_gap",
          "lyapunov")


def initial_state(config, problem, t0, seed) -> SystemState:
    init = config.get("init", {})
    n = problem.dim
    if "x0" in init:
        x0 = np.asarray(init["x0"], dtype=float)
        if x0.size != n:
            raise UsageError(f"init.x0 has dimension {x0.size}, problem has {n}")
    else:
        rng = np.random.default_rng(seed)
        x0 = problem.x_star + float(init.get("offset_scale", 1.0)) * rng.standard_normal(n)
    v0 = np.asarray(init.get("v0", np.zeros(n)), dtype=float)
    a0 = np.asarray(init.get("a0", np.zeros(n)), dtype=float)
    return SystemState(t0, x0, v0, a0)


def compute_series(name, traj, problem, schedule, theorem, omega=None, D=None, report=None):
    xs = problem.x_star
    if name == "dist_sq":
        e = traj.x - xs
        return np.einsum("ij,ij->i", e, e)
    if name == "residual":
        return traj.residual
    if name == "lyapunov":
        if theorem in ("WeakConstant", "WeakExpFamily", "AssumptionMain"):
            dc = derived_coefficients(schedule, D or ConstantD(omega), omega, grid=[schedule.t0])
            return dg.lyapunov_weak(traj, dc, xs)
        if theorem == "OptCase1":
            return dg.lyapunov_opt_case1(traj, schedule.xi1, schedule.xi2, schedule.alpha0,
                                         _need_f(problem), problem.f_star, xs)
        if theorem == "OptCase2":
            return dg.lyapunov_opt_case2(traj, schedule.xi1, schedule.nu2, schedule.alpha0,
                                         _need_f(problem), problem.f_star, xs)
        raise UsageError(f"no Lyapunov function registered for {theorem}")
    f = _need_f(problem)
    if name == "f_gap":
        return np.array([f(x) for x in traj.x]) - problem.f_star
    if name == "f_anchor_gap":
        if not isinstance(schedule, PolySchedule):
            raise UsageError("f_anchor_gap needs a polynomial schedule")
        phi = dg.anchor_points(traj, schedule.xi1, schedule.xi2)
        return np.array([f(p) for p in phi]) - problem.f_star
    if name == "ergodic_gap":
        return dg.ergodic_gap(traj, f, problem.f_star)
    if name == "f_inner_gap":
        if report is None or "root_q" not in report.derived:
            raise UsageError("f_inner_gap needs an OptCase1 report with roots")
        out = dg.nested_factor_trajectories(traj, report.derived["root_p"],
                                            report.derived["root_q"], f, problem.f_star)
        return out["f_inner"]
    raise UsageError(f"unknown series {name!r}; expected one of {SERIES}")


def _need_f(problem):
    if problem.f is None:
        raise UsageError(f"problem {problem.kind!r} has no objective f")
    return problem.f


def run_experiment(config: dict, output_dir, seed: int = 0, force: bool = False,
                   base_dir=".") -> tuple:
    """Validate, integrate and post-process one run; returns ``(exit_code, summary)``.

    Writes ``trajectory.csv``, ``diagnostics.csv`` and ``summary.json`` into
    ``output_dir``. Only ``summary.json`` carries wall time and a timestamp.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = int(config.get("seed", seed))
    try:
        problem = load_problem(_resolve(config["problem"], base_dir))
        schedule = schedule_from_dict(_resolve(config["schedule"], base_dir))
        solver = SolverConfig.from_dict(config.get("solver", {}))
    except KeyError as exc:
        raise UsageError(f"config missing {exc}") from None
    D = d_from_dict(config["D"]) if "D" in config else None
    theorem = config.get("theorem", default_theorem(schedule))
    vparams = theorem_params(theorem, schedule, problem, D)
    report = validate(theorem, vparams)
    mismatch = _forced_mismatch(theorem, schedule, report)
    summary = {"theorem": theorem, "validation": report.to_dict(), "seed": seed,
               "config": config, "forced_coefficient_mismatch": mismatch}
    if (not report.passed or mismatch) and not force:
        summary["status"] = "refused"
        summary["failed_checks"] = [c.name for c in report.failed()] + ([mismatch] if mismatch else [])
        _write_summary(out, summary)
        return EXIT_DOMAIN, summary

    init = initial_state(config, problem, schedule.t0, seed)
    traj = integrate(schedule, problem.operator, init, solver)
    traj.to_csv(out / "trajectory.csv")

    omega = vparams.get("omega")
    requested = list(config.get("diagnostics", []))
    fits = config.get("rate", [])
    fits = [fits] if isinstance(fits, dict) else list(fits)
    names = ["dist_sq"] + [d for d in requested if d != "dist_sq"]
    names += [f["series"] for f in fits if f["series"] not in names and f["series"] != "residual"]
    cols = {n: compute_series(n, traj, problem, schedule, theorem, omega, D, report) for n in names}
    write_csv(out / "diagnostics.csv", ["t"] + names,
              np.column_stack([traj.t] + [cols[n] for n in names]))

    summary.update(traj.metadata())
    summary["initial_residual"] = float(traj.residual[0])
    summary["residual_ratio"] = (float(traj.residual[-1] / traj.residual[0])
                                 if traj.residual[0] > 0 else 0.0)
    if "lyapunov" in cols:
        summary["lyapunov_worst_increase"] = dg.max_relative_increase(cols["lyapunov"])
    rate_out = []
    for spec in fits:
        series = traj.residual if spec["series"] == "residual" else cols[spec["series"]]
        try:
            est = dg.fit_rate(traj.t, series, spec.get("model", "power"), spec.get("window"),
                              spec.get("floor"))
            rate_out.append(dict(est.to_dict(), series=spec["series"]))
        except DomainError as exc:
            rate_out.append({"series": spec["series"], "error": str(exc)})
    summary["rates"] = rate_out
    summary["status"] = "ok" if traj.termination != "nonfinite_abort" else "nonfinite"
    _write_summary(out, summary)
    return (EXIT_OK if summary["status"] == "ok" else EXIT_DOMAIN), summary


def _write_summary(out, summary):
    payload = dict(summary, timestamp=_dt.datetime.now(_dt.timezone.utc).isoformat())
    write_sidecar(out / "summary.json", payload)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _output_dir(args) -> Path:
    chosen = args.output_dir or os.environ.get(ENV_OUTPUT_DIR) or DEFAULT_OUTPUT_DIR
    p = Path(chosen)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_validate(args) -> int:
    cfg = load_json(args.config)
    theorem = cfg.get("theorem")
    if theorem not in THEOREMS:
        raise UsageError(f"unknown theorem {theorem!r}; expected one of {THEOREMS}")
    report = validate(theorem, cfg.get("params", {}))
    out = _output_dir(args)
    write_sidecar(out / "report.json", report.to_dict())
    print(report.table())
    print(json.dumps(report.to_dict(), default=float))
    return EXIT_OK if report.passed else EXIT_DOMAIN


def cmd_run(args) -> int:
    cfg = load_json(args.config)
    code, summary = run_experiment(cfg, _output_dir(args), seed=args.seed, force=args.force,
                                   base_dir=Path(args.config).parent)
    if summary.get("status") == "refused":
        print("parameters fail validation: " + ", ".join(summary["failed_checks"]),
              file=sys.stderr)
        print("rerun with --force to integrate anyway", file=sys.stderr)
    else:
        print(f"termination={summary['termination']} final_residual={summary['final_residual']:.3e}")
        for r in summary.get("rates", []):
            print(json.dumps(r))
    return code


def cmd_rate(args) -> int:
    try:
        names, data = read_csv(args.csv)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read {args.csv}: {exc}") from None
    if args.column not in names:
        raise UsageError(f"column {args.column!r} not in {names}")
    t, y = data[:, names.index("t")], data[:, names.index(args.column)]
    window = tuple(args.window) if args.window else None
    try:
        est = dg.fit_rate(t, y, args.model, window, args.floor)
    except DomainError as exc:
        print(f"{exc} (hint: pass --floor 1e-16 to drop round-off samples)", file=sys.stderr)
        return EXIT_DOMAIN
    payload = dict(est.to_dict(), column=args.column, source=str(args.csv))
    write_sidecar(_output_dir(args) / "rate.json", payload)
    print(json.dumps(payload))
    return EXIT_OK


def _set_path(d, dotted, value):
    keys = dotted.split(".")
    for k in keys[:-1]:
        d = d.setdefault(k, {})
    d[keys[-1]] = value


def _sweep_cell(job):
    idx, base, assignment, out_dir, seed, force, base_dir, do_run = job
    cfg = copy.deepcopy(base)
    for k, v in assignment.items():
        _set_path(cfg, k, v)
    row = {"cell": idx, **assignment}
    try:
        if do_run:
            code, summary = run_experiment(cfg, Path(out_dir) / f"cell_{idx:05d}", seed, force,
                                           base_dir)
            row["valid"] = summary["validation"]["pass"]
            row["final_residual"] = summary.get("final_residual", math.nan)
            rates = [r for r in summary.get("rates", []) if "s" in r]
            row["rate"] = rates[0]["s"] if rates else math.nan
        else:
            problem = load_problem(_resolve(cfg["problem"], base_dir))
            schedule = schedule_from_dict(_resolve(cfg["schedule"], base_dir))
            theorem = cfg.get("theorem", default_theorem(schedule))
            D = d_from_dict(cfg["D"]) if "D" in cfg else None
            row["valid"] = validate(theorem, theorem_params(theorem, schedule, problem, D)).passed
            row["final_residual"], row["rate"] = math.nan, math.nan
        row["error"] = ""
    except (ThirdFlowError, UsageError) as exc:
        row.update(valid=False, final_residual=math.nan, rate=math.nan, error=str(exc))
    return row


def expand_grid(grid: dict) -> list:
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise UsageError("sweep grid is empty")
    size = math.prod(len(v) for v in grid.values())
    if size > SWEEP_CAP:
        raise UsageError(f"sweep grid has {size} cells; cap is {SWEEP_CAP}")
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def cmd_sweep(args) -> int:
    cfg = load_json(args.config)
    if "base" not in cfg or not isinstance(cfg.get("grid"), dict):
        raise UsageError("sweep config needs 'base' and 'grid'")
    cells = expand_grid(cfg["grid"])
    out = _output_dir(args)
    base_dir = str(Path(args.config).parent)
    do_run = bool(cfg.get("integrate", True))
    jobs = [(i, cfg["base"], a, str(out), args.seed, args.force, base_dir, do_run)
            for i, a in enumerate(cells)]
    workers = int(cfg.get("workers", min(4, os.cpu_count() or 1)))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, jobs))
    else:
        rows = [_sweep_cell(j) for j in jobs]
    keys = list(cfg["grid"])
    header = ["cell"] + keys + ["valid", "final_residual", "rate", "error"]
    with open(out / "sweep.csv", "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for r in sorted(rows, key=lambda r: r["cell"]):
            fh.write(",".join(_fmt(r[h]) for h in header) + "\n")
    n_valid = sum(bool(r["valid"]) for r in rows)
    print(f"{len(rows)} cells, {n_valid} valid; results in {out / 'sweep.csv'}")
    return EXIT_OK


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v).replace(",", ";")


def cmd_check_operator(args) -> int:
    spec = load_json(args.problem)
    if "op" in spec:
        op = operator_from_dict(spec)
        dim = int(spec.get("dim", len(op.known_zero) if op.known_zero is not None else 0))
        if dim < 1:
            raise UsageError("operator descriptor needs 'dim' or 'known_zero'")
    else:
        prob = load_problem(spec)
        op, dim = prob.operator, prob.dim
    constant = args.constant
    if constant is None:
        constant = {"lipschitz": op.lipschitz, "cocoercive": op.cocoercivity,
                    "quasi_cocoercive": op.cocoercivity,
                    "strongly_monotone_wrt_zero": op.strong_monotonicity}[args.property]
        if constant is None:
            raise UsageError(f"no --constant given and operator declares none for {args.property}")
    cert = certify_property(op, args.property, constant, dim, n_samples=args.samples,
                            seed=args.seed)
    payload = dict(cert.to_dict(), violated=cert.violated(VIOLATION_TOL))
    write_sidecar(_output_dir(args) / "certificate.json", payload)
    print(json.dumps({k: v for k, v in payload.items() if k != "witness"}))
    return EXIT_DOMAIN if cert.violated(VIOLATION_TOL) else EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _global_flags(parser, suppress):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=d if suppress else 0,
                        help="random seed (default 0)")
    parser.add_argument("--output-dir", default=d,
                        help=f"output directory (env {ENV_OUTPUT_DIR}, default ./{DEFAULT_OUTPUT_DIR})")
    parser.add_argument("--force", action="store_true", default=d if suppress else False,
                        help="integrate even when parameters fail validation")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thirdflow", description=__doc__.splitlines()[0])
    _global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check a parameter set against a theorem's inequalities")
    s.add_argument("config")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("run", help="integrate the flow and write trajectory/diagnostics/summary")
    s.add_argument("config")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("rate", help="fit a decay rate to one CSV column")
    s.add_argument("csv")
    s.add_argument("--column", required=True)
    s.add_argument("--model", choices=("power", "exponential"), default="power")
    s.add_argument("--window", type=float, nargs=2, metavar=("T_LO", "T_HI"))
    s.add_argument("--floor", type=float, default=None)
    s.set_defaults(func=cmd_rate)

    s = sub.add_parser("sweep", help="run a parameter grid in parallel")
    s.add_argument("config")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("check-operator", help="try to falsify a regularity constant by sampling")
    s.add_argument("problem")
    s.add_argument("--property", choices=PROPERTIES, required=True)
    s.add_argument("--constant", type=float, default=None)
    s.add_argument("--samples", type=int, default=1000)
    s.set_defaults(func=cmd_check_operator)

    for sp in sub.choices.values():
        _global_flags(sp, suppress=True)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ThirdFlowError as exc:
        # parameter and schema errors are usage problems; others are domain failures
        code = EXIT_USAGE if isinstance(exc, (ParameterError, CapabilityError)) else EXIT_DOMAIN
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())

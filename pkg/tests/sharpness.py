"""Boundary-sharpness harness shared by the validation and acceptance suites.

Each case names a validator check and the parameter that moves it across its
boundary. The boundary is located by bisection on the check's pass/fail
status; the report is then evaluated ``eps`` inside and ``eps`` outside and
the set of checks whose status differs is returned.
"""
import copy
from dataclasses import dataclass
from typing import Optional

from thirdflow.errors import ParameterError
from thirdflow.validation import validate

CONST = {"q0": 0.5, "q1": 2.0, "q2": 3.0, "omega": 1.0}
EXP = {"schedule": {"family": "exp", "p": [0.366, 1.0, 1.837], "q": [0.1814, 2.0, 3.674],
                    "r": [1.0, 1.0, 1.0], "tau": [3.897, 7.547], "m": [1.0, 1.0]}, "omega": 1.0}
EXP_SMALL_TAU2 = {"schedule": dict(EXP["schedule"], tau=[3.897, 0.1]), "omega": 1.0}
MAIN = {"schedule": {"family": "constant", "q": [0.5, 2.0, 3.0], "lam": [0.0, 0.0]},
        "D": {"type": "constant", "d": 1.0}, "omega": 1.0}
MAIN_EXP = {"schedule": {"family": "exp", "p": [0.5, 1.0, 1.0], "q": [0.5, 2.0, 3.0],
                         "r": [1.0, 1.0, 1.0]}, "D": {"type": "constant", "d": 1.0}, "omega": 1.0}
RATE = {"beta0": 185.0, "beta1": 120.0, "beta2": 17.0, "lam1": 0.0, "lam2": 0.0,
        "rho": 1.0, "lipschitz": 1.0}

RATE_LAM = dict(RATE, lam1=1e-4, lam2=1e-4)


def set_path(params, path, value):
    keys = path.split(".")
    node = params
    for k in keys[:-1]:
        node = node[int(k)] if isinstance(node, list) else node[k]
    last = keys[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value


def _with(base, **updates):
    out = copy.deepcopy(base)
    for path, value in updates.items():
        set_path(out, path, value)
    return out


@dataclass(frozen=True)
class Case:
    theorem: str
    check: str
    path: Optional[str]
    base: dict
    inside: Optional[float] = None
    outside: Optional[float] = None
    reason: str = ""

    @property
    def applicable(self):
        return self.path is not None


def na(theorem, check, reason):
    return Case(theorem, check, None, {}, reason=reason)


BY_CONSTRUCTION = "sign-definite for every built-in schedule family and D function"

CASES = [
    Case("WeakConstant", "q2_lower", "q2", CONST, 3.0, 1.0),
    Case("WeakConstant", "q0_upper", "q0", CONST, 0.5, 1.0),

    Case("WeakExpFamily", "q2_lower", "schedule.q.2", EXP, 3.674, 1.0),
    Case("WeakExpFamily", "p0_upper", "schedule.p.0", EXP, 0.366, 2.0),
    Case("WeakExpFamily", "omega_over_q0_lower", "schedule.q.0", EXP, 0.1814, 5.0),
    na("WeakExpFamily", "tau1_nonneg", "tau_j >= 0 is a schedule precondition"),
    Case("WeakExpFamily", "tau1_upper", "schedule.tau.0", EXP_SMALL_TAU2, 3.897, 20.0),
    na("WeakExpFamily", "tau_product_nonneg", "tau_j >= 0 is a schedule precondition"),
    Case("WeakExpFamily", "tau_product_upper", "schedule.tau.1", EXP, 7.547, 100.0),
    Case("WeakExpFamily", "tau_product_gate", "schedule.tau.1", EXP, 7.547, 200.0),

    na("AssumptionMain", "beta2_convex", BY_CONSTRUCTION),
    na("AssumptionMain", "beta2_nonincreasing", BY_CONSTRUCTION),
    na("AssumptionMain", "beta1_convex", BY_CONSTRUCTION),
    na("AssumptionMain", "beta1_nonincreasing", BY_CONSTRUCTION),
    na("AssumptionMain", "beta0_nondecreasing", BY_CONSTRUCTION),
    Case("AssumptionMain", "beta0_concave", "schedule.p.0", MAIN_EXP, 0.5, 3.0),
    na("AssumptionMain", "lam1_nondecreasing", BY_CONSTRUCTION),
    na("AssumptionMain", "lam2_nondecreasing", BY_CONSTRUCTION),
    Case("AssumptionMain", "D_sup_upper", "D.d",
         _with(MAIN, **{"schedule.lam.1": 0.1}), 1.0, 3.0),
    Case("AssumptionMain", "D_squared_lower", "schedule.lam.0",
         _with(MAIN, **{"schedule.lam.1": 1.0}), 0.0, 100.0),
    na("AssumptionMain", "D_concave", BY_CONSTRUCTION),
    na("AssumptionMain", "D_nondecreasing", BY_CONSTRUCTION),
    Case("AssumptionMain", "delta1_positive", "schedule.q.0", MAIN, 0.5, 1.0),
    Case("AssumptionMain", "delta2_positive", "schedule.q.2", MAIN, 3.0, 1.0),
    Case("AssumptionMain", "delta3_positive", "schedule.lam.0",
         _with(MAIN, **{"schedule.lam.1": 1.0}), 0.0, 23.0),
    Case("AssumptionMain", "gate", "schedule.q.0", MAIN, 0.5, 10.0),

    Case("ExpRate", "beta2_lower", "beta2", _with(RATE, beta1=108.0, beta0=163.0), 17.0, 10.0),
    Case("ExpRate", "beta1_lower", "beta1", RATE, 120.0, 100.0),
    # at lam = 0 three lam-conditions share these boundaries; a small lam separates them
    Case("ExpRate", "beta1_upper", "beta1", RATE_LAM, 120.0, 200.0),
    Case("ExpRate", "beta0_lower", "beta0", RATE_LAM, 185.0, 100.0),
    Case("ExpRate", "beta0_upper", "beta0", RATE_LAM, 185.0, 300.0),
    Case("ExpRate", "lam1_nonneg", "lam1", RATE, 0.001, -1.0),
    Case("ExpRate", "lam1_upper", "lam1", RATE, 0.0, 1.0),
    Case("ExpRate", "lam_mixed_linear", "lam2", RATE, 0.0, 1.0),
    Case("ExpRate", "lam2_nonneg", "lam2", RATE, 0.001, -1.0),
    Case("ExpRate", "lam2_upper", "lam2", RATE, 0.0, 1.0),
    Case("ExpRate", "lam_mixed_product", "lam1", _with(RATE, lam2=0.001), 0.0, 100.0),
    Case("ExpRate", "lam_mixed_square", "lam2", RATE, 0.0, 1.0),

    Case("OptCase1", "xi2_upper", "xi2", {"xi1": 20.0, "xi2": 1.0}, 1.0, 20.0),
    Case("OptCase1", "xi1_lower", "xi1", {"xi1": 4.0, "xi2": 1.0}, 4.0, 2.0),
    Case("OptCase1", "xi1_upper", "xi1", {"xi1": 4.0, "xi2": 1.0}, 4.0, 5.0),

    Case("OptCase2", "nu2_lower", "nu2", {"xi1": 0.25, "nu2": 12.0}, 12.0, 5.0),

    Case("Ergodic", "beta0_upper", "beta0", {"beta0": 1.0, "beta1": 2.0, "beta2": 2.0, "M": 1.0},
         1.0, 10.0),
]


def report_at(case, value):
    return validate(case.theorem, _with(case.base, **{case.path: value}))


def status(case, value):
    return report_at(case, value).check(case.check).passed


def locate_boundary(case, iters=200):
    lo, hi = case.inside, case.outside
    if not status(case, lo) or status(case, hi):
        raise AssertionError(f"{case.theorem}.{case.check}: bracket does not straddle")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        lo, hi = (mid, hi) if status(case, mid) else (lo, mid)
    return 0.5 * (lo + hi)


def probe(case, eps=1e-6):
    """Return ``(boundary, flipped_check_names, inside_pass, outside_pass)``."""
    b = locate_boundary(case)
    step = eps if case.outside > case.inside else -eps
    try:
        r_in, r_out = report_at(case, b - step), report_at(case, b + step)
    except ParameterError as exc:
        raise AssertionError(f"{case.theorem}.{case.check}: {exc}") from None
    flipped = sorted(c.name for c in r_in.checks
                     if c.passed != r_out.check(c.name).passed)
    return b, flipped, r_in.check(case.check).passed, r_out.check(case.check).passed

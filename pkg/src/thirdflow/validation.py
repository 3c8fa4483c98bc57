"""Parameter-inequality systems that guarantee convergence of the flow.

Each validator returns a :class:`ValidationReport` listing every inequality
as a :class:`Check` with a signed margin. Compound conditions such as
``0 <= tau1 < bound`` are split into one check per side so that a failure
always names a single inequality.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InfeasibleError, ParameterError
from .schedules import (ConstantD, ExpSchedule, assumption_grid, case1_forced, case2_forced,
                        d_from_dict, derived_coefficients, schedule_from_dict)

THEOREMS = ("WeakConstant", "WeakExpFamily", "AssumptionMain", "ExpRate", "OptCase1",
            "OptCase2", "Ergodic")

_STRICT = {"<": True, ">": True, "<=": False, ">=": False}


@dataclass(frozen=True)
class Check:
    """One inequality ``lhs relation rhs``.

    ``margin`` is signed so that positive means satisfied with room to spare:
    ``rhs - lhs`` for ``<``/``<=`` and ``lhs - rhs`` for ``>``/``>=``. Strict
    checks fail at zero margin; a NaN side always fails.
    """

    name: str
    lhs: float
    relation: str
    rhs: float
    passed: bool
    margin: float
    binding: Optional[str] = None

    def to_dict(self):
        return {"name": self.name, "lhs": self.lhs, "relation": self.relation, "rhs": self.rhs,
                "pass": self.passed, "margin": self.margin, "binding": self.binding}


def make_check(name, lhs, relation, rhs, binding=None) -> Check:
    if relation not in _STRICT:
        raise ParameterError(f"unknown relation {relation!r}")
    lhs, rhs = float(lhs), float(rhs)
    if math.isnan(lhs) or math.isnan(rhs):
        return Check(name, lhs, relation, rhs, False, -math.inf, binding)
    margin = rhs - lhs if relation in ("<", "<=") else lhs - rhs
    if math.isnan(margin):  # inf - inf
        margin = -math.inf
    passed = margin > 0 if _STRICT[relation] else margin >= 0
    return Check(name, lhs, relation, rhs, bool(passed), float(margin), binding)


def _undefined(alts):
    # an undefined alternative leaves the bound undefined, so the check fails
    return next((k for k, v in alts.items() if math.isnan(v)), None)


def _max(**alts):
    bad = _undefined(alts)
    name = bad or max(alts, key=alts.get)
    return alts[name], name


def _min(**alts):
    bad = _undefined(alts)
    name = bad or min(alts, key=alts.get)
    return alts[name], name


def _sqrt(x):
    return math.sqrt(x) if x >= 0 else math.nan


def _div(a, b):
    return a / b if b != 0 else math.copysign(math.inf, a) if a != 0 else math.nan


@dataclass
class ValidationReport:
    theorem_id: str
    checks: list
    derived: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failed(self):
        return [c for c in self.checks if not c.passed]

    def to_dict(self):
        return {"theorem": self.theorem_id, "pass": self.passed, "params": _jsonable(self.params),
                "checks": [c.to_dict() for c in self.checks], "derived": _jsonable(self.derived)}

    def table(self) -> str:
        rows = [("check", "lhs", "rel", "rhs", "margin", "pass", "binding")]
        for c in self.checks:
            rows.append((c.name, f"{c.lhs:.6g}", c.relation, f"{c.rhs:.6g}", f"{c.margin:.3e}",
                         "ok" if c.passed else "FAIL", c.binding or ""))
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        lines.append(f"{self.theorem_id}: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _require_positive(**kw):
    for k, v in kw.items():
        if not (isinstance(v, (int, float, np.floating)) and v > 0 and math.isfinite(v)):
            raise ParameterError(f"{k} must be positive, got {v!r}")


# ---------------------------------------------------------------------------
# Weak convergence
# ---------------------------------------------------------------------------

def validate_weak_constant(q0, q1, q2, omega) -> ValidationReport:
    """Constant coefficients with ``lam = 0``."""
    _require_positive(q0=q0, q1=q1, q2=q2, omega=omega)
    checks = [
        make_check("q2_lower", q2, ">", math.sqrt(2.0 * q1)),
        make_check("q0_upper", q0, "<", omega * q1 ** 2 / (2.0 * q2)),
    ]
    derived = {"c0": q0, "c1": q1, "c2": q2, "alpha0": q0, "alpha1": q1, "alpha2": q2}
    return ValidationReport("WeakConstant", checks, derived,
                            {"q0": q0, "q1": q1, "q2": q2, "omega": omega})


def _exp_family_terms(p, q, tau, omega):
    p0, p1, p2 = p
    q0, q1, q2 = q
    tau1, tau2 = tau
    w = omega / q0
    a1 = p1 + q1
    lead = q1 * q2 ** 2 - (a1 * (p0 + 1.0)) ** 2
    return p0, p1, p2, q0, q1, q2, tau1, tau2, w, a1, lead


def validate_weak_exp_family(schedule, omega) -> ValidationReport:
    """Exponentially saturating coefficients; ``schedule`` is an :class:`ExpSchedule`."""
    if isinstance(schedule, dict):
        schedule = schedule_from_dict(dict(schedule, family="exp"))
    if not isinstance(schedule, ExpSchedule):
        raise ParameterError("validate_weak_exp_family needs an exponential-family schedule")
    _require_positive(omega=omega)
    p0, p1, p2, q0, q1, q2, tau1, tau2, w, a1, lead = _exp_family_terms(
        schedule.p, schedule.q, schedule.tau, omega)

    q2_lo, q2_bind = _max(ratio=a1 / math.sqrt(q1), sqrt=math.sqrt(2.0 * a1))
    w_lo, w_bind = _max(
        beta2_sup=2.0 * (p2 + q2) / q1 ** 2,
        inverse_product=1.0 / (q1 * q2),
        quadratic_root=_div(q2 + a1 * (p0 + 1.0) / math.sqrt(q1), lead) if lead > 0 else math.inf,
    )
    tau1_hi = _sqrt(w * (omega * q1 ** 2 / q0 - 2.0 * (p2 + q2)))
    tt_hi_a, tt_bind = _min(delta3=w * (omega * q1 * q2 / q0 - 1.0),
                            tau1_scaled=w * tau1 * _sqrt(q2 ** 2 - 2.0 * a1))
    tt_hi_b = _div(omega * q1, omega * q1 * q2 - q0) * (lead * w ** 2 - 2.0 * q2 * w + 1.0 / q1)

    checks = [
        make_check("q2_lower", q2, ">", q2_lo, q2_bind),
        make_check("p0_upper", p0, "<", q2 * math.sqrt(q1) / a1 - 1.0),
        make_check("omega_over_q0_lower", w, ">", w_lo, w_bind),
        make_check("tau1_nonneg", tau1, ">=", 0.0),
        make_check("tau1_upper", tau1, "<", tau1_hi),
        make_check("tau_product_nonneg", tau1 * tau2, ">=", 0.0),
        make_check("tau_product_upper", tau1 * tau2, "<", tt_hi_a, tt_bind),
        make_check("tau_product_gate", tau1 * tau2, "<", tt_hi_b),
    ]
    b = schedule.bounds()
    derived = dict(b)
    derived.update({
        "delta1": w * q1 ** 2 - 2.0 * (p2 + q2) - q0 * tau1 ** 2 / omega,
        "delta2": w * (q2 ** 2 - 2.0 * a1) - q0 * tau2 ** 2 / omega,
        "delta3": omega * q1 * q2 / q0 - 1.0 - q0 * tau1 * tau2 / omega,
        "delta4": w * a1 * (p0 + 1.0),
        "delta5": omega * q2 / q0,
        "D": omega,
        # concavity of beta0 needs p0 e^{-r0 t} <= 1 on [t0, inf); not implied by the checks
        "beta0_concave": p0 * math.exp(-schedule.r[0] * schedule.t0) <= 1.0,
    })
    return ValidationReport("WeakExpFamily", checks, derived,
                            dict(schedule.to_dict(), omega=omega))


def validate_assumption_main(schedule, D=None, omega=1.0, grid=None) -> ValidationReport:
    """Sign, ``D`` and positivity conditions on a grid, then the final gate.

    Infima and suprema over ``t`` are grid values on :func:`assumption_grid`;
    ``c1`` in the gate comes from the schedule's closed-form bounds.
    """
    if isinstance(schedule, dict):
        schedule = schedule_from_dict(schedule)
    _require_positive(omega=omega)
    D = ConstantD(omega) if D is None else (d_from_dict(D) if not hasattr(D, "evaluate") else D)
    grid = assumption_grid(schedule.t0) if grid is None else np.asarray(grid, dtype=float)
    sv = [schedule.evaluate(t) for t in grid]
    dv = [D.evaluate(t) for t in grid]

    def series(name, attr):
        return np.array([getattr(getattr(s, name), attr) for s in sv])

    checks = []
    for name in ("beta2", "beta1"):
        checks.append(make_check(f"{name}_convex", series(name, "dd").min(), ">=", 0.0))
        checks.append(make_check(f"{name}_nonincreasing", series(name, "d").max(), "<=", 0.0))
    checks.append(make_check("beta0_nondecreasing", series("beta0", "d").min(), ">=", 0.0))
    checks.append(make_check("beta0_concave", series("beta0", "dd").max(), "<=", 0.0))
    checks.append(make_check("lam1_nondecreasing", series("lam1", "d").min(), ">=", 0.0))
    checks.append(make_check("lam2_nondecreasing", series("lam2", "d").min(), ">=", 0.0))

    D_sup = D.sup(schedule.t0)
    checks.append(make_check("D_sup_upper", D_sup, "<", 2.0 * omega))
    Dval = np.array([d.value for d in dv])
    b0, b1, b2 = series("beta0", "value"), series("beta1", "value"), series("beta2", "value")
    l1, l2 = series("lam1", "value"), series("lam2", "value")
    need = b0 ** 2 * l1 * l2 / (b1 * b2)
    k = int(np.argmin(Dval ** 2 - need))
    checks.append(make_check("D_squared_lower", Dval[k] ** 2, ">=", need[k]))
    checks.append(make_check("D_concave", max(d.dd for d in dv), "<=", 0.0))
    checks.append(make_check("D_nondecreasing", min(d.d for d in dv), ">=", 0.0))

    derived = {"grid_t_min": float(grid[0]), "grid_t_max": float(grid[-1]),
               "grid_points": int(grid.size), "D_sup": D_sup}
    derived.update(schedule.bounds())
    if D_sup < 2.0 * omega and np.all(Dval > 0):
        coeffs = derived_coefficients(schedule, D, omega, grid=grid).on_grid(grid)
        d1, d2 = float(coeffs["A0"].min()), float(coeffs["B0"].min())
        d3 = float((coeffs["A1"] + 2.0).min())
        d4, d5 = float(coeffs["A2"].max()), float(coeffs["B1"].min())
        d6 = float(coeffs["C0"].min())
    else:
        d1 = d2 = d3 = d4 = d5 = d6 = math.nan
    derived.update(delta1=d1, delta2=d2, delta3=d3, delta4=d4, delta5=d5, delta6=d6)
    checks.append(make_check("delta1_positive", d1, ">", 0.0))
    checks.append(make_check("delta2_positive", d2, ">", 0.0))
    checks.append(make_check("delta3_positive", d3, ">", 0.0))
    gate_rhs = d5 - d4 ** 2 / d3 if d3 > 0 else math.nan
    checks.append(make_check("gate", _div(1.0, derived["c1"]), "<", gate_rhs))
    return ValidationReport("AssumptionMain", checks, derived,
                            {"schedule": schedule.to_dict(), "D": D.to_dict(), "omega": omega})


# ---------------------------------------------------------------------------
# Exponential rate for constant coefficients
# ---------------------------------------------------------------------------

def exp_rate_u_coefficients(beta0, beta1, beta2, lam1, lam2, rho, kappa) -> dict:
    c = 2.0 / kappa - rho
    return {
        "u12": kappa * beta1 / (2.0 * beta0),
        "u11": kappa * beta1 * beta2 / (2.0 * beta0) - 3.0 - c * beta0 * lam1 * lam2,
        "u10": (kappa * beta1 ** 2 / (2.0 * beta0) - 2.0 * beta2 - 2.0 * beta0 * lam1 ** 2 / kappa
                + beta0 * rho * (lam1 ** 2 - 2.0 * lam2)),
        "u21": kappa * beta2 / (2.0 * beta0),
        "u20": kappa / (2.0 * beta0) * (beta2 ** 2 - 2.0 * beta1) - c * beta0 * lam2 ** 2,
    }


def validate_exp_rate(beta0, beta1, beta2, lam1=0.0, lam2=0.0, rho=1.0, lipschitz=1.0,
                      kappa=None) -> ValidationReport:
    """Constant coefficients under strong monotonicity (``kappa = rho / L^2`` by default)."""
    _require_positive(beta0=beta0, beta1=beta1, beta2=beta2, rho=rho, lipschitz=lipschitz)
    if kappa is None:
        kappa = rho / lipschitz ** 2
    _require_positive(kappa=kappa)
    rk = rho * kappa
    c = 2.0 / kappa - rho
    b2_lo, b2_bind = _max(affine=4.0 + 12.0 / rk, six=6.0, inverse=16.0 / rk)
    b1_lo, b1_bind = _max(four=4.0 * (beta2 - 3.0), scaled=8.0 * (beta2 - 3.0) / rk)
    s = -2.0 * beta2 + beta1 + 4.0
    b0_hi_inner, b0_bind = _min(window=s / (2.0 * (beta2 - 3.0)), linear=(beta2 - 4.0) / 3.0)
    checks = [
        make_check("beta2_lower", beta2, ">", b2_lo, b2_bind),
        make_check("beta1_lower", beta1, ">", b1_lo, b1_bind),
        make_check("beta1_upper", beta1, "<", beta2 * (beta2 - 2.0) / 2.0),
        make_check("beta0_lower", beta0, ">", 2.0 / rho * s),
        make_check("beta0_upper", beta0, "<", kappa * beta1 / 2.0 * b0_hi_inner, b0_bind),
        make_check("lam1_nonneg", lam1, ">=", 0.0),
        make_check("lam1_upper", lam1, "<",
                   (-8.0 + rho * beta0 - 2.0 * beta1 + 4.0 * beta2) / (2.0 * rho * beta0)),
        make_check("lam_mixed_linear", beta0 * c * lam1 ** 2 + 2.0 * beta0 * rho * lam2, "<",
                   kappa * beta1 / (2.0 * beta0) * s - 2.0 * (beta2 - 3.0)),
        make_check("lam2_nonneg", lam2, ">=", 0.0),
        make_check("lam2_upper", lam2, "<", (12.0 + beta1 - 4.0 * beta2) / (4.0 * rho * beta0)),
        make_check("lam_mixed_product", beta0 * c * lam1 * lam2, "<",
                   kappa * beta1 / (2.0 * beta0) * (beta2 - 4.0) - 3.0),
        make_check("lam_mixed_square", beta0 * c * lam2 ** 2, "<",
                   kappa / (2.0 * beta0) * (beta2 ** 2 - 2.0 * beta2 - 2.0 * beta1)),
    ]
    derived = {"kappa": kappa, "rho_kappa": rk}
    derived.update(exp_rate_u_coefficients(beta0, beta1, beta2, lam1, lam2, rho, kappa))
    params = {"beta0": beta0, "beta1": beta1, "beta2": beta2, "lam1": lam1, "lam2": lam2,
              "rho": rho, "lipschitz": lipschitz, "kappa": kappa}
    return ValidationReport("ExpRate", checks, derived, params)


# ---------------------------------------------------------------------------
# Optimization flows with polynomial coefficients
# ---------------------------------------------------------------------------

def quadratic_roots(b, c):
    """Real roots of ``z^2 + b z + c`` (ascending), cancellation-free; NaNs if complex."""
    disc = b * b - 4.0 * c
    if disc < 0:
        return math.nan, math.nan
    s = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    if s == 0.0:
        return 0.0, 0.0
    r1, r2 = s, c / s
    return (r1, r2) if r1 <= r2 else (r2, r1)


def validate_opt_case1(xi1, xi2, alpha0=1.0, check_xt_rate=True) -> ValidationReport:
    """``xi2 > 0``: forced ``nu1, nu2``; optional conditions for the rate at ``x(t)``."""
    if not xi2 > 0:
        raise ParameterError("case 1 requires xi2 > 0")
    _require_positive(alpha0=alpha0)
    if xi1 < 0:
        raise ParameterError("xi1 must be nonnegative")
    nu1, nu2 = case1_forced(xi1, xi2)
    derived = {"nu1": nu1, "nu2": nu2}
    checks = []
    if check_xt_rate:
        p, q = quadratic_roots(-(xi1 - xi2), xi2)
        # the root bounds follow from the two xi1 conditions (their boundaries coincide),
        # so they are reported as a derived flag rather than as separate checks
        derived.update(root_p=p, root_q=q, roots_in_range=bool(0.0 < p and q < 3.0))
        checks = [
            make_check("xi2_upper", xi2, "<", 9.0),
            make_check("xi1_lower", xi1, ">", xi2 + 2.0 * math.sqrt(xi2)),
            make_check("xi1_upper", xi1, "<", (4.0 * xi2 + 9.0) / 3.0),
        ]
    return ValidationReport("OptCase1", checks, derived,
                            {"xi1": xi1, "xi2": xi2, "alpha0": alpha0,
                             "check_xt_rate": check_xt_rate})


def validate_opt_case2(xi1, nu2, alpha0=1.0) -> ValidationReport:
    """``xi2 = 0``: forced ``nu1`` and the lower bound on ``nu2``."""
    if not xi1 > 0:
        raise ParameterError("case 2 requires xi1 > 0")
    _require_positive(alpha0=alpha0)
    nu1 = case2_forced(xi1, nu2)
    checks = [make_check("nu2_lower", nu2, ">=", 6.0 + 1.0 / xi1)]
    derived = {"nu1": nu1, "secondary_exponent": 1.0 / xi1}
    return ValidationReport("OptCase2", checks, derived,
                            {"xi1": xi1, "nu2": nu2, "alpha0": alpha0})


def validate_ergodic(beta0, beta1, beta2, M) -> ValidationReport:
    """Constant coefficients, ``lam = 0``, ``M``-Lipschitz gradient."""
    _require_positive(beta0=beta0, beta1=beta1, beta2=beta2, M=M)
    checks = [make_check("beta0_upper", beta0, "<", beta1 * beta2 / M)]
    derived = {}
    # roots of 2 M b2 x^2 - 4 b1 b2 x + 2 b0 b1, i.e. x^2 - (2 b1/M) x + b0 b1/(M b2)
    x1, x2 = quadratic_roots(-2.0 * beta1 / M, beta0 * beta1 / (M * beta2))
    derived.update(x1=x1, x2=x2)
    if checks[0].passed:
        A = beta1 / M
        derived.update(A=A, B_lo=1.0 / (beta2 * (2.0 * A * beta2 - beta0)),
                       B_hi=(2.0 * beta1 / (A * M) - 1.0) / (beta0 * beta2))
    return ValidationReport("Ergodic", checks, derived,
                            {"beta0": beta0, "beta1": beta1, "beta2": beta2, "M": M})


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

def validate(theorem_id: str, params: dict) -> ValidationReport:
    """Run the validator named ``theorem_id`` on a JSON-style parameter dict."""
    try:
        if theorem_id == "WeakConstant":
            return validate_weak_constant(params["q0"], params["q1"], params["q2"],
                                          params.get("omega", 1.0))
        if theorem_id == "WeakExpFamily":
            sched = params.get("schedule", params)
            return validate_weak_exp_family(sched, params.get("omega", 1.0))
        if theorem_id == "AssumptionMain":
            return validate_assumption_main(params["schedule"], params.get("D"),
                                            params.get("omega", 1.0))
        if theorem_id == "ExpRate":
            return validate_exp_rate(params["beta0"], params["beta1"], params["beta2"],
                                     params.get("lam1", 0.0), params.get("lam2", 0.0),
                                     params.get("rho", 1.0), params.get("lipschitz", 1.0),
                                     params.get("kappa"))
        if theorem_id == "OptCase1":
            return validate_opt_case1(params["xi1"], params["xi2"], params.get("alpha0", 1.0),
                                      params.get("check_xt_rate", True))
        if theorem_id == "OptCase2":
            return validate_opt_case2(params["xi1"], params["nu2"], params.get("alpha0", 1.0))
        if theorem_id == "Ergodic":
            return validate_ergodic(params["beta0"], params["beta1"], params["beta2"],
                                    params.get("M", 1.0))
    except KeyError as exc:
        raise ParameterError(f"{theorem_id}: missing parameter {exc}") from None
    raise ParameterError(f"unknown theorem id {theorem_id!r}; expected one of {THEOREMS}")


# ---------------------------------------------------------------------------
# Feasible parameter suggestion
# ---------------------------------------------------------------------------

class _Picker:
    """Sequential interval picker: midpoint first, seeded fractions on retries."""

    def __init__(self, fixed, rng=None):
        self.fixed, self.rng, self.values = dict(fixed), rng, {}

    def pick(self, name, lo, hi, cap_factor=2.0, lo_closed=False):
        # unbounded-above intervals are capped at cap_factor * lo (or 1 when lo <= 0)
        if math.isinf(hi):
            hi = cap_factor * lo if lo > 0 else 1.0
        label = f"{name} in {'[' if lo_closed else '('}{lo:.6g}, {hi:.6g})"
        if name in self.fixed:
            v = float(self.fixed[name])
            ok = (lo <= v if lo_closed else lo < v) and v < hi
            if not ok:
                raise InfeasibleError(label, f"fixed value {name}={v} outside {label}")
        else:
            if not (hi > lo) or math.isnan(lo) or math.isnan(hi):
                raise InfeasibleError(label, f"empty interval {label}")
            frac = 0.5 if self.rng is None else self.rng.uniform(0.1, 0.9)
            v = lo + frac * (hi - lo)
        self.values[name] = v
        return v

    def get(self, name, default):
        v = float(self.fixed.get(name, default))
        self.values[name] = v
        return v


def _suggest_weak_constant(pk):
    omega = pk.get("omega", 1.0)
    q1 = pk.get("q1", 2.0)
    q2 = pk.pick("q2", math.sqrt(2.0 * q1), math.inf)
    pk.pick("q0", 0.0, omega * q1 ** 2 / (2.0 * q2))
    v = pk.values
    return validate_weak_constant(v["q0"], q1, q2, omega), v


def _suggest_weak_exp(pk):
    omega = pk.get("omega", 1.0)
    p1, q1 = pk.get("p1", 1.0), pk.get("q1", 2.0)
    a1 = p1 + q1
    q2 = pk.pick("q2", max(a1 / math.sqrt(q1), math.sqrt(2.0 * a1)), math.inf)
    # p0 <= 1 keeps beta0 concave on [0, inf)
    p0 = pk.pick("p0", 0.0, min(q2 * math.sqrt(q1) / a1 - 1.0, 1.0), lo_closed=True)
    p2 = pk.pick("p2", 0.0, q2, lo_closed=True)
    lead = q1 * q2 ** 2 - (a1 * (p0 + 1.0)) ** 2
    w_lo = max(2.0 * (p2 + q2) / q1 ** 2, 1.0 / (q1 * q2),
               (q2 + a1 * (p0 + 1.0) / math.sqrt(q1)) / lead if lead > 0 else math.inf)
    q0 = pk.pick("q0", 0.0, omega / w_lo)
    w = omega / q0
    tau1 = pk.pick("tau1", 0.0, _sqrt(w * (omega * q1 ** 2 / q0 - 2.0 * (p2 + q2))))
    tt_hi = min(w * (omega * q1 * q2 / q0 - 1.0), w * tau1 * _sqrt(q2 ** 2 - 2.0 * a1),
                omega * q1 / (omega * q1 * q2 - q0) * (lead * w ** 2 - 2.0 * q2 * w + 1.0 / q1))
    tau2 = pk.pick("tau2", 0.0, tt_hi / tau1)
    r = [pk.get("r0", 1.0), pk.get("r1", 1.0), pk.get("r2", 1.0)]
    m = [pk.get("m1", 1.0), pk.get("m2", 1.0)]
    sched = ExpSchedule((p0, p1, p2), (q0, q1, q2), r, (tau1, tau2), m)
    return validate_weak_exp_family(sched, omega), dict(pk.values, schedule=sched.to_dict())


def _suggest_assumption_main(pk):
    rep, vals = _suggest_weak_exp(pk)
    omega = vals["omega"]
    return validate_assumption_main(vals["schedule"], ConstantD(omega), omega), vals


def _suggest_exp_rate(pk):
    rho, L = pk.get("rho", 1.0), pk.get("lipschitz", 1.0)
    kappa = float(pk.fixed["kappa"]) if "kappa" in pk.fixed else rho / L ** 2
    rk = rho * kappa
    b2 = pk.pick("beta2", max(4.0 + 12.0 / rk, 6.0, 16.0 / rk), math.inf)
    b1 = pk.pick("beta1", max(4.0 * (b2 - 3.0), 8.0 * (b2 - 3.0) / rk), b2 * (b2 - 2.0) / 2.0)
    s = -2.0 * b2 + b1 + 4.0
    b0 = pk.pick("beta0", 2.0 / rho * s,
                 kappa * b1 / 2.0 * min(s / (2.0 * (b2 - 3.0)), (b2 - 4.0) / 3.0))
    c = 2.0 / kappa - rho
    r7 = kappa * b1 / (2.0 * b0) * s - 2.0 * (b2 - 3.0)
    if pk.fixed.get("with_lambda", False):
        lam1 = pk.pick("lam1", 0.0, min((-8.0 + rho * b0 - 2.0 * b1 + 4.0 * b2) / (2.0 * rho * b0),
                                        _sqrt(r7 / (b0 * c)) if c > 0 else math.inf))
        hi = [(r7 - b0 * c * lam1 ** 2) / (2.0 * b0 * rho), (12.0 + b1 - 4.0 * b2) / (4.0 * rho * b0)]
        if c > 0:
            r9 = kappa * b1 / (2.0 * b0) * (b2 - 4.0) - 3.0
            r10 = kappa / (2.0 * b0) * (b2 ** 2 - 2.0 * b2 - 2.0 * b1)
            hi += [r9 / (b0 * c * lam1), _sqrt(r10 / (b0 * c))]
        lam2 = pk.pick("lam2", 0.0, min(hi))
    else:
        lam1, lam2 = pk.get("lam1", 0.0), pk.get("lam2", 0.0)
    return validate_exp_rate(b0, b1, b2, lam1, lam2, rho, L, kappa), dict(pk.values, kappa=kappa)


def _suggest_opt_case1(pk):
    xi2 = pk.pick("xi2", 0.0, 9.0)
    xi1 = pk.pick("xi1", xi2 + 2.0 * math.sqrt(xi2), (4.0 * xi2 + 9.0) / 3.0)
    alpha0 = pk.get("alpha0", 1.0)
    rep = validate_opt_case1(xi1, xi2, alpha0)
    return rep, dict(pk.values, nu1=rep.derived["nu1"], nu2=rep.derived["nu2"])


def _suggest_opt_case2(pk):
    xi1 = pk.pick("xi1", 0.0, 1.0) if "xi1" not in pk.fixed else pk.get("xi1", 0.25)
    if not xi1 > 0:
        raise InfeasibleError("xi1 in (0, inf)", "xi1 must be positive")
    nu2 = pk.pick("nu2", 6.0 + 1.0 / xi1, math.inf)
    alpha0 = pk.get("alpha0", 1.0)
    rep = validate_opt_case2(xi1, nu2, alpha0)
    return rep, dict(pk.values, nu1=rep.derived["nu1"])


def _suggest_ergodic(pk):
    M = pk.get("M", 1.0)
    b1, b2 = pk.get("beta1", 2.0), pk.get("beta2", 2.0)
    b0 = pk.pick("beta0", 0.0, b1 * b2 / M)
    return validate_ergodic(b0, b1, b2, M), dict(pk.values)


_SUGGESTERS = {
    "WeakConstant": _suggest_weak_constant,
    "WeakExpFamily": _suggest_weak_exp,
    "AssumptionMain": _suggest_assumption_main,
    "ExpRate": _suggest_exp_rate,
    "OptCase1": _suggest_opt_case1,
    "OptCase2": _suggest_opt_case2,
    "Ergodic": _suggest_ergodic,
}


def suggest_parameters(theorem_id: str, constraints: Optional[dict] = None, seed: int = 0,
                       max_retries: int = 32):
    """Pick a parameter set that passes ``theorem_id``'s validator.

    Free parameters are chosen one at a time, in the order the inequalities
    allow, at the midpoint of their currently feasible interval (intervals open
    above are capped at twice their lower end). Keys in ``constraints`` are held
    fixed. Only if the midpoint cascade ends infeasible are seeded interior
    fractions tried instead.

    Returns
    -------
    (dict, ValidationReport)

    Raises
    ------
    InfeasibleError
        Naming the first empty (or violated) interval of the midpoint attempt.
    """
    if theorem_id not in _SUGGESTERS:
        raise ParameterError(f"unknown theorem id {theorem_id!r}")
    fixed = dict(constraints or {})
    rng = np.random.default_rng(seed)
    first_error = None
    for attempt in range(max_retries + 1):
        pk = _Picker(fixed, None if attempt == 0 else rng)
        try:
            report, values = _SUGGESTERS[theorem_id](pk)
        except InfeasibleError as exc:
            if first_error is None:
                first_error = exc
            if exc.interval.split(" ")[0] in fixed:
                break
            continue
        if report.passed:
            return values, report
        if first_error is None:
            bad = report.failed()[0]
            first_error = InfeasibleError(bad.name, f"suggested point fails {bad.name}")
    raise first_error

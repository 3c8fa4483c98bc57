import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from sharpness import CASES, probe
from thirdflow.errors import InfeasibleError, ParameterError
from thirdflow.schedules import ConstantD, ConstantSchedule, ExpSchedule
from thirdflow.validation import (THEOREMS, make_check, quadratic_roots, suggest_parameters,
                                  validate, validate_assumption_main, validate_ergodic,
                                  validate_exp_rate, validate_opt_case1, validate_opt_case2,
                                  validate_weak_constant, validate_weak_exp_family)


def statuses(report):
    return {c.name: c.passed for c in report.checks}


# ---------------------------------------------------------------- checks

def test_strict_and_nonstrict_margins():
    assert not make_check("a", 2.0, ">", 2.0).passed
    assert make_check("a", 2.0, ">=", 2.0).passed
    assert make_check("a", 1.0, "<", 2.0).margin == 1.0
    assert not make_check("a", math.nan, "<", 2.0).passed
    with pytest.raises(ParameterError):
        make_check("a", 1.0, "!=", 2.0)


# ---------------------------------------------------------------- weak convergence, constant

def test_weak_constant_pass():
    r = validate_weak_constant(0.5, 2.0, 3.0, 1.0)
    assert r.passed
    assert r.check("q2_lower").rhs == 2.0
    assert math.isclose(r.check("q0_upper").rhs, 2.0 / 3.0)


def test_weak_constant_boundary_q2():
    r = validate_weak_constant(0.5, 2.0, 2.0, 1.0)
    assert statuses(r) == {"q2_lower": False, "q0_upper": True}


def test_weak_constant_fails_q0():
    r = validate_weak_constant(0.7, 2.0, 3.0, 1.0)
    assert statuses(r) == {"q2_lower": True, "q0_upper": False}


@given(q1=st.floats(0.1, 10), frac=st.floats(0.01, 0.99), shrink=st.floats(0.01, 1.0))
def test_weak_constant_monotone_in_q0(q1, frac, shrink):
    q2 = 1.5 * math.sqrt(2 * q1)
    q0 = frac * q1 ** 2 / (2 * q2)
    assert validate_weak_constant(q0, q1, q2, 1.0).passed
    assert validate_weak_constant(q0 * shrink, q1, q2, 1.0).passed


# ---------------------------------------------------------------- weak convergence, exp family

def test_exp_family_zero_p_zero_tau_hand_values():
    # hand evaluation with p_j = 0, tau_j = 0, q = (1/2, 2, 3), omega = 1
    r = validate_weak_exp_family(ExpSchedule((0, 0, 0), (0.5, 2, 3), (1, 1, 1)), 1.0)
    s2 = math.sqrt(2.0)
    assert r.check("q2_lower").rhs == 2.0 and r.check("q2_lower").binding == "sqrt"
    assert math.isclose(r.check("p0_upper").rhs, 3 * s2 / 2 - 1)
    w = r.check("omega_over_q0_lower")
    assert w.lhs == 2.0 and w.rhs == 1.5 and w.binding == "beta2_sup"
    assert r.check("tau1_upper").rhs == 2.0
    # tau-product upper bound collapses to 0 (tau1 = 0): the strict check fails at the limit
    assert r.check("tau_product_upper").rhs == 0.0 and not r.check("tau_product_upper").passed
    gate = float(Fraction(2, 1) / Fraction(11, 2) * (Fraction(56) - 12 + Fraction(1, 2)))
    assert math.isclose(r.check("tau_product_gate").rhs, gate, rel_tol=1e-14)
    assert r.check("tau1_nonneg").passed and r.check("tau1_nonneg").margin == 0.0
    d = r.derived
    assert (d["delta1"], d["delta2"], d["delta3"], d["delta4"], d["delta5"]) == (2.0, 10.0, 11.0,
                                                                                 4.0, 6.0)


def test_exp_family_q2_boundary_fails():
    p1, q1 = 1.0, 2.0
    a1 = p1 + q1
    q2 = max(a1 / math.sqrt(q1), math.sqrt(2 * a1))
    r = validate_weak_exp_family(ExpSchedule((0, p1, 0), (0.1, q1, q2), (1, 1, 1)), 1.0)
    assert not r.check("q2_lower").passed and not r.passed


def test_exp_family_accepts_dict():
    r = validate("WeakExpFamily", {"schedule": {"p": [0, 0, 0], "q": [0.5, 2, 3], "r": [1, 1, 1]},
                                   "omega": 1.0})
    assert r.theorem_id == "WeakExpFamily"


# ---------------------------------------------------------------- assumption main

def test_assumption_main_constant_example():
    r = validate_assumption_main(ConstantSchedule(0.5, 2, 3), ConstantD(1.0), 1.0)
    d = r.derived
    assert (d["delta1"], d["delta2"], d["delta3"], d["delta4"], d["delta5"], d["delta6"]) == \
        (2.0, 10.0, 11.0, 4.0, 6.0, 2.0)
    g = r.check("gate")
    assert g.lhs == 0.5 and math.isclose(g.rhs, 6 - 16 / 11) and r.passed


def test_assumption_main_lambda_violation():
    r = validate_assumption_main(ConstantSchedule(0.5, 2, 3, lam1=10.0, lam2=10.0), ConstantD(1.0),
                                 1.0)
    assert not r.check("D_squared_lower").passed


def test_assumption_main_D_at_two_omega():
    r = validate_assumption_main(ConstantSchedule(0.5, 2, 3), ConstantD(2.0), 1.0)
    assert not r.check("D_sup_upper").passed and not r.passed


def test_assumption_main_agrees_with_exp_family_closed_forms():
    # with lam = 0 and t0 = 0 the grid extremes equal the closed-form deltas
    s = ExpSchedule((0.3, 1.0, 1.0), (0.2, 2.0, 3.5), (1, 1, 1))
    rm = validate_assumption_main(s, ConstantD(1.0), 1.0)
    rx = validate_weak_exp_family(s, 1.0)
    for k in ("delta1", "delta2", "delta3", "delta4", "delta5"):
        assert rm.derived[k] >= rx.derived[k] - 1e-9 * abs(rx.derived[k])


# ---------------------------------------------------------------- exponential rate

def test_exp_rate_canonical_instance():
    r = validate_exp_rate(185, 120, 17, rho=1.0, lipschitz=1.0)
    assert r.passed
    assert r.check("beta2_lower").rhs == 16.0
    assert r.check("beta1_lower").rhs == 112.0 and r.check("beta1_upper").rhs == 127.5
    assert r.check("beta0_lower").rhs == 180.0
    assert math.isclose(r.check("beta0_upper").rhs, 60 * 90 / 28)
    assert r.derived["kappa"] == 1.0
    assert math.isclose(r.derived["u12"], 120 / 370)


def test_exp_rate_lambda_conditions_trivial_at_zero():
    r = validate_exp_rate(185, 120, 17)
    lam = [c for c in r.checks if c.name.startswith("lam")]
    assert lam and all(c.passed for c in lam)


def test_exp_rate_beta2_boundary():
    r = validate_exp_rate(185, 120, 6.0)
    assert not r.check("beta2_lower").passed


@given(t=st.floats(0.0, 1.0))
def test_exp_rate_monotone_toward_window_center(t):
    lo, hi = 180.0, 60 * 90 / 28
    center = 0.5 * (lo + hi)
    b0 = lo + 1e-6 + (hi - lo - 2e-6) * t
    b0_closer = b0 + 0.5 * (center - b0)
    assert validate_exp_rate(b0, 120, 17).passed
    assert validate_exp_rate(b0_closer, 120, 17).passed


# ---------------------------------------------------------------- optimization flows

def test_opt_case1_example():
    r = validate_opt_case1(4.0, 1.0)
    assert (r.derived["nu1"], r.derived["nu2"]) == (5.0, 6.0)
    assert r.passed
    assert math.isclose(r.derived["root_p"], (3 - math.sqrt(5)) / 2, rel_tol=1e-14)
    assert math.isclose(r.derived["root_q"], (3 + math.sqrt(5)) / 2, rel_tol=1e-14)
    assert r.derived["roots_in_range"]


def test_opt_case1_boundaries():
    assert not validate_opt_case1(3.0, 1.0).check("xi1_lower").passed
    assert not validate_opt_case1(15.0, 9.0).check("xi2_upper").passed
    with pytest.raises(ParameterError):
        validate_opt_case1(1.0, 0.0)


@given(xi2=st.floats(1e-3, 8.999), frac=st.floats(0.001, 0.999))
def test_opt_case1_root_property(xi2, frac):
    lo, hi = xi2 + 2 * math.sqrt(xi2), (4 * xi2 + 9) / 3
    assume(hi - lo > 1e-9)
    xi1 = lo + frac * (hi - lo)
    r = validate_opt_case1(xi1, xi2)
    assume(r.passed)
    p, q = r.derived["root_p"], r.derived["root_q"]
    assert math.isclose(p + q, xi1 - xi2, rel_tol=1e-12, abs_tol=1e-12)
    assert math.isclose(p * q, xi2, rel_tol=1e-12, abs_tol=1e-12)
    assert 0 < p <= q < 3 and r.derived["roots_in_range"]


def test_opt_case2_examples():
    r = validate_opt_case2(0.25, 10.0)
    assert r.derived["nu1"] == 20 and r.passed
    # integer match with the alpha = 3 member of the known family: nu2 = alpha + 7, nu1 = 5(alpha + 1)
    alpha = 3
    assert 10 == alpha + 7 and r.derived["nu1"] == 5 * (alpha + 1)
    assert r.derived["secondary_exponent"] == 4.0
    assert not validate_opt_case2(0.25, 9.0).passed
    r = validate_opt_case2(1.0, 7.0)
    assert r.derived["nu1"] == 8.0 and r.passed and r.check("nu2_lower").margin == 0.0


def test_ergodic_examples():
    r = validate_ergodic(1.0, 2.0, 2.0, 1.0)
    assert r.passed
    assert abs(r.derived["x1"] - (2 - math.sqrt(3))) <= 1e-12
    assert abs(r.derived["x2"] - (2 + math.sqrt(3))) <= 1e-12
    assert 1.0 / (2 * 2.0) < r.derived["x1"] and 2 * 2.0 / 1.0 > r.derived["x2"]
    assert r.derived["B_lo"] < r.derived["B_hi"]
    assert not validate_ergodic(4.0, 2.0, 2.0, 1.0).passed
    assert validate_ergodic(100.0, 2.0, 2.0, 1e-6).passed


@given(b=st.floats(-100, 100), c=st.floats(-100, 100))
def test_quadratic_roots(b, c):
    r1, r2 = quadratic_roots(b, c)
    if b * b - 4 * c < 0:
        assert math.isnan(r1) and math.isnan(r2)
    else:
        expect = np.sort(np.roots([1.0, b, c]).real)
        assert np.allclose([r1, r2], expect, rtol=1e-8, atol=1e-8)


# ---------------------------------------------------------------- dispatch and suggestion

def test_validate_dispatch_errors():
    with pytest.raises(ParameterError):
        validate("Nope", {})
    with pytest.raises(ParameterError):
        validate("WeakConstant", {"q0": 1.0})


def test_report_serialization():
    r = validate_weak_constant(0.5, 2.0, 3.0, 1.0)
    d = r.to_dict()
    assert d["pass"] and [c["name"] for c in d["checks"]] == ["q2_lower", "q0_upper"]
    assert "q0_upper" in r.table()


def test_suggest_weak_constant_midpoints():
    values, rep = suggest_parameters("WeakConstant", {"omega": 1.0, "q1": 2.0})
    assert values["q2"] == 3.0 and math.isclose(values["q0"], 1.0 / 3.0) and rep.passed


def test_suggest_opt_case1_midpoint():
    values, rep = suggest_parameters("OptCase1", {"xi2": 1.0})
    assert math.isclose(values["xi1"], (3 + 13 / 3) / 2) and rep.passed


def test_suggest_exp_rate_passes():
    values, rep = suggest_parameters("ExpRate", {"rho": 1.0, "lipschitz": 1.0})
    assert rep.passed and values["beta2"] > 16


def test_suggest_infeasible_names_interval():
    with pytest.raises(InfeasibleError) as info:
        suggest_parameters("OptCase2", {"xi1": 0.25, "nu2": 5.0})
    assert info.value.interval.startswith("nu2")


@pytest.mark.parametrize("theorem", THEOREMS)
@given(seed=st.integers(0, 2 ** 31 - 1))
def test_suggest_round_trip(theorem, seed):
    values, rep = suggest_parameters(theorem, seed=seed)
    assert rep.passed
    again = validate(theorem, values)
    assert again.passed
    for c in again.checks:
        # non-strict sign conditions may sit exactly on their bound
        assert c.margin > 0 or c.relation in (">=", "<=")


@pytest.mark.parametrize("theorem", THEOREMS)
def test_suggest_is_deterministic(theorem):
    assert suggest_parameters(theorem, seed=3)[0] == suggest_parameters(theorem, seed=3)[0]


def test_suggest_exp_rate_with_lambda():
    values, rep = suggest_parameters("ExpRate", {"with_lambda": True})
    assert rep.passed and values["lam1"] > 0 and values["lam2"] > 0


# ---------------------------------------------------------------- boundary sharpness

@pytest.mark.parametrize("case", [c for c in CASES if c.applicable],
                         ids=lambda c: f"{c.theorem}-{c.check}")
def test_boundary_equality_fails_and_flips_only_that_check(case):
    b, flipped, inside, outside = probe(case)
    assert inside and not outside
    assert flipped == [case.check]


@pytest.mark.parametrize("case", [c for c in CASES if not c.applicable],
                         ids=lambda c: f"{c.theorem}-{c.check}")
def test_unreachable_checks_hold_on_samples(case, rng):
    # checks that no admissible parameter can violate: confirm on random admissible inputs
    for _ in range(20):
        if case.theorem == "WeakExpFamily":
            s = ExpSchedule(rng.uniform(0, 2, 3), rng.uniform(0.1, 3, 3), rng.uniform(0, 2, 3),
                            rng.uniform(0, 2, 2), rng.uniform(0, 2, 2))
            r = validate_weak_exp_family(s, 1.0)
        else:
            s = ExpSchedule(rng.uniform(0, 2, 3), rng.uniform(0.1, 3, 3), rng.uniform(0, 2, 3),
                            rng.uniform(0, 2, 2), rng.uniform(0, 2, 2))
            r = validate_assumption_main(s, ConstantD(0.5), 1.0, grid=np.linspace(0, 50, 60))
        assert r.check(case.check).passed


def test_sharpness_cases_cover_every_check():
    covered = {(c.theorem, c.check) for c in CASES}
    reports = {
        "WeakConstant": validate_weak_constant(0.5, 2, 3, 1),
        "WeakExpFamily": validate_weak_exp_family(ExpSchedule((0, 1, 0), (0.5, 2, 3), (1, 1, 1)), 1),
        "AssumptionMain": validate_assumption_main(ConstantSchedule(0.5, 2, 3)),
        "ExpRate": validate_exp_rate(185, 120, 17),
        "OptCase1": validate_opt_case1(4, 1),
        "OptCase2": validate_opt_case2(0.25, 10),
        "Ergodic": validate_ergodic(1, 2, 2, 1),
    }
    for th, rep in reports.items():
        for c in rep.checks:
            assert (th, c.name) in covered, (th, c.name)

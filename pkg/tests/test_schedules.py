import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from thirdflow.errors import DomainError, ParameterError, ValidationError
from thirdflow.schedules import (ConstantD, ConstantSchedule, ExpSchedule, Jet, PolySchedule,
                                 SaturatingD, assumption_grid, case1_forced, case2_forced,
                                 d_from_dict, derived_coefficients, eval_schedule,
                                 schedule_from_dict)

FIELDS = ("beta0", "beta1", "beta2", "lam1", "lam2")

pos = st.floats(0.1, 5.0)
nonneg = st.floats(0.0, 3.0)


def exp_schedules():
    return st.builds(lambda p, q, r, tau, m: ExpSchedule(p, q, r, tau, m),
                     st.tuples(nonneg, nonneg, nonneg), st.tuples(pos, pos, pos),
                     st.tuples(nonneg, nonneg, nonneg), st.tuples(pos, pos), st.tuples(nonneg, nonneg))


def poly_schedules():
    return st.builds(lambda xi1, xi2, nu1, nu2, a0, t0: PolySchedule(xi1, xi2, nu1, nu2, a0, t0),
                     nonneg, nonneg, pos, pos, pos, st.floats(0.5, 3.0))


# ---------------------------------------------------------------- Jet arithmetic

def test_jet_product_and_quotient_rules():
    t = 0.7
    f = Jet(math.sin(t), math.cos(t), -math.sin(t))
    g = Jet(math.exp(t), math.exp(t), math.exp(t))
    h = f / g  # sin(t) e^{-t}
    e = math.exp(-t)
    assert math.isclose(h.value, math.sin(t) * e)
    assert math.isclose(h.d, (math.cos(t) - math.sin(t)) * e)
    assert math.isclose(h.dd, -2.0 * math.cos(t) * e)
    p = f * g
    assert math.isclose(p.dd, 2.0 * math.cos(t) * math.exp(t))


# ---------------------------------------------------------------- evaluation examples

def test_constant_schedule_values():
    s = ConstantSchedule(0.5, 2.0, 3.0)
    v = eval_schedule(s, 17.0)
    assert (v.beta0.value, v.beta1.value, v.beta2.value) == (0.5, 2.0, 3.0)
    assert all(getattr(v, k).d == 0 and getattr(v, k).dd == 0 for k in FIELDS)


def test_exp_schedule_beta1_at_zero():
    s = ExpSchedule((0, 1, 0), (1, 1, 1), (0, 1, 0))
    b1 = eval_schedule(s, 0.0).beta1
    assert (b1.value, b1.d, b1.dd) == (2.0, -1.0, 1.0)


def test_poly_schedule_values():
    v = eval_schedule(PolySchedule(4, 1, 5, 6, 1, t0=1.0), 2.0)
    assert (v.lam1.value, v.lam2.value, v.beta2.value, v.beta1.value, v.beta0.value) == \
        (8.0, 4.0, 3.0, 1.25, 1.0)


def test_domain_errors():
    with pytest.raises(DomainError):
        eval_schedule(PolySchedule(1, 1, 1, 1, t0=2.0), 1.0)
    with pytest.raises(ParameterError):
        PolySchedule(1, 1, 1, 1, t0=0.0)
    with pytest.raises(ParameterError):
        ConstantSchedule(0.0, 1.0, 1.0)


def test_forced_coefficients():
    assert case1_forced(4.0, 1.0) == (5.0, 6.0)
    assert case2_forced(0.25, 10.0) == 20.0
    assert case2_forced(1.0, 7.0) == 8.0
    s = schedule_from_dict({"family": "poly", "case": 2, "xi1": 0.25, "nu2": 10.0})
    assert (s.nu1, s.xi2) == (20.0, 0.0)


# ---------------------------------------------------------------- analytic vs finite differences

def _fd_check(s, t):
    h = 1e-4 * max(1.0, t)
    lo, mid, hi = (eval_schedule(s, u) for u in (t - h, t, t + h))
    for k in FIELDS:
        jm = getattr(mid, k)
        d = (getattr(hi, k).value - getattr(lo, k).value) / (2 * h)
        dd = (getattr(hi, k).value - 2 * jm.value + getattr(lo, k).value) / h ** 2
        scale = abs(jm.value) + abs(jm.d) + abs(jm.dd) + 1e-3
        assert abs(d - jm.d) <= 1e-6 * scale, (k, d, jm.d)
        assert abs(dd - jm.dd) <= 1e-4 * scale, (k, dd, jm.dd)


@given(s=exp_schedules(), data=st.data())
def test_exp_derivatives_match_finite_differences(s, data):
    for t in data.draw(st.lists(st.floats(0.01, 20.0), min_size=3, max_size=3)):
        _fd_check(s, t)


@given(s=poly_schedules(), data=st.data())
def test_poly_derivatives_match_finite_differences(s, data):
    for t in data.draw(st.lists(st.floats(s.t0 + 0.01, s.t0 + 20.0), min_size=3, max_size=3)):
        _fd_check(s, t)


def test_exp_derivatives_hundred_times(rng):
    s = ExpSchedule((0.4, 1.3, 0.8), (1.0, 2.0, 3.0), (0.5, 0.7, 1.1), (0.2, 0.3), (0.9, 0.4))
    for t in rng.uniform(0.01, 15.0, size=100):
        _fd_check(s, float(t))


@given(s=exp_schedules(), t=st.floats(0.0, 30.0))
def test_exp_family_monotonicity(s, t):
    v = eval_schedule(s, t)
    tol = 1e-12
    assert v.beta1.d <= tol and v.beta1.dd >= -tol
    assert v.beta2.d <= tol and v.beta2.dd >= -tol
    assert v.beta0.d >= -tol
    assert v.lam1.d >= -tol and v.lam2.d >= -tol


@given(s=exp_schedules(), t=st.floats(0.0, 30.0))
def test_exp_bounds_contain_values(s, t):
    b, v = s.bounds(), eval_schedule(s, t)
    for j in "012":
        val = getattr(v, f"beta{j}").value
        assert b[f"c{j}"] * (1 - 1e-12) <= val <= b[f"alpha{j}"] * (1 + 1e-12)


def test_exp_bounds_closed_forms():
    s = ExpSchedule((1.0, 2.0, 3.0), (4.0, 5.0, 6.0), (1, 1, 1))
    assert s.bounds() == {"c0": 2.0, "c1": 5.0, "c2": 6.0, "alpha0": 4.0, "alpha1": 7.0,
                          "alpha2": 9.0}


def test_fast_coefficients_agree(rng):
    for s in (ExpSchedule((0.4, 1.3, 0.8), (1, 2, 3), (0.5, 0.7, 1.1), (0.2, 0.3), (0.9, 0.4)),
              PolySchedule(4, 1, 5, 6, 1, 1.0), ConstantSchedule(0.5, 2, 3, 0.1, 0.2)):
        for t in rng.uniform(1.0, 10.0, size=10):
            v = eval_schedule(s, t)
            assert np.allclose(s.coefficients(t), [getattr(v, k).value for k in FIELDS],
                               rtol=1e-14, atol=0)


def test_schedule_round_trip():
    for s in (ExpSchedule((0.4, 1.3, 0.8), (1, 2, 3), (0.5, 0.7, 1.1), (0.2, 0.3), (0.9, 0.4)),
              PolySchedule(4, 1, 5, 6, 1, 1.0), ConstantSchedule(0.5, 2, 3, 0.1, 0.2)):
        assert schedule_from_dict(s.to_dict()) == s


# ---------------------------------------------------------------- derived coefficients

def test_derived_constant_example():
    dc = derived_coefficients(ConstantSchedule(0.5, 2, 3), ConstantD(1.0), 1.0)
    c = dc.evaluate(0.0)
    got = {k: getattr(c, k).value for k in ("A2", "A1", "A0", "B1", "B0", "C0")}
    assert got == {"A2": 4.0, "A1": 9.0, "A0": 2.0, "B1": 6.0, "B0": 10.0, "C0": 2.0}


@given(q=st.tuples(pos, pos, pos), omega=pos, frac=st.floats(0.05, 1.95))
def test_derived_zero_lambda_formula(q, omega, frac):
    D = frac * omega
    c = derived_coefficients(ConstantSchedule(*q), ConstantD(D), omega, grid=[0.0]).evaluate(1.0)
    g = 2 * omega - D
    assert math.isclose(c.A1.value, g * q[1] * q[2] / q[0] - 3.0, rel_tol=1e-12, abs_tol=1e-12)
    assert math.isclose(c.A2.value, g * q[1] / q[0], rel_tol=1e-12)


def test_derived_matches_block_with_lambdas(rng):
    s = ExpSchedule((0.4, 1.3, 0.8), (1, 2, 3), (0.5, 0.7, 1.1), (0.2, 0.3), (0.9, 0.4))
    D, omega = SaturatingD(0.9, 0.3), 0.8
    dc = derived_coefficients(s, D, omega)
    for t in rng.uniform(0, 10, size=20):
        v, c = eval_schedule(s, t), dc.evaluate(t)
        b0, b1, b2, l1, l2 = (getattr(v, k).value for k in FIELDS)
        d = 0.9 - 0.3 * math.exp(-t)
        g = 2 * omega - d
        expect = {"A2": g * b1 / b0, "A1": g * b1 * b2 / b0 - b0 / d * l1 * l2 - 3,
                  "A0": g * b1 ** 2 / b0 - b0 / d * l1 ** 2 - 2 * b2, "B1": g * b2 / b0,
                  "B0": g / b0 * (b2 ** 2 - 2 * b1) - b0 / d * l2 ** 2, "C0": g / b0}
        for k, want in expect.items():
            assert math.isclose(getattr(c, k).value, want, rel_tol=1e-12, abs_tol=1e-13)


def test_derived_rejects_large_D():
    with pytest.raises(ValidationError):
        derived_coefficients(ConstantSchedule(0.5, 2, 3), ConstantD(2.0), 1.0)


def test_assumption_grid_shape():
    g = assumption_grid(1.0)
    assert g.size == 1000 and g[0] == 1.0 and math.isclose(g[-1], 1.0 + 1e4)
    assert np.all(np.diff(g) > 0)


def test_d_from_dict():
    assert d_from_dict(0.5) == ConstantD(0.5)
    assert d_from_dict({"type": "saturating", "d1": 1.0, "d2": 0.5}) == SaturatingD(1.0, 0.5)
    with pytest.raises(ParameterError):
        d_from_dict({"type": "cubic"})

"""Time-varying coefficients of the flow and the derived coefficient functions.

Every schedule evaluates to :class:`Jet` objects, so first and second
derivatives are exact. Arithmetic on jets propagates them, which is how the
derivatives of the derived coefficients (``A2'``, ``A2''``, ``A1'``, ``B1'``)
are obtained without finite differences.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, ParameterError, ValidationError


class Jet:
    """Second-order jet ``(value, first derivative, second derivative)``."""

    __slots__ = ("value", "d", "dd")

    def __init__(self, value, d=0.0, dd=0.0):
        self.value, self.d, self.dd = float(value), float(d), float(dd)

    @staticmethod
    def lift(x) -> "Jet":
        return x if isinstance(x, Jet) else Jet(x)

    def __add__(self, other):
        o = Jet.lift(other)
        return Jet(self.value + o.value, self.d + o.d, self.dd + o.dd)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.value, -self.d, -self.dd)

    def __sub__(self, other):
        return self + (-Jet.lift(other))

    def __rsub__(self, other):
        return Jet.lift(other) - self

    def __mul__(self, other):
        o = Jet.lift(other)
        return Jet(self.value * o.value,
                   self.d * o.value + self.value * o.d,
                   self.dd * o.value + 2.0 * self.d * o.d + self.value * o.dd)

    __rmul__ = __mul__

    def reciprocal(self):
        v = self.value
        if v == 0.0:
            raise ZeroDivisionError("reciprocal of a jet with zero value")
        return Jet(1.0 / v, -self.d / v ** 2, (2.0 * self.d ** 2 - v * self.dd) / v ** 3)

    def __truediv__(self, other):
        return self * Jet.lift(other).reciprocal()

    def __rtruediv__(self, other):
        return Jet.lift(other) * self.reciprocal()

    def __float__(self):
        return self.value

    def __repr__(self):
        return f"Jet({self.value!r}, {self.d!r}, {self.dd!r})"


@dataclass(frozen=True)
class ScheduleValues:
    """The five coefficient jets at one time ``t``."""

    t: float
    beta0: Jet
    beta1: Jet
    beta2: Jet
    lam1: Jet
    lam2: Jet

    def to_dict(self):
        out = {"t": self.t}
        for name in ("beta0", "beta1", "beta2", "lam1", "lam2"):
            j = getattr(self, name)
            out[name], out[name + "_d"], out[name + "_dd"] = j.value, j.d, j.dd
        return out


def _expj(p, r, t):
    """Jet of ``p * exp(-r t)``."""
    e = p * math.exp(-r * t)
    return Jet(e, -r * e, r * r * e)


class _Schedule:
    t0: float

    def _check_time(self, t):
        if not t >= self.t0:
            raise DomainError(f"t = {t} precedes t0 = {self.t0}")

    def evaluate(self, t: float) -> ScheduleValues:
        self._check_time(t)
        return self._evaluate(float(t))

    def coefficients(self, t: float):
        """Plain values ``(beta0, beta1, beta2, lam1, lam2)``; no domain check (hot path)."""
        v = self._evaluate(t)
        return v.beta0.value, v.beta1.value, v.beta2.value, v.lam1.value, v.lam2.value


@dataclass(frozen=True)
class ConstantSchedule(_Schedule):
    q0: float
    q1: float
    q2: float
    lam1: float = 0.0
    lam2: float = 0.0
    t0: float = 0.0
    family = "constant"

    def __post_init__(self):
        if min(self.q0, self.q1, self.q2) <= 0:
            raise ParameterError("constant schedule needs q0, q1, q2 > 0")
        if min(self.lam1, self.lam2) < 0 or self.t0 < 0:
            raise ParameterError("lambdas and t0 must be nonnegative")

    def _evaluate(self, t):
        return ScheduleValues(t, Jet(self.q0), Jet(self.q1), Jet(self.q2),
                              Jet(self.lam1), Jet(self.lam2))

    def coefficients(self, t):
        return self.q0, self.q1, self.q2, self.lam1, self.lam2

    def bounds(self):
        return {"c0": self.q0, "c1": self.q1, "c2": self.q2,
                "alpha0": self.q0, "alpha1": self.q1, "alpha2": self.q2}

    def to_dict(self):
        return {"family": "constant", "q": [self.q0, self.q1, self.q2],
                "lam": [self.lam1, self.lam2], "t0": self.t0}


@dataclass(frozen=True)
class ExpSchedule(_Schedule):
    """``beta_j = p_j e^{-r_j t} + q_j`` (j = 1, 2), ``beta_0 = q_0/(p_0 e^{-r_0 t} + 1)``,
    ``lam_j = tau_j (1 - e^{-m_j t})``.

    Sequences are indexed ``(0, 1, 2)`` for ``p, q, r`` and ``(1, 2)`` for ``tau, m``.
    """

    p: tuple
    q: tuple
    r: tuple
    tau: tuple = (0.0, 0.0)
    m: tuple = (0.0, 0.0)
    t0: float = 0.0
    family = "exp"

    def __post_init__(self):
        for name, size in (("p", 3), ("q", 3), ("r", 3), ("tau", 2), ("m", 2)):
            val = tuple(float(x) for x in getattr(self, name))
            if len(val) != size:
                raise ParameterError(f"{name} must have {size} entries")
            object.__setattr__(self, name, val)
        if min(self.q) <= 0:
            raise ParameterError("q_j must be positive")
        if min(self.p + self.r + self.tau + self.m) < 0 or self.t0 < 0:
            raise ParameterError("p_j, r_j, tau_j, m_j and t0 must be nonnegative")

    def _evaluate(self, t):
        p, q, r = self.p, self.q, self.r
        beta0 = q[0] / (_expj(p[0], r[0], t) + 1.0)
        beta1 = _expj(p[1], r[1], t) + q[1]
        beta2 = _expj(p[2], r[2], t) + q[2]
        lam1 = self.tau[0] - _expj(self.tau[0], self.m[0], t)
        lam2 = self.tau[1] - _expj(self.tau[1], self.m[1], t)
        return ScheduleValues(t, beta0, beta1, beta2, lam1, lam2)

    def coefficients(self, t):
        p, q, r = self.p, self.q, self.r
        return (q[0] / (p[0] * math.exp(-r[0] * t) + 1.0),
                p[1] * math.exp(-r[1] * t) + q[1],
                p[2] * math.exp(-r[2] * t) + q[2],
                self.tau[0] * -math.expm1(-self.m[0] * t),
                self.tau[1] * -math.expm1(-self.m[1] * t))

    def bounds(self):
        """Family-wide bounds; tight when ``t0 = 0`` and every ``r_j > 0``."""
        p, q = self.p, self.q
        return {"c0": q[0] / (p[0] + 1.0), "c1": q[1], "c2": q[2],
                "alpha0": q[0], "alpha1": p[1] + q[1], "alpha2": p[2] + q[2]}

    def to_dict(self):
        return {"family": "exp", "p": list(self.p), "q": list(self.q), "r": list(self.r),
                "tau": list(self.tau), "m": list(self.m), "t0": self.t0}


@dataclass(frozen=True)
class PolySchedule(_Schedule):
    """``lam2 = xi2 t^2``, ``lam1 = xi1 t``, ``beta2 = nu2/t``, ``beta1 = nu1/t^2``,
    ``beta0 = alpha0``; defined for ``t >= t0 > 0``."""

    xi1: float
    xi2: float
    nu1: float
    nu2: float
    alpha0: float = 1.0
    t0: float = 1.0
    family = "poly"

    def __post_init__(self):
        if not self.t0 > 0:
            raise ParameterError("polynomial schedules need t0 > 0 (1/t^2 coefficient)")
        if self.xi1 < 0 or self.xi2 < 0:
            raise ParameterError("xi1, xi2 must be nonnegative")
        if min(self.nu1, self.nu2, self.alpha0) <= 0:
            raise ParameterError("nu1, nu2, alpha0 must be positive")

    @classmethod
    def case1(cls, xi1, xi2, alpha0=1.0, t0=1.0):
        nu1, nu2 = case1_forced(xi1, xi2)
        return cls(xi1, xi2, nu1, nu2, alpha0, t0)

    @classmethod
    def case2(cls, xi1, nu2, alpha0=1.0, t0=1.0):
        return cls(xi1, 0.0, case2_forced(xi1, nu2), nu2, alpha0, t0)

    def _evaluate(self, t):
        return ScheduleValues(
            t, Jet(self.alpha0),
            Jet(self.nu1 / t ** 2, -2.0 * self.nu1 / t ** 3, 6.0 * self.nu1 / t ** 4),
            Jet(self.nu2 / t, -self.nu2 / t ** 2, 2.0 * self.nu2 / t ** 3),
            Jet(self.xi1 * t, self.xi1, 0.0),
            Jet(self.xi2 * t * t, 2.0 * self.xi2 * t, 2.0 * self.xi2))

    def coefficients(self, t):
        return self.alpha0, self.nu1 / (t * t), self.nu2 / t, self.xi1 * t, self.xi2 * t * t

    def bounds(self):
        t0 = self.t0
        return {"c0": self.alpha0, "c1": 0.0, "c2": 0.0, "alpha0": self.alpha0,
                "alpha1": self.nu1 / t0 ** 2, "alpha2": self.nu2 / t0}

    def to_dict(self):
        return {"family": "poly", "xi1": self.xi1, "xi2": self.xi2, "nu1": self.nu1,
                "nu2": self.nu2, "alpha0": self.alpha0, "t0": self.t0}


Schedule = Union[ConstantSchedule, ExpSchedule, PolySchedule]


def case1_forced(xi1: float, xi2: float):
    """``(nu1, nu2)`` forced by the ``xi2 > 0`` optimization flow."""
    if not xi2 > 0:
        raise ParameterError("case 1 requires xi2 > 0")
    return (xi1 + 1.0) / xi2, xi1 / xi2 + 2.0


def case2_forced(xi1: float, nu2: float) -> float:
    """``nu1`` forced by the ``xi2 = 0`` optimization flow."""
    if not xi1 > 0:
        raise ParameterError("case 2 requires xi1 > 0")
    return (1.0 + xi1) / xi1 * (nu2 - 2.0) - (1.0 + xi1) / xi1 ** 2


def eval_schedule(s: Schedule, t: float) -> ScheduleValues:
    return s.evaluate(t)


def schedule_from_dict(d: dict) -> Schedule:
    fam = d.get("family")
    t0 = d.get("t0")
    try:
        if fam == "constant":
            q = d["q"]
            lam = d.get("lam", [0.0, 0.0])
            return ConstantSchedule(q[0], q[1], q[2], lam[0], lam[1], t0 or 0.0)
        if fam == "exp":
            return ExpSchedule(d["p"], d["q"], d["r"], d.get("tau", [0, 0]), d.get("m", [0, 0]),
                               t0 or 0.0)
        if fam == "poly":
            t0 = 1.0 if t0 is None else t0
            if "case" in d:
                if d["case"] == 1:
                    return PolySchedule.case1(d["xi1"], d["xi2"], d.get("alpha0", 1.0), t0)
                if d["case"] == 2:
                    return PolySchedule.case2(d["xi1"], d["nu2"], d.get("alpha0", 1.0), t0)
                raise ParameterError(f"unknown poly case {d['case']!r}")
            return PolySchedule(d["xi1"], d["xi2"], d["nu1"], d["nu2"], d.get("alpha0", 1.0), t0)
    except (KeyError, IndexError, TypeError) as exc:
        raise ParameterError(f"malformed {fam!r} schedule: {exc}") from None
    raise ParameterError(f"unknown schedule family {fam!r}")


# ---------------------------------------------------------------------------
# The auxiliary function D(t)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantD:
    d: float

    def __post_init__(self):
        if not self.d > 0:
            raise ParameterError("D must be positive")

    def evaluate(self, t) -> Jet:
        return Jet(self.d)

    def sup(self, t0):
        return self.d

    def to_dict(self):
        return {"type": "constant", "d": self.d}


@dataclass(frozen=True)
class SaturatingD:
    """``D(t) = d1 - d2 e^{-t}``: nondecreasing and concave for ``d2 >= 0``."""

    d1: float
    d2: float

    def __post_init__(self):
        if not (self.d1 > 0 and self.d2 >= 0 and self.d2 < self.d1):
            raise ParameterError("SaturatingD needs 0 <= d2 < d1 so that D > 0")

    def evaluate(self, t) -> Jet:
        return self.d1 - _expj(self.d2, 1.0, t)

    def sup(self, t0):
        return self.d1

    def to_dict(self):
        return {"type": "saturating", "d1": self.d1, "d2": self.d2}


DSpec = Union[ConstantD, SaturatingD]


def d_from_dict(d) -> DSpec:
    if isinstance(d, (int, float)):
        return ConstantD(float(d))
    kind = d.get("type", "constant")
    if kind == "constant":
        return ConstantD(float(d["d"]))
    if kind == "saturating":
        return SaturatingD(float(d["d1"]), float(d["d2"]))
    raise ParameterError(f"unknown D type {kind!r}")


def assumption_grid(t0: float, n: int = 1000, span: float = 1e4) -> np.ndarray:
    """``t0`` followed by ``n - 1`` log-spaced offsets covering ``[t0, t0 + span]``."""
    return np.concatenate([[t0], t0 + np.logspace(-4.0, math.log10(span), n - 1)])


# ---------------------------------------------------------------------------
# Derived coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DerivedValues:
    t: float
    A2: Jet
    A1: Jet
    A0: Jet
    B1: Jet
    B0: Jet
    C0: Jet
    D: Jet

    def to_dict(self):
        return {k: (v.value if isinstance(v, Jet) else v) for k, v in self.__dict__.items()}


@dataclass(frozen=True)
class DerivedCoefficients:
    """The coefficient functions built from a schedule, ``D`` and ``omega``.

    With ``g = 2 omega - D``::

        A2 = g b1/b0                 B1 = g b2/b0
        A1 = g b1 b2/b0 - (b0/D) l1 l2 - 3
        A0 = g b1^2/b0 - (b0/D) l1^2 - 2 b2
        B0 = (g/b0)(b2^2 - 2 b1) - (b0/D) l2^2
        C0 = g/b0
    """

    schedule: Schedule
    D: DSpec
    omega: float

    def evaluate(self, t: float) -> DerivedValues:
        s = self.schedule.evaluate(t)
        D = self.D.evaluate(t)
        b0, b1, b2, l1, l2 = s.beta0, s.beta1, s.beta2, s.lam1, s.lam2
        g_over_b0 = (2.0 * self.omega - D) / b0
        b0_over_D = b0 / D
        return DerivedValues(
            t,
            A2=g_over_b0 * b1,
            A1=g_over_b0 * b1 * b2 - b0_over_D * l1 * l2 - 3.0,
            A0=g_over_b0 * b1 * b1 - b0_over_D * l1 * l1 - 2.0 * b2,
            B1=g_over_b0 * b2,
            B0=g_over_b0 * (b2 * b2 - 2.0 * b1) - b0_over_D * l2 * l2,
            C0=g_over_b0,
            D=D,
        )

    def on_grid(self, grid) -> dict:
        """Values of every coefficient (and ``A2'``, ``A2''``, ``A1'``, ``B1'``) on ``grid``."""
        rows = [self.evaluate(t) for t in grid]
        out = {name: np.array([getattr(r, name).value for r in rows])
               for name in ("A2", "A1", "A0", "B1", "B0", "C0", "D")}
        out["A2_d"] = np.array([r.A2.d for r in rows])
        out["A2_dd"] = np.array([r.A2.dd for r in rows])
        out["A1_d"] = np.array([r.A1.d for r in rows])
        out["B1_d"] = np.array([r.B1.d for r in rows])
        return out


def derived_coefficients(s: Schedule, D: DSpec, omega: float, grid=None) -> DerivedCoefficients:
    """Build :class:`DerivedCoefficients` after checking ``0 < D < 2 omega`` on a grid."""
    if not omega > 0:
        raise ParameterError("omega must be positive")
    grid = assumption_grid(s.t0) if grid is None else grid
    vals = np.array([D.evaluate(t).value for t in grid])
    if np.any(vals <= 0) or np.any(vals >= 2.0 * omega):
        raise ValidationError(f"D must lie in (0, 2 omega) = (0, {2 * omega}) on the check grid")
    return DerivedCoefficients(s, D, float(omega))

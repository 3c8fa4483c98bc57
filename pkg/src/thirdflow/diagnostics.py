"""Post-processing of trajectories: Lyapunov functions, identities, rate fits.

Everything here is a pure function of recorded states.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, ParameterError, PreconditionError


# ---------------------------------------------------------------------------
# Rate fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateEstimate:
    """Least-squares fit ``value ~ C t^s`` (power) or ``value ~ C e^{s t}`` (exponential)."""

    model: str
    s: float
    C: float
    window: tuple
    r2: float
    n_points: int
    dropped: int = 0

    def to_dict(self):
        d = asdict(self)
        d["window"] = list(self.window)
        return d


def default_window(t) -> tuple:
    """``[t0 + 10, 0.9 t_end]``, skipping the transient and the final stretch."""
    t = np.asarray(t, dtype=float)
    return (float(t[0] + 10.0), float(0.9 * t[-1]))


def fit_rate(t, values, model: str = "power", window=None, floor: Optional[float] = None,
             min_points: int = 10) -> RateEstimate:
    """Fit a decay rate by ordinary least squares on log values.

    Parameters
    ----------
    t, values : array_like
    model : {"power", "exponential"}
        Regress ``log value`` on ``log t`` or on ``t``.
    window : (float, float), optional
        Inclusive fit window; defaults to :func:`default_window`.
    floor : float, optional
        Samples with ``value <= floor`` are dropped (count reported as
        ``dropped``) instead of raising. Use it when the series reaches
        round-off level.

    Raises
    ------
    DomainError
        Nonpositive values in the window (without ``floor``) or fewer than
        ``min_points`` usable samples.
    """
    if model not in ("power", "exponential"):
        raise ParameterError(f"unknown model {model!r}")
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    lo, hi = default_window(t) if window is None else (float(window[0]), float(window[1]))
    sel = (t >= lo) & (t <= hi)
    tw, yw = t[sel], y[sel]
    dropped = 0
    if floor is not None:
        keep = yw > floor
        dropped = int((~keep).sum())
        tw, yw = tw[keep], yw[keep]
    elif np.any(~(yw > 0)):
        raise DomainError("nonpositive values in fit window; clip at a floor (e.g. 1e-16) first")
    if tw.size < min_points:
        raise DomainError(f"only {tw.size} points in window [{lo}, {hi}]; need {min_points}")
    if model == "power" and tw[0] <= 0:
        raise DomainError("power fits need t > 0")
    X = np.log(tw) if model == "power" else tw
    Y = np.log(yw)
    slope, intercept = np.polyfit(X, Y, 1)
    resid = Y - (slope * X + intercept)
    ss_tot = float(((Y - Y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else float(np.clip(1.0 - (resid ** 2).sum() / ss_tot, 0.0, 1.0))
    return RateEstimate(model, float(slope), float(math.exp(intercept)), (lo, hi), r2,
                        int(tw.size), dropped)


def max_relative_increase(series) -> float:
    """``max_k (V_{k+1} - V_k) / (1 + |V_k|)``; nonpositive means nonincreasing."""
    V = np.asarray(series, dtype=float)
    if V.size < 2:
        return -math.inf
    return float(np.max(np.diff(V) / (1.0 + np.abs(V[:-1]))))


# ---------------------------------------------------------------------------
# Lyapunov function for the weak-convergence setting
# ---------------------------------------------------------------------------

def _distance_terms(x, v, a, x_star):
    e = x - x_star
    y = np.einsum("ij,ij->i", e, e)
    dy = 2.0 * np.einsum("ij,ij->i", v, e)
    ddy = 2.0 * np.einsum("ij,ij->i", a, e) + 2.0 * np.einsum("ij,ij->i", v, v)
    z1 = np.einsum("ij,ij->i", v, v)
    dz1 = 2.0 * np.einsum("ij,ij->i", a, v)
    z2 = np.einsum("ij,ij->i", a, a)
    return y, dy, ddy, z1, dz1, z2


def lyapunov_weak(traj, dc, x_star) -> np.ndarray:
    """``h = y'' + b2 y' + (b1 - b2') y + A2 z1' + (A1 - A2') z1 + B1 z2`` along ``traj``.

    ``y = ||x - x*||^2``, ``z1 = ||x'||^2``, ``z2 = ||x''||^2``; ``dc`` is a
    :class:`~thirdflow.schedules.DerivedCoefficients`.
    """
    if x_star is None:
        raise PreconditionError("lyapunov_weak needs the solution x_star")
    x_star = np.asarray(x_star, dtype=float)
    y, dy, ddy, z1, dz1, z2 = _distance_terms(traj.x, traj.v, traj.a, x_star)
    out = np.empty(traj.t.size)
    for k, t in enumerate(traj.t):
        s = dc.schedule.evaluate(t)
        c = dc.evaluate(t)
        out[k] = (ddy[k] + s.beta2.value * dy[k] + (s.beta1.value - s.beta2.d) * y[k]
                  + c.A2.value * dz1[k] + (c.A1.value - c.A2.d) * z1[k] + c.B1.value * z2[k])
    return out


# ---------------------------------------------------------------------------
# Norm-expansion identities
# ---------------------------------------------------------------------------

def norm_identity_residuals(x, v, a, x3, beta1, beta2, lam1, lam2, x_star=None) -> dict:
    """Relative residuals of three expansions of squared norms in terms of
    ``y``, ``z1 = ||v||^2``, ``z2 = ||a||^2``, ``z3 = ||x'''||^2`` and their derivatives.

    - ``||x''' + b2 a + b1 v||^2``
    - ``||lam1 v + lam2 a||^2``
    - ``||x + lam1 v + lam2 a - x*||^2``

    Each residual is ``|direct - expanded|`` divided by the sum of absolute
    expanded terms (or 1 if that is smaller).
    """
    x, v, a, x3 = (np.asarray(w, dtype=float) for w in (x, v, a, x3))
    xs = np.zeros_like(x) if x_star is None else np.asarray(x_star, dtype=float)
    e = x - xs
    z1, z2, z3 = v @ v, a @ a, x3 @ x3
    dz1 = 2.0 * (a @ v)
    ddz1 = 2.0 * (a @ a) + 2.0 * (x3 @ v)
    dz2 = 2.0 * (x3 @ a)
    y, dy, ddy = e @ e, 2.0 * (v @ e), 2.0 * (a @ e) + 2.0 * (v @ v)

    def rel(direct, terms):
        return abs(direct - sum(terms)) / max(1.0, sum(abs(t) for t in terms))

    w = x3 + beta2 * a + beta1 * v
    damping = rel(w @ w, [beta1 * ddz1, beta1 * beta2 * dz1, beta1 ** 2 * z1, beta2 * dz2,
                          (beta2 ** 2 - 2.0 * beta1) * z2, z3])
    m = lam1 * v + lam2 * a
    mix = rel(m @ m, [lam1 ** 2 * z1, lam2 ** 2 * z2, lam1 * lam2 * dz1])
    p = e + m
    anchor = rel(p @ p, [lam2 * ddy, lam1 * dy, y, lam1 * lam2 * dz1,
                         (lam1 ** 2 - 2.0 * lam2) * z1, lam2 ** 2 * z2])
    return {"damping": damping, "extrapolation": mix, "anchor": anchor}


def check_norm_identities(x, v, a, x3, beta1, beta2, lam1, lam2, x_star=None) -> float:
    """Largest of the three relative residuals from :func:`norm_identity_residuals`."""
    return max(norm_identity_residuals(x, v, a, x3, beta1, beta2, lam1, lam2, x_star).values())


# ---------------------------------------------------------------------------
# Rate transfer from an extrapolated point back to the trajectory
# ---------------------------------------------------------------------------

@dataclass
class TransferReport:
    hypothesis_holds: bool
    hypothesis_max_violation: float
    M1: float
    M2: float
    M3: float
    conclusion_holds: bool
    conclusion_max_violation: float

    @property
    def passed(self):
        return self.hypothesis_holds and self.conclusion_holds

    def to_dict(self):
        return asdict(self)


def transfer_constants(M1, xi, t0, g_y0):
    """``(M2, M3)`` with ``g(y(t)) <= M2 t^-3 + M3 t^(-1/xi)``."""
    if abs(1.0 - 3.0 * xi) < 1e-12:
        raise ParameterError("xi = 1/3 is excluded")
    M2 = M1 / (1.0 - 3.0 * xi)
    M3 = t0 ** (1.0 / xi) * g_y0 - M1 * t0 ** (1.0 / xi - 3.0) / (1.0 - 3.0 * xi)
    return M2, M3


def verify_rate_transfer(t, y, y_prime, g: Callable, xi: float, M1: Optional[float] = None,
                         rtol: float = 1e-9) -> TransferReport:
    """Check the transfer of an ``M1/t^3`` bound from ``y + xi t y'`` to ``y``.

    For convex ``g >= 0`` and ``g(y + xi t y') <= M1 / t^3`` on ``[t0, inf)``,
    ``t^{1/xi} y`` has derivative ``(1/xi) t^{1/xi - 1} (y + xi t y')`` and
    Jensen gives ``g(y(t)) t^3 <= M2 + M3 t^{3 - 1/xi}``. ``t[0]`` plays ``t0``.
    If ``M1`` is omitted it is estimated as the sample maximum of
    ``t^3 g(y + xi t y')``. Failures are reported, not raised.
    """
    if not xi > 0:
        raise ParameterError("xi must be positive")
    t = np.asarray(t, dtype=float)
    Y = np.atleast_2d(np.asarray(y, dtype=float))
    dY = np.atleast_2d(np.asarray(y_prime, dtype=float))
    if Y.shape[0] != t.size:
        Y, dY = Y.T, dY.T
    hyp = np.array([g(Y[k] + xi * t[k] * dY[k]) * t[k] ** 3 for k in range(t.size)])
    if M1 is None:
        M1 = float(max(hyp.max(), 0.0))
    tol = rtol * max(1.0, abs(M1))
    hyp_viol = float(hyp.max() - M1)
    gy = np.array([g(Y[k]) for k in range(t.size)])
    M2, M3 = transfer_constants(M1, xi, t[0], gy[0])
    bound = M2 + M3 * t ** (3.0 - 1.0 / xi)
    lhs = gy * t ** 3
    concl_viol = float(np.max(lhs - bound))
    scale = max(1.0, float(np.max(np.abs(bound))))
    return TransferReport(hyp_viol <= tol, hyp_viol, float(M1), float(M2), float(M3),
                          concl_viol <= rtol * scale, concl_viol)


# ---------------------------------------------------------------------------
# Optimization-flow Lyapunov functions
# ---------------------------------------------------------------------------

def _fvals(f, P):
    return np.array([f(p) for p in P])


def anchor_points(traj, lam1_coef, lam2_coef):
    """``x + lam1_coef t v + lam2_coef t^2 a`` per record."""
    t = traj.t[:, None]
    return traj.x + lam1_coef * t * traj.v + lam2_coef * t * t * traj.a


def lyapunov_opt_case1(traj, xi1, xi2, alpha0, f, f_star, x_star) -> np.ndarray:
    """``V = alpha0 t^3/(3 xi2) [f(phi) - f*] + 1/2 ||t^2 a + (xi1/xi2) t v + (1/xi2)(x - x*)||^2``.

    The last coefficient is ``nu1 - nu2 + 2``, which the forced ``nu`` reduce to ``1/xi2``.
    """
    if not xi2 > 0:
        raise ParameterError("xi2 must be positive; use lyapunov_opt_case2 for xi2 = 0")
    t = traj.t
    phi = anchor_points(traj, xi1, xi2)
    gap = _fvals(f, phi) - f_star
    w = t[:, None] ** 2 * traj.a + (xi1 / xi2) * t[:, None] * traj.v + (traj.x - x_star) / xi2
    return alpha0 * t ** 3 / (3.0 * xi2) * gap + 0.5 * np.einsum("ij,ij->i", w, w)


def lyapunov_opt_case2(traj, xi1, nu2, alpha0, f, f_star, x_star) -> np.ndarray:
    """``V = alpha0 t^3/xi1 [f(phi) - f*] + 1/2 ||t^2 a + (nu2-2) t v + c (x - x*)||^2``

    with ``phi = x + xi1 t v`` and ``c = (nu2 - 2)/xi1 - (1 + xi1)/xi1^2``.
    """
    if not xi1 > 0:
        raise ParameterError("xi1 must be positive")
    t = traj.t
    phi = anchor_points(traj, xi1, 0.0)
    gap = _fvals(f, phi) - f_star
    c = (nu2 - 2.0) / xi1 - (1.0 + xi1) / xi1 ** 2
    w = t[:, None] ** 2 * traj.a + (nu2 - 2.0) * t[:, None] * traj.v + c * (traj.x - x_star)
    return alpha0 * t ** 3 / xi1 * gap + 0.5 * np.einsum("ij,ij->i", w, w)


def ergodic_gap(traj, f, f_star) -> np.ndarray:
    """``f(running time-average of x) - f*``; trapezoid rule over the records.

    The first entry uses ``x(t0)`` itself (the average over an empty interval).
    """
    t, X = traj.t, traj.x
    if t.size < 2:
        raise DomainError("ergodic_gap needs at least two records")
    dt = np.diff(t)[:, None]
    integral = np.vstack([np.zeros((1, X.shape[1])), np.cumsum(0.5 * dt * (X[1:] + X[:-1]), axis=0)])
    avg = np.empty_like(X)
    avg[0] = X[0]
    avg[1:] = integral[1:] / (t[1:] - t[0])[:, None]
    return _fvals(f, avg) - f_star


def nested_factor_trajectories(traj, p, q, f=None, f_star=0.0) -> dict:
    """Split ``phi = (x + q t x') + p t (x + q t x')'`` for the ``xi2 > 0`` flow.

    Returns the inner curve ``x + q t v``, its derivative ``(1+q) v + q t a``,
    the recombined outer point and, if ``f`` is given, ``f(inner) - f*`` and
    ``f(x) - f*``.
    """
    t = traj.t[:, None]
    inner = traj.x + q * t * traj.v
    inner_d = (1.0 + q) * traj.v + q * t * traj.a
    out = {"inner": inner, "inner_derivative": inner_d, "outer": inner + p * t * inner_d}
    if f is not None:
        out["f_inner"] = _fvals(f, inner) - f_star
        out["f_x"] = _fvals(f, traj.x) - f_star
    return out

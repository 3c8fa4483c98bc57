"""Numerical integration of the third-order flow.

The flow is integrated in its first-order form on the stacked state
``y = (x, v, a)`` of length ``3n``::

    x' = v,   v' = a,   a' = -beta1 v - beta2 a - beta0 U(x + lam1 v + lam2 a)

Two explicit methods are provided: classical RK4 with a fixed step and
Dormand-Prince 5(4) with PI step-size control.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DomainError, NonFiniteError, ParameterError, StiffnessError
from .operators import OperatorSpec, as_vector

TERMINATIONS = ("reached_t_end", "residual_met", "nonfinite_abort")


@dataclass(frozen=True)
class SystemState:
    t: float
    x: np.ndarray
    v: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        x, v, a = as_vector(self.x), as_vector(self.v), as_vector(self.a)
        if not (x.size == v.size == a.size):
            raise ParameterError("x, v, a must have equal dimension")
        if not math.isfinite(self.t):
            raise ParameterError("t must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "a", a)

    @classmethod
    def at_rest(cls, t, x):
        x = as_vector(x)
        return cls(t, x, np.zeros_like(x), np.zeros_like(x))

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.x, self.v, self.a])


@dataclass(frozen=True)
class SolverConfig:
    """Integration controls.

    Attributes
    ----------
    method : {"rk4", "rk45"}
    h : float
        Fixed step for ``rk4``; initial step for ``rk45`` (``None`` picks one).
    abs_tol, rel_tol : float
        Local error target ``abs_tol + rel_tol * ||y||_inf`` for ``rk45``.
    h_min, h_max : float
        Step bounds for ``rk45``; falling below ``h_min`` raises
        :class:`~thirdflow.errors.StiffnessError`.
    t_end : float
    stop_residual : float or None
        Stop once ``||U(x(t))||`` drops to this value.
    record_every : int
        Record every k-th accepted step (the first and last are always kept).
    record_times : sequence of float or None
        Extra times the integrator steps onto exactly and records.
    max_steps : int
    """

    method: str = "rk45"
    h: Optional[float] = None
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    h_min: float = 1e-12
    h_max: float = math.inf
    t_end: float = 10.0
    stop_residual: Optional[float] = None
    record_every: int = 1
    record_times: Optional[tuple] = None
    max_steps: int = 10_000_000

    def __post_init__(self):
        if self.method not in ("rk4", "rk45"):
            raise ParameterError(f"unknown method {self.method!r}; use 'rk4' or 'rk45'")
        if self.method == "rk4" and not (self.h is not None and self.h > 0):
            raise ParameterError("rk4 needs a positive step h")
        if self.h is not None and not self.h > 0:
            raise ParameterError("h must be positive")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ParameterError("tolerances must be positive")
        if not (0 < self.h_min <= self.h_max):
            raise ParameterError("need 0 < h_min <= h_max")
        if self.record_every < 1:
            raise ParameterError("record_every must be >= 1")
        if self.record_times is not None:
            object.__setattr__(self, "record_times", tuple(sorted(float(t) for t in self.record_times)))

    def to_dict(self):
        d = asdict(self)
        d["record_times"] = None if self.record_times is None else list(self.record_times)
        d["h_max"] = None if math.isinf(self.h_max) else self.h_max
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        d = dict(d)
        if d.get("h_max") is None:
            d.pop("h_max", None)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ParameterError(f"unknown solver fields {sorted(unknown)}")
        return cls(**d)


@dataclass
class Trajectory:
    """Sampled solution. Arrays are indexed by record, then coordinate."""

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    a: np.ndarray
    residual: np.ndarray
    termination: str
    stats: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def __len__(self):
        return self.t.size

    def state(self, i) -> SystemState:
        return SystemState(self.t[i], self.x[i], self.v[i], self.a[i])

    def columns(self):
        n = self.dim
        names = ["t"] + [f"{p}_{i}" for p in "xva" for i in range(n)] + ["residual"]
        cols = [self.t[:, None], self.x, self.v, self.a, self.residual[:, None]]
        for k, vals in self.extra.items():
            names.append(k)
            cols.append(np.asarray(vals, dtype=float)[:, None])
        return names, np.hstack(cols)

    def to_csv(self, path):
        names, data = self.columns()
        write_csv(path, names, data)

    def metadata(self) -> dict:
        return {"termination": self.termination, "records": int(self.t.size),
                "t_start": float(self.t[0]), "t_last": float(self.t[-1]),
                "final_residual": float(self.residual[-1]), "stats": self.stats}


def write_csv(path, names, data):
    """Byte-reproducible CSV (``%.17g``, ``\\n`` line endings)."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        np.savetxt(fh, np.atleast_2d(data), fmt="%.17g", delimiter=",")


def read_csv(path):
    """Return ``(names, data)`` for a CSV written by :func:`write_csv`."""
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return names, data


def write_sidecar(path, payload: dict):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default))


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    return str(o)


# ---------------------------------------------------------------------------
# Right-hand side
# ---------------------------------------------------------------------------

def rhs(schedule, U: OperatorSpec, state: SystemState):
    """``(x', v', a')`` at ``state``; raises :class:`NonFiniteError` on non-finite ``U``."""
    if state.t < schedule.t0:
        raise DomainError(f"t = {state.t} precedes t0 = {schedule.t0}")
    b0, b1, b2, l1, l2 = schedule.coefficients(state.t)
    u = U(state.x + l1 * state.v + l2 * state.a)
    if not np.all(np.isfinite(u)):
        raise NonFiniteError("operator returned non-finite values")
    return state.v.copy(), state.a.copy(), -b1 * state.v - b2 * state.a - b0 * u


def third_derivative(schedule, U, t, x, v, a):
    b0, b1, b2, l1, l2 = schedule.coefficients(t)
    return -b1 * v - b2 * a - b0 * U(x + l1 * v + l2 * a)


def _make_field(schedule, U, n):
    coeffs = schedule.coefficients

    def f(t, y):
        x, v, a = y[:n], y[n:2 * n], y[2 * n:]
        b0, b1, b2, l1, l2 = coeffs(t)
        out = np.empty_like(y)
        out[:n] = v
        out[n:2 * n] = a
        out[2 * n:] = -b1 * v - b2 * a - b0 * U(x + l1 * v + l2 * a)
        return out

    return f


# ---------------------------------------------------------------------------
# Steppers
# ---------------------------------------------------------------------------

def _rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

SAFETY, EXP_I, EXP_P = 0.9, 0.7 / 4.0, 0.4 / 4.0
FAC_MIN, FAC_MAX = 0.2, 5.0


def _dopri_step(f, t, y, h, k1):
    """One step; returns ``(y_new, error_vector, k7)`` where ``k7 = f(t+h, y_new)`` (FSAL)."""
    ks = [k1]
    for i in range(1, 7):
        acc = y.copy()
        for j, aij in enumerate(_A[i]):
            if aij:
                acc += (h * aij) * ks[j]
        ks.append(f(t + _C[i] * h, acc))
    y_new = acc  # stage 7 is evaluated at the 5th-order solution
    err = h * sum(e * k for e, k in zip(_E, ks) if e)
    return y_new, err, ks[6]


def _initial_step(f, t, y, f0, atol, rtol, h_max):
    sc = atol + rtol * np.max(np.abs(y))
    d0, d1 = np.max(np.abs(y)) / sc, np.max(np.abs(f0)) / sc
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = f(t + h0, y + h0 * f0)
    d2 = np.max(np.abs(f1 - f0)) / sc / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, h_max)


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

class _Recorder:
    def __init__(self, U, n):
        self.U, self.n = U, n
        self.t, self.y, self.res = [], [], []

    def add(self, t, y):
        r = float(np.linalg.norm(self.U(y[:self.n])))
        self.t.append(t)
        self.y.append(y.copy())
        self.res.append(r)
        return r

    def build(self, termination, stats):
        Y = np.array(self.y)
        n = self.n
        return Trajectory(np.array(self.t), Y[:, :n], Y[:, n:2 * n], Y[:, 2 * n:],
                          np.array(self.res), termination, stats)


def integrate(schedule, U: OperatorSpec, init: SystemState, cfg: SolverConfig) -> Trajectory:
    """Integrate from ``init`` (which must start at ``schedule.t0``) to ``cfg.t_end``.

    Returns
    -------
    Trajectory
        ``termination`` is ``reached_t_end``, ``residual_met`` or
        ``nonfinite_abort`` (partial trajectory up to the last finite state).

    Raises
    ------
    StiffnessError
        When the adaptive step falls below ``h_min`` or ``max_steps`` runs out;
        the partial trajectory (termination ``step_underflow`` or ``max_steps``)
        is attached as ``exc.trajectory``.
    """
    t0 = float(schedule.t0)
    if abs(init.t - t0) > 1e-12 * max(1.0, abs(t0)):
        raise ParameterError(f"initial time {init.t} must equal schedule t0 = {t0}")
    if not cfg.t_end > t0:
        raise ParameterError("t_end must exceed t0")
    n = init.x.size
    f = _make_field(schedule, U, n)
    rec = _Recorder(U, n)
    stops = [s for s in (cfg.record_times or ()) if t0 < s < cfg.t_end] + [cfg.t_end]
    stop_idx = 0
    stats = {"method": cfg.method, "steps": 0, "rejected": 0, "fevals": 0}
    wall = time.perf_counter()

    def finish(reason):
        stats["wall_time_s"] = time.perf_counter() - wall
        return rec.build(reason, stats)

    t, y = t0, init.stacked()
    r0 = rec.add(t, y)
    if cfg.stop_residual is not None and r0 <= cfg.stop_residual:
        return finish("residual_met")

    since_record = 0
    if cfg.method == "rk45":
        with np.errstate(all="ignore"):
            k1 = f(t, y)
        stats["fevals"] += 1
        if not np.all(np.isfinite(k1)):
            return finish("nonfinite_abort")
        h = cfg.h or _initial_step(f, t, y, k1, cfg.abs_tol, cfg.rel_tol, cfg.h_max)
        h = min(max(h, cfg.h_min), cfg.h_max)
        err_prev = 1e-4
    else:
        h = cfg.h
    # fixed steps are placed at base + k h rather than accumulated, so they land on stops
    base, k_fixed = t, 0

    while stats["steps"] < cfg.max_steps:
        target = stops[stop_idx]
        if cfg.method == "rk4":
            h = base + (k_fixed + 1) * cfg.h - t
        h_step = min(h, target - t)
        hit = h_step >= target - t - 1e-14 * max(1.0, abs(target))
        if hit:
            h_step = target - t
        with np.errstate(all="ignore"):
            if cfg.method == "rk4":
                y_new = _rk4_step(f, t, y, h_step)
                stats["fevals"] += 4
                accepted, k_next = True, None
            else:
                y_new, err_vec, k_next = _dopri_step(f, t, y, h_step, k1)
                stats["fevals"] += 6
                sc = cfg.abs_tol + cfg.rel_tol * max(np.max(np.abs(y)), np.max(np.abs(y_new)))
                err = float(np.max(np.abs(err_vec))) / sc
                accepted = err <= 1.0
        if not np.all(np.isfinite(y_new)) or (cfg.method == "rk45" and not math.isfinite(err)):
            return finish("nonfinite_abort")

        if cfg.method == "rk45":
            if not accepted:
                stats["rejected"] += 1
                h = h_step * max(FAC_MIN, SAFETY * err ** -0.25)
                if h < cfg.h_min:
                    traj = finish("step_underflow")
                    exc = StiffnessError(f"step size {h:.3e} below h_min at t = {t:.6g}")
                    exc.trajectory = traj
                    raise exc
                continue
            fac = SAFETY * max(err, 1e-10) ** -EXP_I * err_prev ** EXP_P
            h_prop = min(h_step * min(FAC_MAX, max(FAC_MIN, fac)), cfg.h_max)
            err_prev = max(err, 1e-4)
            k1 = k_next
            # a step shortened to land on a stop should not shrink the next one
            h = max(h_prop, h) if hit else h_prop

        stats["steps"] += 1
        k_fixed += 1
        t = target if hit else t + h_step
        if hit:
            base, k_fixed = t, 0
        y = y_new
        since_record += 1
        if hit or since_record >= cfg.record_every:
            r = rec.add(t, y)
            since_record = 0
            if cfg.stop_residual is not None and r <= cfg.stop_residual:
                return finish("residual_met")
        elif cfg.stop_residual is not None:
            if np.linalg.norm(U(y[:n])) <= cfg.stop_residual:
                rec.add(t, y)
                return finish("residual_met")
        if hit:
            stop_idx += 1
            if stop_idx == len(stops):
                return finish("reached_t_end")
    if rec.t[-1] != t:
        rec.add(t, y)
    exc = StiffnessError(f"max_steps = {cfg.max_steps} exhausted at t = {t:.6g}")
    exc.trajectory = finish("max_steps")
    raise exc


def companion_matrix(schedule_values, spectrum_matrix) -> np.ndarray:
    """Generator of the linear flow for constant coefficients and ``U(x) = Q x``.

    ``schedule_values`` is ``(beta0, beta1, beta2, lam1, lam2)``.
    """
    b0, b1, b2, l1, l2 = schedule_values
    Q = np.atleast_2d(np.asarray(spectrum_matrix, dtype=float))
    n = Q.shape[0]
    I, Z = np.eye(n), np.zeros((n, n))
    return np.block([[Z, I, Z], [Z, Z, I],
                     [-b0 * Q, -b1 * I - b0 * l1 * Q, -b2 * I - b0 * l2 * Q]])

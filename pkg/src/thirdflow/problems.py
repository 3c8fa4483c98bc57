"""Benchmark instances with known solutions for each operator class.

Instances are generated from a seed and serialize to JSON with their full
numeric data, so a run can be reproduced from the file without regenerating.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import GenerationError, ParameterError
from .operators import (Box, L1Norm, NormalCone, OperatorSpec, davis_yin, gradient_operator,
                        linear_operator, tseng_fbf, vi_forward)

POWER_ITERS, POWER_TOL, POWER_INFLATE = 200, 1e-12, 1.01


@dataclass
class ProblemInstance:
    kind: str
    operator: OperatorSpec
    x_star: np.ndarray
    description: str
    f: Optional[Callable] = None
    f_star: Optional[float] = None
    params: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.x_star.size

    def to_dict(self) -> dict:
        enc = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.data.items()}
        return {"kind": self.kind, "params": self.params, "data": enc,
                "description": self.description}

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemInstance":
        """Rebuild from :meth:`to_dict` output, or generate from ``{"kind", "params"}``."""
        kind = d.get("kind")
        if kind not in _BUILDERS:
            raise ParameterError(f"unknown problem kind {kind!r}")
        if "data" not in d:
            return make_problem(kind, **d.get("params", {}))
        data = {k: (np.array(v, dtype=float) if isinstance(v, list) else v)
                for k, v in d["data"].items()}
        return _BUILDERS[kind](data, dict(d.get("params", {})))


def operator_norm(M, iters=POWER_ITERS, tol=POWER_TOL, seed=0) -> float:
    """Spectral norm of ``M`` by power iteration on ``M^T M``."""
    M = np.atleast_2d(M)
    v = np.random.default_rng(seed).standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = M.T @ (M @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        new = math.sqrt(nw)
        if abs(new - est) <= tol * new:
            est = new
            break
        est = new
    return est


def _orthogonal(rng, n):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def _skew(rng, n, sigma):
    if n == 1 or sigma == 0:
        return np.zeros((n, n))
    G = rng.standard_normal((n, n))
    K = G - G.T
    return K * (sigma / np.linalg.norm(K, 2))


# ---------------------------------------------------------------------------
# Quadratic minimization
# ---------------------------------------------------------------------------

def make_quadratic(n, mu, L, seed=0, spectrum=None) -> ProblemInstance:
    """``f(x) = 1/2 (x - x*)' Q (x - x*)`` with eigenvalues geometrically spaced in ``[mu, L]``.

    ``spectrum`` overrides the eigenvalues. ``f* = 0``.
    """
    if not (0 < mu <= L):
        raise ParameterError("need 0 < mu <= L")
    n = int(n)
    if n < 1:
        raise ParameterError("n must be >= 1")
    rng = np.random.default_rng(seed)
    eig = np.geomspace(mu, L, n) if spectrum is None else np.asarray(spectrum, dtype=float)
    if eig.size != n or np.any(eig <= 0):
        raise ParameterError("spectrum must have n positive entries")
    V = _orthogonal(rng, n)
    x_star = rng.standard_normal(n)
    data = {"Q": (V * eig) @ V.T, "eigenvalues": eig, "eigenvectors": V, "x_star": x_star}
    return _build_quadratic(data, {"n": n, "mu": mu, "L": L, "seed": seed})


def _build_quadratic(data, params):
    Q, xs, eig = data["Q"], data["x_star"], data["eigenvalues"]
    Q = 0.5 * (Q + Q.T)

    def grad(x):
        return Q @ (x - xs)

    def f(x):
        e = x - xs
        return 0.5 * float(e @ Q @ e)

    op = gradient_operator(grad, lipschitz=float(eig.max()), known_zero=xs,
                           strong_convexity=float(eig.min()), name="quadratic_gradient")
    return ProblemInstance("quadratic", op, xs, "strongly convex quadratic, gradient operator",
                           f, 0.0, params, data)


# ---------------------------------------------------------------------------
# Affine strongly monotone operator
# ---------------------------------------------------------------------------

def make_affine_monotone(n, rho, sigma, seed=0) -> ProblemInstance:
    """``U(x) = (rho I + S)(x - x*)`` with ``S`` skew-symmetric, ``||S||_2 = sigma``.

    ``rho I + S`` is normal, so ``||rho I + S||_2 = sqrt(rho^2 + sigma^2)``; the
    stored ``L_u`` is the power-iteration estimate inflated by 1% and capped at
    that exact value. ``U`` is cocoercive with ``omega = rho/(rho^2 + sigma^2)``.
    """
    if not rho > 0 or sigma < 0:
        raise ParameterError("need rho > 0 and sigma >= 0")
    rng = np.random.default_rng(seed)
    S = _skew(rng, int(n), sigma)
    x_star = rng.standard_normal(int(n))
    data = {"M": rho * np.eye(int(n)) + S, "x_star": x_star}
    return _build_affine(data, {"n": int(n), "rho": rho, "sigma": sigma, "seed": seed})


def _affine_constants(M):
    n = M.shape[0]
    rho = float(np.trace(M)) / n
    sigma = float(np.linalg.norm(M - rho * np.eye(n), 2))
    exact = math.hypot(rho, sigma)
    L = min(POWER_INFLATE * operator_norm(M), exact)
    return rho, sigma, L


def _build_affine(data, params):
    M, xs = data["M"], data["x_star"]
    rho, sigma, L = _affine_constants(M)
    op = linear_operator(M, xs, lipschitz=L, cocoercivity=rho / (rho ** 2 + sigma ** 2),
                         strong_monotonicity=rho, cocoercive=True, name="affine_monotone")
    return ProblemInstance("affine_monotone", op, xs, "affine strongly monotone operator",
                           None, None, params, data)


# ---------------------------------------------------------------------------
# Variational inequality on a box
# ---------------------------------------------------------------------------

def make_vi_box(n, rho, sigma, box=(-1.0, 1.0), seed=0, nu=None) -> ProblemInstance:
    """Projected residual ``x - P_box(x - nu V x)`` of an affine strongly monotone ``V``.

    ``x*`` is drawn in the middle half of the box, so it is interior and a zero
    of the residual. ``nu`` defaults to ``2 ell / M^2``.
    """
    lo, hi = float(box[0]), float(box[1])
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ParameterError("box must satisfy finite lo < hi")
    if not rho > 0 or sigma < 0:
        raise ParameterError("need rho > 0 and sigma >= 0")
    rng = np.random.default_rng(seed)
    S = _skew(rng, int(n), sigma)
    x_star = lo + (hi - lo) * rng.uniform(0.25, 0.75, size=int(n))
    data = {"M": rho * np.eye(int(n)) + S, "x_star": x_star, "lo": lo, "hi": hi,
            "nu": nu}
    return _build_vi_box(data, {"n": int(n), "rho": rho, "sigma": sigma, "box": [lo, hi],
                                "seed": seed, "nu": nu})


def _build_vi_box(data, params):
    M, xs = data["M"], data["x_star"]
    rho, sigma, L = _affine_constants(M)
    V = linear_operator(M, xs, lipschitz=L, strong_monotonicity=rho, name="affine_field")
    nu = data.get("nu")
    nu = 2.0 * rho / L ** 2 if nu is None else float(nu)
    data["nu"] = nu
    op = vi_forward(V, Box(data["lo"], data["hi"]), nu, known_zero=xs)
    return ProblemInstance("vi_box", op, xs, "box-constrained VI with affine strongly monotone field",
                           None, None, params, data)


# ---------------------------------------------------------------------------
# Three-operator splitting: lasso with an inactive box
# ---------------------------------------------------------------------------

def _soft(z, thr):
    return np.sign(z) * np.maximum(np.abs(z) - thr, 0.0)


def reference_lasso(K, b, lam, tol=1e-12, max_iter=200_000):
    """Proximal-gradient (ISTA) solution; residual ``||z - prox(z - grad/L)||``."""
    L = float(np.linalg.norm(K, 2)) ** 2
    if L == 0:
        return np.zeros(K.shape[1]), 0
    z = np.zeros(K.shape[1])
    step = 1.0 / L
    for k in range(max_iter):
        z_new = _soft(z - step * (K.T @ (K @ z - b)), step * lam)
        if np.linalg.norm(z_new - z) <= tol:
            return z_new, k + 1
        z = z_new
    raise GenerationError(f"reference proximal-gradient loop did not reach {tol} in {max_iter} steps")


def make_splitting_lasso(n, m, lam_reg, seed=0, zero_rhs=False, sparsity=0.3) -> ProblemInstance:
    """``0 in grad(1/2||Kz - b||^2) + lam d||z||_1 + N_box(z)`` as a Davis-Yin residual.

    The box ``[-R, R]^n`` uses ``R = 10 max(||x_ref||, 1)`` so it never binds;
    ``gamma = omega_A = 1/||K||_2^2``.
    """
    n, m = int(n), int(m)
    if n < 1 or m < 1 or lam_reg < 0:
        raise ParameterError("need n, m >= 1 and lam_reg >= 0")
    rng = np.random.default_rng(seed)
    K = rng.standard_normal((m, n)) / math.sqrt(m)
    x_true = rng.standard_normal(n) * (rng.uniform(size=n) < sparsity)
    b = np.zeros(m) if zero_rhs else K @ x_true + 0.01 * rng.standard_normal(m)
    x_ref, iters = reference_lasso(K, b, lam_reg)
    data = {"K": K, "b": b, "lam": float(lam_reg), "x_star": x_ref,
            "R": 10.0 * max(float(np.linalg.norm(x_ref)), 1.0), "reference_iterations": iters}
    return _build_lasso(data, {"n": n, "m": m, "lam_reg": lam_reg, "seed": seed,
                               "zero_rhs": zero_rhs})


def _build_lasso(data, params):
    K, b, lam, xs, R = data["K"], data["b"], float(data["lam"]), data["x_star"], float(data["R"])
    L_A = float(np.linalg.norm(K, 2)) ** 2
    A = gradient_operator(lambda z: K.T @ (K @ z - b), lipschitz=L_A, name="least_squares")
    gamma = 1.0 / L_A
    B, C = L1Norm(lam), NormalCone(Box(-R, R))
    # with C inactive, J_C is the identity near x_ref, so x_ref is also the fixed point
    op = davis_yin(A, B, C, gamma, known_zero=xs)

    def f(z):
        r = K @ z - b
        return 0.5 * float(r @ r) + lam * float(np.abs(z).sum())

    inst = ProblemInstance("splitting_lasso", op, xs, "lasso with inactive box, Davis-Yin residual",
                           f, f(xs), params, data)
    inst.data["gamma"] = gamma
    return inst


# ---------------------------------------------------------------------------
# Tseng forward-backward-forward on a skew field
# ---------------------------------------------------------------------------

def make_fbf_instance(n, sigma, seed=0) -> ProblemInstance:
    """Tseng residual of a pure skew field ``S(x - x*)`` plus the normal cone of a box.

    ``x*`` lies strictly inside ``[-R, R]^n`` with ``R = 1 + 2||x*||_inf``;
    ``gamma = 1/(2 sigma)``.
    """
    n = int(n)
    if not sigma > 0 or n < 2:
        raise ParameterError("need sigma > 0 and n >= 2 (a nonzero skew map)")
    rng = np.random.default_rng(seed)
    S = _skew(rng, n, sigma)
    x_star = rng.standard_normal(n)
    data = {"S": S, "x_star": x_star, "R": 1.0 + 2.0 * float(np.abs(x_star).max())}
    return _build_fbf(data, {"n": n, "sigma": sigma, "seed": seed})


def _build_fbf(data, params):
    S, xs, R = data["S"], data["x_star"], float(data["R"])
    L = float(np.linalg.norm(S, 2))
    A = linear_operator(S, xs, lipschitz=L, name="skew")
    gamma = 1.0 / (2.0 * L)
    data["gamma"] = gamma
    op = tseng_fbf(A, NormalCone(Box(-R, R)), gamma, known_zero=xs)
    return ProblemInstance("fbf", op, xs, "skew field on a box, Tseng residual",
                           None, None, params, data)


_BUILDERS = {
    "quadratic": _build_quadratic,
    "affine_monotone": _build_affine,
    "vi_box": _build_vi_box,
    "splitting_lasso": _build_lasso,
    "fbf": _build_fbf,
}

_MAKERS = {
    "quadratic": make_quadratic,
    "affine_monotone": make_affine_monotone,
    "vi_box": make_vi_box,
    "splitting_lasso": make_splitting_lasso,
    "fbf": make_fbf_instance,
}


def make_problem(kind: str, **params) -> ProblemInstance:
    if kind not in _MAKERS:
        raise ParameterError(f"unknown problem kind {kind!r}; expected one of {sorted(_MAKERS)}")
    try:
        return _MAKERS[kind](**params)
    except TypeError as exc:
        raise ParameterError(f"bad parameters for {kind!r}: {exc}") from None

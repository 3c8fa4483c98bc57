"""Operators U on R^n whose zeros the third-order flow looks for.

Everything here is pure: an :class:`OperatorSpec` wraps an evaluation
callable together with the regularity constants it is claimed to satisfy.
Compositions (forward-backward, Davis-Yin, Tseng, projected VI map) are
built from a closed set of resolvent-friendly descriptors so that every
resolvent is exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from .errors import CapabilityError, ParameterError, PreconditionError

#: Seed used by :func:`certify_property` when none is given.
DEFAULT_CERTIFY_SEED = 20240523
#: Half-width of the sampling box used by :func:`certify_property`.
DEFAULT_CERTIFY_BOX = 10.0

ZERO_TOL = 1e-10


def as_vector(x) -> np.ndarray:
    v = np.array(x, dtype=float).reshape(-1)
    if v.size == 0:
        raise ParameterError("vectors must have dimension >= 1")
    if not np.all(np.isfinite(v)):
        raise ParameterError("vector has non-finite entries")
    return v


# ---------------------------------------------------------------------------
# Regions and projections
# ---------------------------------------------------------------------------

def _bound_array(b, default):
    if b is None:
        return np.asarray(default, dtype=float)
    arr = np.array(b, dtype=object)
    arr = np.where(arr == None, default, arr)  # noqa: E711  (json null = unbounded)
    return arr.astype(float)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``lo <= x <= hi``; bounds broadcast against the point."""

    lo: Union[float, np.ndarray] = -np.inf
    hi: Union[float, np.ndarray] = np.inf

    def __post_init__(self):
        lo = _bound_array(self.lo, -np.inf)
        hi = _bound_array(self.hi, np.inf)
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi):
            raise ParameterError("box requires lo <= hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def project(self, x):
        return np.clip(x, self.lo, self.hi)

    def contains(self, x, tol=0.0):
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def to_dict(self):
        enc = lambda a: [None if not np.isfinite(v) else float(v) for v in np.atleast_1d(a)]
        return {"type": "box", "lo": enc(self.lo), "hi": enc(self.hi)}


@dataclass(frozen=True)
class Ball:
    radius: float
    center: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ParameterError("ball radius must be positive")
        if self.center is not None:
            object.__setattr__(self, "center", as_vector(self.center))

    def project(self, x):
        c = 0.0 if self.center is None else self.center
        d = x - c
        nd = np.linalg.norm(d)
        if nd <= self.radius:
            return np.array(x, dtype=float)
        return c + d * (self.radius / nd)

    def contains(self, x, tol=0.0):
        c = 0.0 if self.center is None else self.center
        return bool(np.linalg.norm(x - c) <= self.radius + tol)

    def to_dict(self):
        return {"type": "ball", "radius": float(self.radius),
                "center": None if self.center is None else self.center.tolist()}


@dataclass(frozen=True)
class Halfspace:
    """``{x : <normal, x> <= offset}``."""

    normal: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        a = as_vector(self.normal)
        if not np.any(a):
            raise ParameterError("halfspace normal must be nonzero")
        object.__setattr__(self, "normal", a)

    def project(self, x):
        excess = self.normal @ x - self.offset
        if excess <= 0:
            return np.array(x, dtype=float)
        return x - (excess / (self.normal @ self.normal)) * self.normal

    def contains(self, x, tol=0.0):
        return bool(self.normal @ x <= self.offset + tol)

    def to_dict(self):
        return {"type": "halfspace", "normal": self.normal.tolist(), "offset": float(self.offset)}


@dataclass(frozen=True)
class Simplex:
    """``{x >= 0, sum(x) = total}``."""

    total: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.total) and self.total > 0):
            raise ParameterError("simplex total must be positive")

    def project(self, x):
        # sort-and-threshold: find tau with sum(max(x - tau, 0)) = total
        u = np.sort(x)[::-1]
        css = np.cumsum(u) - self.total
        k = np.arange(1, x.size + 1)
        rho = np.nonzero(u - css / k > 0)[0][-1]
        tau = css[rho] / (rho + 1.0)
        return np.maximum(x - tau, 0.0)

    def contains(self, x, tol=0.0):
        return bool(np.all(x >= -tol) and abs(x.sum() - self.total) <= tol)

    def to_dict(self):
        return {"type": "simplex", "total": float(self.total)}


@dataclass(frozen=True)
class Whole:
    """The whole space; projection is the identity."""

    def project(self, x):
        return np.array(x, dtype=float)

    def contains(self, x, tol=0.0):
        return True

    def to_dict(self):
        return {"type": "whole"}


Region = Union[Box, Ball, Halfspace, Simplex, Whole]


def projection(region: Region, point) -> np.ndarray:
    """Euclidean projection of ``point`` onto ``region``."""
    if not hasattr(region, "project"):
        raise ParameterError(f"not a region: {region!r}")
    return region.project(as_vector(point))


def region_from_dict(d: dict) -> Region:
    kind = d.get("type")
    try:
        if kind == "box":
            return Box(d.get("lo"), d.get("hi"))
        if kind == "ball":
            return Ball(float(d["radius"]), d.get("center"))
        if kind == "halfspace":
            return Halfspace(d["normal"], float(d.get("offset", 0.0)))
        if kind == "simplex":
            return Simplex(float(d.get("total", 1.0)))
        if kind == "whole":
            return Whole()
    except KeyError as exc:
        raise ParameterError(f"region {kind!r} missing field {exc}") from None
    raise ParameterError(f"unknown region type {kind!r}")


# ---------------------------------------------------------------------------
# Resolvent-friendly maximal monotone descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZeroMap:
    def to_dict(self):
        return {"type": "zero"}


@dataclass(frozen=True)
class QuadraticGradient:
    """Gradient ``z -> Q z - b`` of ``1/2 z'Qz - b'z`` with ``Q`` symmetric PSD.

    ``Q`` may be a scalar (meaning ``Q * I``); ``b`` defaults to zero.
    """

    Q: Union[float, np.ndarray] = 1.0
    b: Optional[np.ndarray] = None

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.ndim == 0:
            if Q < 0:
                raise ParameterError("Q must be positive semidefinite")
        else:
            if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or not np.allclose(Q, Q.T):
                raise ParameterError("Q must be a symmetric matrix")
            if np.linalg.eigvalsh(Q).min() < -1e-12 * max(1.0, np.abs(Q).max()):
                raise ParameterError("Q must be positive semidefinite")
        object.__setattr__(self, "Q", Q)
        if self.b is not None:
            object.__setattr__(self, "b", as_vector(self.b))

    def apply(self, z):
        out = self.Q * z if self.Q.ndim == 0 else self.Q @ z
        return out if self.b is None else out - self.b

    def to_dict(self):
        return {"type": "quadratic", "Q": self.Q.tolist(),
                "b": None if self.b is None else self.b.tolist()}


@dataclass(frozen=True)
class L1Norm:
    """Subdifferential of ``weight * ||z||_1``."""

    weight: float = 1.0

    def __post_init__(self):
        if not self.weight >= 0:
            raise ParameterError("l1 weight must be nonnegative")

    def to_dict(self):
        return {"type": "l1", "weight": float(self.weight)}


@dataclass(frozen=True)
class NormalCone:
    region: Region

    def to_dict(self):
        return {"type": "normal_cone", "region": self.region.to_dict()}


ProxDescriptor = Union[ZeroMap, QuadraticGradient, L1Norm, NormalCone]


def identity_map() -> QuadraticGradient:
    return QuadraticGradient(1.0)


def resolvent(B: ProxDescriptor, gamma: float, point) -> np.ndarray:
    """Solve ``z + gamma * B(z) ∋ point`` for the built-in descriptors."""
    if not gamma > 0:
        raise ParameterError("resolvent step gamma must be positive")
    p = as_vector(point)
    if isinstance(B, ZeroMap):
        return p
    if isinstance(B, QuadraticGradient):
        rhs = p if B.b is None else p + gamma * B.b
        if B.Q.ndim == 0:
            return rhs / (1.0 + gamma * float(B.Q))
        return np.linalg.solve(np.eye(p.size) + gamma * B.Q, rhs)
    if isinstance(B, L1Norm):
        thr = gamma * B.weight
        return np.sign(p) * np.maximum(np.abs(p) - thr, 0.0)
    if isinstance(B, NormalCone):
        return B.region.project(p)
    raise CapabilityError(f"no closed-form resolvent for {type(B).__name__}")


def prox_from_dict(d: dict) -> ProxDescriptor:
    kind = d.get("type")
    if kind == "zero":
        return ZeroMap()
    if kind == "identity":
        return identity_map()
    if kind == "quadratic":
        return QuadraticGradient(d.get("Q", 1.0), d.get("b"))
    if kind == "l1":
        return L1Norm(float(d.get("weight", 1.0)))
    if kind == "normal_cone":
        return NormalCone(region_from_dict(d["region"]))
    raise CapabilityError(f"unsupported resolvent descriptor {kind!r}")


# ---------------------------------------------------------------------------
# OperatorSpec and constructions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatorSpec:
    """An evaluatable map ``R^n -> R^n`` plus declared regularity metadata.

    Attributes
    ----------
    fn : callable
        The map itself.
    lipschitz, cocoercivity, strong_monotonicity : float or None
        ``L_u``, ``omega_u`` and ``rho``; ``None`` means unknown. ``cocoercivity``
        is the quasi-cocoercivity modulus unless ``cocoercive`` is True.
    known_zero : ndarray or None
        A point where ``fn`` vanishes (checked on construction).
    cocoercive : bool
        Whether ``cocoercivity`` holds for all pairs, not only against zeros.
    kappa : float or None
        Constant used by the exponential-rate conditions when it is not simply
        ``rho / L_u**2`` (the projected VI operator).
    """

    fn: Callable[[np.ndarray], np.ndarray]
    lipschitz: Optional[float] = None
    cocoercivity: Optional[float] = None
    strong_monotonicity: Optional[float] = None
    known_zero: Optional[np.ndarray] = None
    cocoercive: bool = False
    kappa: Optional[float] = None
    name: str = "operator"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for attr in ("lipschitz", "cocoercivity", "strong_monotonicity", "kappa"):
            val = getattr(self, attr)
            if val is not None and not (np.isfinite(val) and val > 0):
                raise ParameterError(f"{attr} must be positive when given, got {val}")
        if self.known_zero is not None:
            xs = as_vector(self.known_zero)
            object.__setattr__(self, "known_zero", xs)
            r = np.linalg.norm(self.fn(xs))
            if not r <= ZERO_TOL * (1.0 + np.linalg.norm(xs)):
                raise ParameterError(f"{self.name}: |U(x_*)| = {r:.3e} at declared zero")
        if self.cocoercive and self.lipschitz is not None and self.cocoercivity is not None:
            if self.lipschitz > (1.0 / self.cocoercivity) * (1 + 1e-12):
                raise ParameterError("a cocoercive operator must have L_u <= 1/omega_u")

    def __call__(self, x) -> np.ndarray:
        return self.fn(np.asarray(x, dtype=float))

    def with_zero(self, x_star) -> "OperatorSpec":
        return replace(self, known_zero=as_vector(x_star))


def _inherit_zero(fn, inner: OperatorSpec, known_zero):
    if known_zero is not None or inner.known_zero is None:
        return known_zero
    z = inner.known_zero
    if np.linalg.norm(fn(z)) <= ZERO_TOL * (1.0 + np.linalg.norm(z)):
        return z
    return None


def averaged_to_cocoercive(alpha: float) -> float:
    """``I - T`` is ``1/(2 alpha)``-cocoercive when ``T`` is alpha-averaged."""
    if not 0 < alpha < 1:
        raise ParameterError("averagedness must lie in (0, 1)")
    return 1.0 / (2.0 * alpha)


def linear_operator(M, shift=None, **meta) -> OperatorSpec:
    """``x -> M (x - shift)``; metadata passed through unchanged."""
    M = np.atleast_2d(np.array(M, dtype=float))
    c = np.zeros(M.shape[1]) if shift is None else as_vector(shift)
    meta.setdefault("known_zero", c)
    meta.setdefault("name", "linear")
    return OperatorSpec(lambda x: M @ (x - c), meta={"matrix": M, "shift": c}, **meta)


def gradient_operator(grad, lipschitz=None, known_zero=None, strong_convexity=None,
                      name="gradient") -> OperatorSpec:
    """``U = grad f`` for convex ``f``; ``omega_u = 1/L`` by Baillon-Haddad."""
    omega = None if lipschitz is None else 1.0 / lipschitz
    return OperatorSpec(grad, lipschitz=lipschitz, cocoercivity=omega,
                        strong_monotonicity=strong_convexity, known_zero=known_zero,
                        cocoercive=omega is not None, name=name)


def _fb_averagedness(omega_a, gamma):
    return 2.0 * omega_a / (4.0 * omega_a - gamma)


def forward_backward(A: OperatorSpec, B: ProxDescriptor, gamma: float,
                     known_zero=None) -> OperatorSpec:
    """``U(x) = x - J_{gamma B}(x - gamma A(x))``."""
    if not gamma > 0:
        raise ParameterError("gamma must be positive")

    def fn(x):
        return x - resolvent(B, gamma, x - gamma * A(x))

    omega = lip = None
    if A.cocoercive and A.cocoercivity is not None and gamma < 2 * A.cocoercivity:
        omega = averaged_to_cocoercive(_fb_averagedness(A.cocoercivity, gamma))
        lip = 1.0 / omega
    return OperatorSpec(fn, lipschitz=lip, cocoercivity=omega, known_zero=_inherit_zero(fn, A, known_zero),
                        cocoercive=omega is not None, name="forward_backward")


def davis_yin(A: OperatorSpec, B: ProxDescriptor, C: ProxDescriptor, gamma: float,
              known_zero=None) -> OperatorSpec:
    """``U = I - T`` with ``T = J_B(2 J_C - I - gamma A J_C) + I - J_C``.

    ``A`` must carry a cocoercivity modulus ``omega_A`` and ``gamma`` must lie in
    ``(0, 2 omega_A)``. ``U`` is then ``1/(2 alpha)``-cocoercive with
    ``alpha = 2 omega_A / (4 omega_A - gamma)``.
    """
    omega_a = A.cocoercivity
    if omega_a is None or not A.cocoercive:
        raise ParameterError("Davis-Yin requires a cocoercive A with known modulus")
    if not 0 < gamma < 2 * omega_a:
        raise ParameterError(f"gamma must lie in (0, {2 * omega_a}), got {gamma}")

    def fn(x):
        xc = resolvent(C, gamma, x)
        xb = resolvent(B, gamma, 2.0 * xc - x - gamma * A(xc))
        return xc - xb

    alpha = _fb_averagedness(omega_a, gamma)
    omega = averaged_to_cocoercive(alpha)
    return OperatorSpec(fn, lipschitz=1.0 / omega, cocoercivity=omega, known_zero=_inherit_zero(fn, A, known_zero),
                        cocoercive=True, name="davis_yin",
                        meta={"alpha": alpha, "gamma": gamma})


def davis_yin_solution(x, C: ProxDescriptor, gamma: float) -> np.ndarray:
    """Map a zero of the Davis-Yin residual to a solution of the inclusion."""
    return resolvent(C, gamma, x)


def tseng_modulus(gamma: float, L: float) -> float:
    return (1.0 - gamma * L) / (1.0 + gamma * L) ** 2


def tseng_fbf(A: OperatorSpec, B: ProxDescriptor, gamma: float,
              known_zero=None) -> OperatorSpec:
    """Forward-backward-forward residual for monotone, L-Lipschitz ``A``.

    Only quasi-cocoercive, with modulus ``(1 - gamma L)/(1 + gamma L)^2``.
    """
    L = A.lipschitz
    if L is None:
        raise ParameterError("Tseng FBF requires A.lipschitz")
    if not 0 < gamma < 1.0 / L:
        raise ParameterError(f"gamma must lie in (0, 1/L) = (0, {1.0 / L}), got {gamma}")

    def fn(x):
        ax = A(x)
        w = resolvent(B, gamma, x - gamma * ax)
        return x - w - gamma * (ax - A(w))

    gl = gamma * L
    return OperatorSpec(fn, lipschitz=2.0 + 3.0 * gl + gl * gl,
                        cocoercivity=tseng_modulus(gamma, L), known_zero=_inherit_zero(fn, A, known_zero),
                        cocoercive=False, name="tseng_fbf", meta={"gamma": gamma})


def vi_constants(ell: float, M: float, nu: float) -> dict:
    k1 = 1.0 - nu * M * M / (4.0 * ell)
    k2 = nu * ell / (1.0 + nu * ell + nu * M)
    return {"kappa1": k1, "kappa2": k2, "rho": k1 * k2 * k2, "kappa": k1 * k2 * k2 / (M * M)}


def vi_forward(V: OperatorSpec, region: Region, nu: float, known_zero=None) -> OperatorSpec:
    """``U = I - P_region(I - nu V)`` for strongly pseudomonotone, M-Lipschitz ``V``.

    ``V.strong_monotonicity`` is read as the pseudomonotonicity modulus ``ell``.
    """
    ell, M = V.strong_monotonicity, V.lipschitz
    if ell is None or M is None:
        raise ParameterError("vi_forward needs V.strong_monotonicity and V.lipschitz")
    if not 0 < nu < 4.0 * ell / (M * M):
        raise ParameterError(f"nu must lie in (0, 4 ell/M^2) = (0, {4 * ell / M**2}), got {nu}")
    c = vi_constants(ell, M, nu)

    def fn(x):
        return x - region.project(x - nu * V(x))

    return OperatorSpec(fn, lipschitz=2.0 + nu * M, cocoercivity=c["kappa1"],
                        strong_monotonicity=c["rho"], kappa=c["kappa"], known_zero=_inherit_zero(fn, V, known_zero),
                        cocoercive=False, name="vi_forward", meta=dict(c, nu=nu))


def fixed_point_residual(F, contraction=None, known_zero=None) -> OperatorSpec:
    """``U = I - F``; for a ``c``-contraction, ``rho = 1 - c`` and ``L_u = 1 + c``."""
    rho = lip = omega = None
    if contraction is not None:
        if not 0 <= contraction < 1:
            raise ParameterError("contraction factor must lie in [0, 1)")
        rho, lip = 1.0 - contraction, 1.0 + contraction
        omega = rho / lip ** 2
    return OperatorSpec(lambda x: x - F(x), lipschitz=lip, cocoercivity=omega,
                        strong_monotonicity=rho, known_zero=known_zero,
                        cocoercive=omega is not None, name="fixed_point")


# ---------------------------------------------------------------------------
# Empirical falsification of regularity constants
# ---------------------------------------------------------------------------

PROPERTIES = ("lipschitz", "cocoercive", "quasi_cocoercive", "strongly_monotone_wrt_zero")


@dataclass
class Certificate:
    property: str
    constant: float
    max_violation: float
    witness: tuple
    n_samples: int
    seed: int

    def violated(self, tol: float = 1e-9) -> bool:
        return self.max_violation > tol

    def to_dict(self):
        return {"property": self.property, "constant": self.constant,
                "max_violation": self.max_violation, "n_samples": self.n_samples,
                "seed": self.seed, "witness": [np.asarray(w).tolist() for w in self.witness]}


def _perturbed(rng, center, box, count):
    scales = box * 10.0 ** rng.uniform(-4.0, 0.0, size=(count, 1))
    return center + scales * rng.standard_normal((count, center.shape[-1]))


def certify_property(op: OperatorSpec, property: str, constant: float, dim: int,
                     n_samples: int = 1000, seed: int = DEFAULT_CERTIFY_SEED,
                     box: float = DEFAULT_CERTIFY_BOX) -> Certificate:
    """Search for a violation of a claimed regularity inequality.

    Half the samples are uniform in ``[-box, box]^dim``; the other half are
    perturbations at random scales (around the first point for pairwise
    properties, around the known zero otherwise), which is where linear-looking
    maps tend to hide their worst ratios. A nonpositive ``max_violation``
    only means nothing was found.
    """
    if property not in PROPERTIES:
        raise ParameterError(f"unknown property {property!r}")
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-box, box, size=(n_samples, dim))
    worst, witness = -np.inf, ()

    if property in ("lipschitz", "cocoercive"):
        half = n_samples // 2
        ys = np.vstack([rng.uniform(-box, box, size=(half, dim)),
                        _perturbed(rng, xs[half:], box, n_samples - half)])
        for x, y in zip(xs, ys):
            du, dx = op(x) - op(y), x - y
            if property == "lipschitz":
                v = np.linalg.norm(du) - constant * np.linalg.norm(dx)
            else:
                v = constant * (du @ du) - du @ dx
            if v > worst:
                worst, witness = float(v), (x, y)
    else:
        if op.known_zero is None:
            raise PreconditionError(f"{property} needs op.known_zero")
        zs = op.known_zero
        half = n_samples // 2
        xs[half:] = _perturbed(rng, np.broadcast_to(zs, (n_samples - half, dim)), box,
                               n_samples - half)
        for x in xs:
            u, e = op(x), x - zs
            if property == "quasi_cocoercive":
                v = constant * (u @ u) - u @ e
            else:
                v = constant * (e @ e) - u @ e
            if v > worst:
                worst, witness = float(v), (x,)
    return Certificate(property, float(constant), worst, witness, n_samples, seed)


# ---------------------------------------------------------------------------
# JSON descriptors
# ---------------------------------------------------------------------------

def operator_from_dict(d: dict) -> OperatorSpec:
    """Build an operator from a tagged-union JSON descriptor (key ``op``)."""
    kind = d.get("op")
    zero = d.get("known_zero")
    meta = {k: d[k] for k in ("lipschitz", "cocoercivity", "strong_monotonicity") if k in d}
    if kind == "linear":
        return linear_operator(d["matrix"], d.get("shift"), cocoercive=d.get("cocoercive", False),
                               **meta)
    if kind == "identity":
        n = int(d["dim"])
        return linear_operator(np.eye(n), d.get("shift"), lipschitz=1.0, cocoercivity=1.0,
                               strong_monotonicity=1.0, cocoercive=True)
    if kind == "zero":
        n = int(d["dim"])
        return OperatorSpec(lambda x: np.zeros_like(x), known_zero=np.zeros(n), name="zero")
    if kind == "gradient_quadratic":
        Q = np.atleast_2d(np.array(d["Q"], dtype=float))
        c = np.zeros(Q.shape[0]) if d.get("center") is None else as_vector(d["center"])
        ev = np.linalg.eigvalsh(Q)
        return gradient_operator(lambda x: Q @ (x - c), lipschitz=float(ev.max()), known_zero=c,
                                 strong_convexity=float(ev.min()) if ev.min() > 0 else None)
    if kind == "forward_backward":
        return forward_backward(operator_from_dict(d["A"]), prox_from_dict(d["B"]),
                                float(d["gamma"]), known_zero=zero)
    if kind == "davis_yin":
        return davis_yin(operator_from_dict(d["A"]), prox_from_dict(d["B"]),
                         prox_from_dict(d["C"]), float(d["gamma"]), known_zero=zero)
    if kind == "tseng_fbf":
        return tseng_fbf(operator_from_dict(d["A"]), prox_from_dict(d["B"]), float(d["gamma"]),
                         known_zero=zero)
    if kind == "vi_forward":
        return vi_forward(operator_from_dict(d["V"]), region_from_dict(d["region"]),
                          float(d["nu"]), known_zero=zero)
    if kind == "fixed_point":
        F = np.atleast_2d(np.array(d["matrix"], dtype=float))
        return fixed_point_residual(lambda x: F @ x, d.get("contraction"), known_zero=zero)
    raise ParameterError(f"unknown operator descriptor {kind!r}")

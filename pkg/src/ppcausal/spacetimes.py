"""Metric families and causal kinematics for plane-fronted wave models.

Three families of Lorentzian models live here:

* the full wave model on R^2 x R^n with metric
  ``2 deta (dxi + x^T A x deta) + |dx|^2`` parametrized by a symmetric
  matrix ``A`` (:class:`CWModel`),
* the reduced 3-dimensional model on coordinates (xi, eta, tau) with
  metric ``2 deta (dxi - f(tau) deta) + dtau^2`` parametrized by a wave
  profile ``f`` (:class:`ReducedModel`),
* profiles for the 2-d counterexample family ``f = tau^p`` used by the
  null-escape machinery in :mod:`ppcausal.geodesics`.

Besides the metric itself the module provides the causal classification of
tangent vectors, the (c1, c2) quadratic-domination constants derived from
``A``, the norm projection that maps the full model onto the reduced one,
the conformal rescaling ``sigma`` and the (xi, eta)-translations.

Sign bookkeeping, recorded once for the whole package: the full model's
metric carries ``+ x^T A x`` where the reduced model carries ``- f(tau)``.
Choosing ``A = [[-a]]`` with a > 0 therefore corresponds to a reduced
profile ``f(tau) = a tau^2`` (no constant term), and the domination
constants swap roles across the projection: a full model with derived
constants (c1, c2) is dominated by the reduced model whose profile is
``c1^2 + c2^2 rho^2``, i.e. the quadratic profile with coefficients
(c2, c1).  :func:`dominating_reduced_model` implements the swap.
"""

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Union

import numpy as np
from scipy.interpolate import PchipInterpolator

# |g(v,v)| <= NULL_TOL_COEFF * (1 + |v|^2) is classified as null; keeps the
# classification stable at cone boundaries.
NULL_TOL_COEFF = 1e-12

# Default floor for the derived constants; both c1 and c2 appear in
# denominators downstream (time-function chart, arcsinh rate bound) and so
# must stay strictly positive.
DEFAULT_FLOOR = 1e-3

TIMELIKE = "timelike"
NULL = "null"
SPACELIKE = "spacelike"
FUTURE = "future"
PAST = "past"
NONE = "none"


class Point3(NamedTuple):
    xi: float
    eta: float
    tau: float


class Tangent3(NamedTuple):
    dxi: float
    deta: float
    dtau: float


class PointN(NamedTuple):
    xi: float
    eta: float
    x: np.ndarray


class TangentN(NamedTuple):
    dxi: float
    deta: float
    dx: np.ndarray


class CausalClass(NamedTuple):
    kind: str          # timelike | null | spacelike
    orientation: str   # future | past | none


# ---------------------------------------------------------------------------
# wave profiles


@dataclass(frozen=True)
class QuadraticProfile:
    """f(tau) = c1^2 tau^2 + c2^2, the dominating profile."""

    c1: float
    c2: float

    def __call__(self, tau):
        return self.c1 * self.c1 * np.square(tau) + self.c2 * self.c2

    def deriv(self, tau):
        return 2.0 * self.c1 * self.c1 * np.asarray(tau, dtype=float)


@dataclass(frozen=True)
class PowerProfile:
    """f(tau) = tau^p; super-quadratic exponents give the escape family."""

    p: float

    def __call__(self, tau):
        return np.power(np.asarray(tau, dtype=float), self.p)

    def deriv(self, tau):
        t = np.asarray(tau, dtype=float)
        return self.p * np.power(t, self.p - 1.0)


class TabulatedProfile:
    """Profile given by table nodes, interpolated with a monotone cubic.

    The interpolant is C^1, so its analytic derivative serves as f' for the
    geodesic equations.
    """

    def __init__(self, taus, values):
        taus = np.asarray(taus, dtype=float)
        values = np.asarray(values, dtype=float)
        if taus.ndim != 1 or taus.shape != values.shape or taus.size < 2:
            raise ValueError("need matching 1-d tables with at least two nodes")
        if not (np.all(np.isfinite(taus)) and np.all(np.isfinite(values))):
            raise ValueError("table nodes must be finite")
        order = np.argsort(taus)
        self.taus = taus[order]
        self.values = values[order]
        self._interp = PchipInterpolator(self.taus, self.values, extrapolate=True)
        self._dinterp = self._interp.derivative()

    def __call__(self, tau):
        out = self._interp(tau)
        return float(out) if np.ndim(tau) == 0 else out

    def deriv(self, tau):
        out = self._dinterp(tau)
        return float(out) if np.ndim(tau) == 0 else out


Profile = Union[QuadraticProfile, PowerProfile, TabulatedProfile]


# ---------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class SymMatrix:
    """Dense symmetric matrix; accepts row-major nested lists."""

    entries: np.ndarray

    def __init__(self, entries):
        arr = np.array(entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise ValueError("entries must form a square matrix")
        if not np.all(np.isfinite(arr)):
            raise ValueError("entries must be finite")
        if not np.array_equal(arr, arr.T):
            raise ValueError("matrix must be exactly symmetric")
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def quad_form(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.entries @ x)


@dataclass(frozen=True)
class ReducedModel:
    """3-d model 2 deta (dxi - f(tau) deta) + dtau^2 with bookkeeping constants.

    c1 and c2 are the quadratic-domination constants |f| <= c1^2 tau^2 + c2^2;
    for the quadratic profile they coincide with the profile coefficients.
    """

    profile: Profile
    c1: float
    c2: float

    def __post_init__(self):
        if not (self.c1 > 0.0 and self.c2 > 0.0):
            raise ValueError("c1 and c2 must be strictly positive")

    @classmethod
    def quadratic(cls, c1: float, c2: float) -> "ReducedModel":
        return cls(QuadraticProfile(c1, c2), c1, c2)

    @classmethod
    def power(cls, p: float, c1: float = 1.0, c2: float = 1.0) -> "ReducedModel":
        return cls(PowerProfile(p), c1, c2)

    @classmethod
    def from_table(cls, taus, values, c1: float, c2: float) -> "ReducedModel":
        profile = TabulatedProfile(taus, values)
        bound = c1 * c1 * np.square(profile.taus) + c2 * c2
        if np.any(np.abs(profile.values) > bound):
            raise ValueError("table violates |f(tau)| <= c1^2 tau^2 + c2^2 at a node")
        return cls(profile, c1, c2)

    @property
    def profile_kind(self) -> str:
        if isinstance(self.profile, QuadraticProfile):
            return "quadratic_f0"
        if isinstance(self.profile, PowerProfile):
            return "power"
        return "user_table"

    def f(self, tau):
        return self.profile(tau)

    def f0(self, tau):
        """The dominating quadratic c1^2 tau^2 + c2^2 (equals f for quadratic_f0)."""
        return self.c1 * self.c1 * np.square(tau) + self.c2 * self.c2


@dataclass(frozen=True)
class CWModel:
    """Full wave model on R^2 x R^n parametrized by a symmetric matrix."""

    A: SymMatrix
    c1: float = field(default=DEFAULT_FLOOR)
    c2: float = field(default=DEFAULT_FLOOR)

    @classmethod
    def from_matrix(cls, A, floor: float = DEFAULT_FLOOR) -> "CWModel":
        if not isinstance(A, SymMatrix):
            A = SymMatrix(A)
        c1, c2 = derive_bounds_from_A(A, floor)
        return cls(A, c1, c2)

    @property
    def n(self) -> int:
        return self.A.n


def derive_bounds_from_A(A: SymMatrix, floor: float = DEFAULT_FLOOR):
    """Constants (c1, c2) with |x^T A x| <= c1^2 + c2^2 |x|^2 for all x.

    c2 is the square root of the spectral norm (floored), c1 the floor
    itself; the floor keeps both strictly positive for downstream use in
    denominators.
    """
    if not isinstance(A, SymMatrix):
        A = SymMatrix(A)
    if not floor > 0.0:
        raise ValueError("floor must be positive")
    opnorm = float(np.max(np.abs(np.linalg.eigvalsh(A.entries))))
    c2 = max(np.sqrt(opnorm), floor)
    return floor, c2


def dominating_reduced_model(model: CWModel) -> ReducedModel:
    """Reduced model that dominates `model` under the norm projection.

    The projected bound is |x^T A x| <= c1^2 + c2^2 rho^2, i.e. a quadratic
    profile in rho whose tau^2-coefficient is c2 and constant term c1 -- the
    constants swap slots relative to the reduced convention (see module
    docstring).
    """
    return ReducedModel.quadratic(c1=model.c2, c2=model.c1)


# ---------------------------------------------------------------------------
# metric and causal classification


def _check_finite_3(p, v, w):
    for obj in (p, v, w):
        for comp in obj:
            if not np.isfinite(comp):
                raise ValueError("non-finite component in point or tangent")


def metric_inner(model, p, v, w) -> float:
    """Metric pairing g(v, w) at the event p.

    For the reduced model p, v, w are 3-component (xi, eta, tau) tuples; for
    the full model they are PointN/TangentN with an n-vector transverse part.
    """
    if isinstance(model, ReducedModel):
        if len(p) != 3 or len(v) != 3 or len(w) != 3:
            raise ValueError("reduced model expects 3-component points and tangents")
        _check_finite_3(p, v, w)
        f = float(model.f(p[2]))
        return v[0] * w[1] + v[1] * w[0] - 2.0 * f * v[1] * w[1] + v[2] * w[2]
    if isinstance(model, CWModel):
        xp = np.asarray(p[2], dtype=float)
        vx = np.asarray(v[2], dtype=float)
        wx = np.asarray(w[2], dtype=float)
        if not (xp.shape == vx.shape == wx.shape == (model.n,)):
            raise ValueError("transverse dimension mismatch with model")
        if not (np.isfinite(p[0]) and np.isfinite(p[1]) and np.all(np.isfinite(xp))
                and np.isfinite(v[0]) and np.isfinite(v[1]) and np.all(np.isfinite(vx))
                and np.isfinite(w[0]) and np.isfinite(w[1]) and np.all(np.isfinite(wx))):
            raise ValueError("non-finite component in point or tangent")
        q = model.A.quad_form(xp)
        return v[0] * w[1] + v[1] * w[0] + 2.0 * q * v[1] * w[1] + float(vx @ wx)
    raise TypeError("unsupported model type: %r" % (type(model).__name__,))


def causal_class(model, p, v) -> CausalClass:
    """Classify a tangent vector and orient it in time.

    Orientation rule: a causal vector is future-directed iff deta > 0, or
    deta == 0 and dxi < 0.  For profiles with f > 0 this agrees with the
    usual pairing against the eta coordinate field, and it is the continuous
    limit of the future timelike cones as deta -> 0+; unlike the pairing it
    stays well-defined where f <= 0.
    """
    if isinstance(model, CWModel):
        sq = v[0] * v[0] + v[1] * v[1] + float(np.dot(v[2], v[2]))
    else:
        sq = v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
    if sq == 0.0:
        raise ValueError("cannot classify the zero vector")
    g = metric_inner(model, p, v, v)
    tol = NULL_TOL_COEFF * (1.0 + sq)
    if abs(g) <= tol:
        kind = NULL
    elif g < 0.0:
        kind = TIMELIKE
    else:
        kind = SPACELIKE
    if kind == SPACELIKE:
        return CausalClass(kind, NONE)
    deta = v[1]
    if deta > 0.0:
        orientation = FUTURE
    elif deta < 0.0:
        orientation = PAST
    elif v[0] < 0.0:
        orientation = FUTURE
    else:
        orientation = PAST
    return CausalClass(kind, orientation)


# ---------------------------------------------------------------------------
# coordinate maps


def translate(p: Point3, xi0: float, eta0: float) -> Point3:
    """(xi, eta, tau) -> (xi + xi0, eta + eta0, tau); an isometry for every profile."""
    return Point3(p[0] + xi0, p[1] + eta0, p[2])


def conformal_scale(p: Point3, C: float) -> Point3:
    """The rescaling sigma: (xi, eta, tau) -> (xi / C^2, eta, tau / C), C >= 1."""
    if not C >= 1.0:
        raise ValueError("only enlarging scalings C >= 1 are used")
    return Point3(p[0] / (C * C), p[1], p[2] / C)


def scaled_constants(c1: float, c2: float, C: float):
    """Domination constants transported by sigma: (c1, c2) -> (c1/C, c2/C)."""
    if not C >= 1.0:
        raise ValueError("only enlarging scalings C >= 1 are used")
    return c1 / C, c2 / C


def sigma_map(C: float) -> Callable[[Point3], Point3]:
    """Point map of the rescaling, for use with curve-image checks."""
    if not C >= 1.0:
        raise ValueError("only enlarging scalings C >= 1 are used")

    def _apply(p):
        return Point3(p[0] / (C * C), p[1], p[2] / C)

    return _apply


def choose_scale_C(eta2: float, c1: float, margin: float = 0.5) -> float:
    """Smallest convenient C >= 1 making eta2 subcritical after rescaling.

    After scaling, the chart threshold becomes pi / (4 sqrt(2) c1 / C); the
    returned C leaves a relative `margin` between eta2 and that threshold.
    """
    if not (eta2 > 0.0 and c1 > 0.0):
        raise ValueError("need eta2 > 0 and c1 > 0")
    if not 0.0 < margin < 1.0:
        raise ValueError("margin must lie in (0, 1)")
    return float(max(1.0, (4.0 * np.sqrt(2.0) * c1 * eta2 / np.pi) / (1.0 - margin)))


def projection_pi(q: PointN) -> Point3:
    """Norm projection (xi, eta, x) -> (xi, eta, |x|) onto the reduced chart."""
    return Point3(q[0], q[1], float(np.linalg.norm(np.asarray(q[2], dtype=float))))

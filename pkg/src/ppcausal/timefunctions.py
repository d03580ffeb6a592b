"""Explicit time functions with timelike gradient, and diamond-size certificates.

The time function has the form T = eta - Phi(xi, tau) with

    Phi(xi, tau) = phi_eps(xi / psi(tau)),   psi(tau) = eps * f0(tau),
    phi_eps(x)   = arctan(sqrt(2) eps c1 x) / (2 sqrt(2) c1),

where f0(tau) = c1^2 tau^2 + c2^2 dominates the wave profile.  phi_eps is
the solution of phi'(x) (1 + 2 eps^2 c1^2 x^2) = eps / 2, which makes the
gradient of T timelike for every eps > 0 (checked numerically by
:func:`verify_timelike_gradient`, not assumed).  Note that eps cancels in
the composition phi_eps(xi / (eps f0)), so T itself is independent of eps;
eps still matters for the certificate machinery below, where phi_eps is
evaluated at the normalized coordinate x = xi / f0(tau) of the diamond
endpoints.

The certificate (:func:`lemma2_certificate`) turns the qualitative
compactness argument into checkable numbers: an endpoint margin condition
selects eps, a tangent bound yields |xi| / f0(tau) <= d on the diamond, a
quadratic-root estimate bounds the slope of the arcsinh-straightened tau
coordinate by R, and integrating that rate over the eta- and T-extent of
the diamond gives the total increment bound D, hence tau_max and xi_max.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._util import axis_nodes
from .spacetimes import Point3, Tangent3


class CertificateError(RuntimeError):
    """Internal inconsistency while assembling a certificate (not a user error)."""


@dataclass(frozen=True)
class TimeFnParams:
    eps: float
    c1: float
    c2: float

    def __post_init__(self):
        if not (self.eps > 0.0 and self.c1 > 0.0 and self.c2 > 0.0):
            raise ValueError("eps, c1, c2 must be strictly positive")

    def f0(self, tau):
        return self.c1 * self.c1 * np.square(tau) + self.c2 * self.c2

    def f0_deriv(self, tau):
        return 2.0 * self.c1 * self.c1 * np.asarray(tau, dtype=float)

    @property
    def threshold(self) -> float:
        """Chart half-width pi / (4 sqrt(2) c1): supremum of |T - eta|."""
        return math.pi / (4.0 * math.sqrt(2.0) * self.c1)


@dataclass(frozen=True)
class XiTauGrid:
    """Rectangular evaluation grid over the (xi, tau) plane."""

    xi_min: float
    xi_max: float
    n_xi: int
    tau_min: float
    tau_max: float
    n_tau: int

    def __post_init__(self):
        if self.n_xi < 1 or self.n_tau < 1:
            raise ValueError("grid needs at least one node per axis")
        if self.n_xi > 1 and not self.xi_max > self.xi_min:
            raise ValueError("xi_max must exceed xi_min")
        if self.n_tau > 1 and not self.tau_max > self.tau_min:
            raise ValueError("tau_max must exceed tau_min")

    @classmethod
    def square(cls, half_width: float, step: float) -> "XiTauGrid":
        n = int(round(2.0 * half_width / step)) + 1
        return cls(-half_width, half_width, n, -half_width, half_width, n)

    def xi_nodes(self) -> np.ndarray:
        return axis_nodes(self.xi_min, self.xi_max, self.n_xi)

    def tau_nodes(self) -> np.ndarray:
        return axis_nodes(self.tau_min, self.tau_max, self.n_tau)

    def to_json_dict(self) -> dict:
        return {
            "xi_min": self.xi_min, "xi_max": self.xi_max, "n_xi": self.n_xi,
            "tau_min": self.tau_min, "tau_max": self.tau_max, "n_tau": self.n_tau,
        }


@dataclass(frozen=True)
class GradReport:
    params: "TimeFnParams"
    grid: XiTauGrid
    max_norm_sq: float
    argmax: tuple          # (xi, tau) node realizing the maximum
    passed: bool           # max_norm_sq < 0
    ode_residual_max: float

    def to_json_dict(self) -> dict:
        return {
            "params": {"eps": self.params.eps, "c1": self.params.c1,
                       "c2": self.params.c2},
            "grid": self.grid.to_json_dict(),
            "max_norm_sq": self.max_norm_sq,
            "argmax": list(self.argmax),
            "pass": self.passed,
            "ode_residual_max": self.ode_residual_max,
        }


@dataclass(frozen=True)
class Lemma2Certificate:
    """Concrete constants bounding the causal diamond of a point pair."""

    eps: float
    x1: float
    x2: float
    d: float
    R: float
    D: float
    tau_max: float
    xi_max: float

    def to_json_dict(self) -> dict:
        return {
            "eps": self.eps, "x1": self.x1, "x2": self.x2, "d": self.d,
            "R": self.R, "D": self.D, "tau_max": self.tau_max,
            "xi_max": self.xi_max,
        }


# ---------------------------------------------------------------------------
# the chart functions


def phi_eps(x, params: TimeFnParams):
    """Odd, increasing, bounded by pi / (4 sqrt(2) c1) in absolute value."""
    return np.arctan(math.sqrt(2.0) * params.eps * params.c1 * np.asarray(x, dtype=float)) \
        / (2.0 * math.sqrt(2.0) * params.c1)


def phi_eps_deriv(x, params: TimeFnParams):
    """phi'(x) = (eps/2) / (1 + 2 eps^2 c1^2 x^2)."""
    e, c1 = params.eps, params.c1
    return (e / 2.0) / (1.0 + 2.0 * e * e * c1 * c1 * np.square(x))


def time_fn(p, params: TimeFnParams) -> float:
    """T(p) = eta - phi_eps(xi / (eps f0(tau))); |T - eta| < threshold."""
    psi = params.eps * params.f0(p[2])
    return float(p[1] - phi_eps(p[0] / psi, params))


def _grad_arrays(params: TimeFnParams, xi, tau):
    """Gradient components and |grad T|^2, vectorized over xi/tau arrays."""
    f0 = params.f0(tau)
    psi = params.eps * f0
    x = xi / psi
    dphi = phi_eps_deriv(x, params)
    phi_xi = dphi / psi
    phi_tau = -dphi * x * params.f0_deriv(tau) / f0   # psi'/psi = f0'/f0
    norm_sq = 2.0 * f0 * np.square(phi_xi) + np.square(phi_tau) - 2.0 * phi_xi
    return 1.0 - 2.0 * f0 * phi_xi, -phi_xi, -phi_tau, norm_sq


def grad_time_fn(p, params: TimeFnParams):
    """Closed-form metric gradient of T and its squared norm.

    Returns (Tangent3, norm_sq) where the tangent is
    (1 - 2 f0 Phi_xi) d_xi - Phi_xi d_eta - Phi_tau d_tau and
    norm_sq = 2 f0 Phi_xi^2 + Phi_tau^2 - 2 Phi_xi.
    """
    gxi, geta, gtau, norm_sq = _grad_arrays(params, np.asarray(p[0], dtype=float),
                                            np.asarray(p[2], dtype=float))
    return Tangent3(float(gxi), float(geta), float(gtau)), float(norm_sq)


def verify_timelike_gradient(params: TimeFnParams, grid: XiTauGrid) -> GradReport:
    """Evaluate |grad T|^2 on every grid node; pass iff strictly negative.

    Also reports the residual of the defining relation
    phi'(x) (1 + 2 eps^2 c1^2 x^2) - eps/2 over the grid's normalized
    coordinates, which must vanish to rounding.
    """
    xi = grid.xi_nodes()
    tau = grid.tau_nodes()
    XI, TAU = np.meshgrid(xi, tau, indexing="ij")
    _, _, _, norm_sq = _grad_arrays(params, XI, TAU)
    flat = np.argmax(norm_sq)
    i, j = np.unravel_index(flat, norm_sq.shape)
    max_val = float(norm_sq[i, j])

    e, c1 = params.eps, params.c1
    x = XI / (e * params.f0(TAU))
    residual = phi_eps_deriv(x, params) * (1.0 + 2.0 * e * e * c1 * c1 * np.square(x)) - e / 2.0
    res_max = float(np.max(np.abs(residual)))
    return GradReport(params, grid, max_val, (float(xi[i]), float(tau[j])),
                      max_val < 0.0, res_max)


# ---------------------------------------------------------------------------
# certificate machinery


def normalized_x(p, params: TimeFnParams) -> float:
    """Endpoint coordinate x = xi / (c1^2 tau^2 + c2^2)."""
    return float(p[0] / params.f0(p[2]))


def choose_epsilon(p1, p2, params0: TimeFnParams, max_halvings: int = 200) -> float:
    """Largest eps = 2^-k whose endpoint margins fit the half-margin condition.

    Requires eta1 == 0 (translate first) and 0 < eta2 < threshold.  The
    condition is |phi_eps(x_i)| <= (threshold - eta2) / 2 for both endpoints;
    halving powers of two keep the search bit-reproducible.
    """
    if p1[1] != 0.0:
        raise ValueError("normalize eta1 = 0 with translate() before choosing eps")
    thr = params0.threshold
    eta2 = p2[1]
    if not 0.0 < eta2 < thr:
        raise ValueError("eta2 must lie in (0, %g); rescale the instance first" % thr)
    cap = (thr - eta2) / 2.0
    for k in range(max_halvings + 1):
        eps = 2.0 ** (-k)
        trial = TimeFnParams(eps, params0.c1, params0.c2)
        m1 = abs(float(phi_eps(normalized_x(p1, trial), trial)))
        m2 = abs(float(phi_eps(normalized_x(p2, trial), trial)))
        if m1 <= cap and m2 <= cap:
            return eps
    raise CertificateError("halving search failed to satisfy the margin condition")


def lemma2_certificate(p1, p2, params: TimeFnParams) -> Lemma2Certificate:
    """Assemble the diamond-bound certificate for endpoints p1, p2.

    params.eps must already satisfy the half-margin condition (use
    :func:`choose_epsilon`); a violated margin raises CertificateError since
    it indicates a bug in the caller's eps choice rather than bad user input.
    """
    if p1[1] != 0.0:
        raise ValueError("normalize eta1 = 0 with translate() before certifying")
    thr = params.threshold
    eta1, eta2 = p1[1], p2[1]
    if not 0.0 < eta2 < thr:
        raise ValueError("eta2 must lie in (0, %g); rescale the instance first" % thr)
    c1, c2, eps = params.c1, params.c2, params.eps
    x1 = normalized_x(p1, params)
    x2 = normalized_x(p2, params)
    m1 = abs(float(phi_eps(x1, params)))
    m2 = abs(float(phi_eps(x2, params)))
    cap = (thr - eta2) / 2.0
    if m1 > cap or m2 > cap:
        raise CertificateError("endpoint margin violated; eps was not chosen correctly")
    angle = 2.0 * math.sqrt(2.0) * c1 * (eta2 + m1 + m2)
    if not angle < math.pi / 2.0:
        raise CertificateError("arctan argument reached the pole despite margins")
    d = math.tan(angle) / (math.sqrt(2.0) * eps * c1)
    R = 2.0 * d * c1 + math.sqrt(
        4.0 * d * d * c1 * c1
        + 2.0 * (1.0 + (2.0 / eps) * (1.0 + 2.0 * eps * eps * c1 * c1 * d * d))
    )
    D = R * ((eta2 - eta1) + (time_fn(p2, params) - time_fn(p1, params)))
    tau0 = max(abs(p1[2]), abs(p2[2]))
    tau_max = (c2 / c1) * math.sinh(math.asinh(c1 * tau0 / c2) + c1 * D)
    xi_max = d * (c1 * c1 * tau_max * tau_max + c2 * c2)
    return Lemma2Certificate(eps, x1, x2, d, R, D, tau_max, xi_max)

"""Geodesics, random causal curves, and the null-escape integrator.

Geodesic equations of the reduced metric 2 deta (dxi - f(tau) deta) + dtau^2
(xi and eta are cyclic, tau sees the profile slope):

    eta'' = 0,    tau'' = -f'(tau) eta'^2,    xi'' = 2 f'(tau) tau' eta',

with the conserved quantities g(gamma', gamma') and xi' - 2 f(tau) eta'.
The full-model analogue x'' = 2 k^2 A x (k = eta' = const) is solved in
closed form by symmetric eigendecomposition; xi is recovered by quadrature
of its first integral xi' + 2 (x^T A x) eta' = const.

Integration is classical fixed-step RK4: reproducibility is worth more here
than adaptivity, and the conserved-quantity drift doubles as an error
indicator.  The only adaptive quadrature lives in
:func:`null_escape_integrate`, whose integrand 1/sqrt(2 f) can blow up.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp

from .spacetimes import (CWModel, Point3, PointN, QuadraticProfile, PowerProfile,
                         ReducedModel, SymMatrix, Tangent3, TangentN)


class IntegrationBlowupError(RuntimeError):
    """State left the finite range; carries the last good samples."""

    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


@dataclass
class CurveSample:
    """Discretized parametrized curve with tangents and per-sample logs.

    points/tangents are (n, 3) for reduced-model curves (columns xi, eta,
    tau) and (n, 2 + dim) for full-model curves (columns xi, eta, x1..xn).
    logs holds "norm_sq" (g(gamma', gamma')), "deta" and "first_integral"
    (xi' - 2 f eta', resp. xi' + 2 x^T A x eta'); for piecewise-linear
    sampled curves the log entries are per-segment values stored at the
    segment's left sample (the last entry repeats).
    """

    params: np.ndarray
    points: np.ndarray
    tangents: np.ndarray
    logs: dict = field(default_factory=dict)
    coords: tuple = ("xi", "eta", "tau")

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        self.points = np.asarray(self.points, dtype=float)
        self.tangents = np.asarray(self.tangents, dtype=float)
        if self.params.ndim != 1 or self.params.size < 2:
            raise ValueError("need at least two samples")
        if np.any(np.diff(self.params) <= 0.0):
            raise ValueError("params must be strictly increasing")
        if self.points.shape != (self.params.size, len(self.coords)):
            raise ValueError("points shape does not match params/coords")
        if self.tangents.shape != self.points.shape:
            raise ValueError("tangents shape does not match points")

    def __len__(self):
        return self.params.size


@dataclass(frozen=True)
class EscapeReport:
    """Outcome of driving a null curve of -2 deta^2 + dtau^2 / f toward tau = inf."""

    escaped: bool
    eta_at_escape: float | None
    eta_budget: float
    tau_reached: float
    refinement_history: list  # (cutoff, eta-integral) pairs, non-decreasing

    def to_json_dict(self) -> dict:
        return {
            "escaped": self.escaped,
            "eta_at_escape": self.eta_at_escape,
            "eta_budget": self.eta_budget,
            "tau_reached": self.tau_reached,
            "refinement_history": [[c, v] for c, v in self.refinement_history],
        }


# ---------------------------------------------------------------------------
# reduced-model geodesics


def _scalar_profile_fns(model: ReducedModel):
    """float -> float closures for f and f', fast enough for the RK4 loop."""
    prof = model.profile
    if isinstance(prof, QuadraticProfile):
        a, b = prof.c1 * prof.c1, prof.c2 * prof.c2
        return (lambda t: a * t * t + b), (lambda t: 2.0 * a * t)
    if isinstance(prof, PowerProfile):
        p = prof.p
        return (lambda t: t ** p), (lambda t: p * t ** (p - 1.0))
    if hasattr(prof, "deriv"):
        return (lambda t: float(prof(t))), (lambda t: float(prof.deriv(t)))
    raise ValueError("profile provides no derivative; geodesics need f in C^1")


def geodesic_rhs(model: ReducedModel, state):
    """Derivative of (point, tangent) along the geodesic flow."""
    point, tangent = state
    _, fprime = _scalar_profile_fns(model)
    fp = fprime(point[2])
    deta = tangent[1]
    accel = Tangent3(2.0 * fp * tangent[2] * deta, 0.0, -fp * deta * deta)
    return Tangent3(*tangent), accel


def integrate_geodesic(model: ReducedModel, init, s_max: float, h: float) -> CurveSample:
    """Classical RK4 with fixed step h; the last (partial) step lands on s_max.

    Raises IntegrationBlowupError with the good prefix of the curve if the
    state leaves the finite range.
    """
    if not (h > 0.0 and s_max > 0.0):
        raise ValueError("need h > 0 and s_max > 0")
    f, fprime = _scalar_profile_fns(model)
    point, tangent = init
    state = (float(point[0]), float(point[1]), float(point[2]),
             float(tangent[0]), float(tangent[1]), float(tangent[2]))

    n_full = int(math.floor(s_max / h + 1e-9))
    steps = [h] * n_full
    rem = s_max - n_full * h
    if rem > 1e-12 * max(1.0, s_max):
        steps.append(rem)
    n_samples = len(steps) + 1

    params = np.empty(n_samples)
    params[:-1] = np.arange(len(steps)) * h
    params[-1] = s_max
    points = np.empty((n_samples, 3))
    tangents = np.empty((n_samples, 3))

    def rhs(y):
        fp = fprime(y[2])
        return (y[3], y[4], y[5],
                2.0 * fp * y[5] * y[4], 0.0, -fp * y[4] * y[4])

    def store(i, y):
        points[i] = y[:3]
        tangents[i] = y[3:]

    store(0, state)
    for i, hh in enumerate(steps):
        y = state
        k1 = rhs(y)
        y2 = tuple(y[j] + 0.5 * hh * k1[j] for j in range(6))
        k2 = rhs(y2)
        y3 = tuple(y[j] + 0.5 * hh * k2[j] for j in range(6))
        k3 = rhs(y3)
        y4 = tuple(y[j] + hh * k3[j] for j in range(6))
        k4 = rhs(y4)
        state = tuple(y[j] + hh / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
                      for j in range(6))
        if not all(math.isfinite(c) for c in state):
            partial = _finish_reduced_sample(model, params[: i + 1], points[: i + 1],
                                             tangents[: i + 1])
            raise IntegrationBlowupError(
                "geodesic state became non-finite at s = %g" % params[i], partial)
        store(i + 1, state)

    return _finish_reduced_sample(model, params, points, tangents)


def _finish_reduced_sample(model, params, points, tangents) -> CurveSample:
    fvals = model.f(points[:, 2])
    deta = tangents[:, 1]
    norm_sq = (2.0 * tangents[:, 0] * deta - 2.0 * fvals * deta * deta
               + tangents[:, 2] ** 2)
    first_integral = tangents[:, 0] - 2.0 * fvals * deta
    if params.size < 2:
        # degenerate prefix after an immediate blowup; pad so the container
        # invariant (>= 2 samples) still holds
        params = np.array([params[0], params[0] + 1.0])
        points = np.vstack([points, points[-1]])
        tangents = np.vstack([tangents, tangents[-1]])
        norm_sq = np.concatenate([norm_sq, norm_sq[-1:]])
        first_integral = np.concatenate([first_integral, first_integral[-1:]])
        deta = tangents[:, 1]
    return CurveSample(params, points, tangents,
                       logs={"norm_sq": norm_sq, "deta": deta.copy(),
                             "first_integral": first_integral},
                       coords=("xi", "eta", "tau"))


# ---------------------------------------------------------------------------
# full-model geodesics in closed form


def _cw_flow(A: SymMatrix, init):
    """Mode data for x'' = 2 k^2 A x plus closures vectorized over s."""
    point, tangent = init
    x0 = np.asarray(point[2], dtype=float)
    v0 = np.asarray(tangent[2], dtype=float)
    if x0.shape != (A.n,) or v0.shape != (A.n,):
        raise ValueError("transverse dimension mismatch with the matrix")
    k = float(tangent[1])
    lam, Q = np.linalg.eigh(A.entries)
    y0 = Q.T @ x0
    w0 = Q.T @ v0
    w2 = 2.0 * k * k * lam

    def modes(s):
        s = np.asarray(s, dtype=float)
        y = np.empty(s.shape + (A.n,))
        dy = np.empty_like(y)
        for i in range(A.n):
            if w2[i] < 0.0:
                om = math.sqrt(-w2[i])
                y[..., i] = y0[i] * np.cos(om * s) + (w0[i] / om) * np.sin(om * s)
                dy[..., i] = -y0[i] * om * np.sin(om * s) + w0[i] * np.cos(om * s)
            elif w2[i] > 0.0:
                mu = math.sqrt(w2[i])
                y[..., i] = y0[i] * np.cosh(mu * s) + (w0[i] / mu) * np.sinh(mu * s)
                dy[..., i] = y0[i] * mu * np.sinh(mu * s) + w0[i] * np.cosh(mu * s)
            else:
                y[..., i] = y0[i] + w0[i] * s
                dy[..., i] = w0[i]
        return y, dy

    def quad_form_along(s):
        y, _ = modes(s)
        return np.sum(lam * y * y, axis=-1)

    c_xi = float(tangent[0]) + 2.0 * A.quad_form(x0) * k
    return modes, quad_form_along, c_xi, k, Q


def cw_geodesic_closed_form(A: SymMatrix, init, s: float):
    """Geodesic of the full model at parameter s, exact up to quadrature of xi."""
    modes, q_along, c_xi, k, Q = _cw_flow(A, init)
    point, _tangent = init
    y, dy = modes(float(s))
    x = Q @ y
    dx = Q @ dy
    q_int = quad(q_along, 0.0, float(s), limit=200)[0] if s != 0.0 else 0.0
    xi = float(point[0]) + c_xi * s - 2.0 * k * q_int
    eta = float(point[1]) + k * s
    dxi = c_xi - 2.0 * k * float(q_along(float(s)))
    return PointN(xi, eta, x), TangentN(dxi, k, dx)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)


def cw_geodesic_curve(A: SymMatrix, init, params) -> CurveSample:
    """Closed-form geodesic sampled on a parameter grid (for oracle comparisons).

    xi is accumulated with per-interval 5-point Gauss-Legendre quadrature of
    the first integral, which is far below the comparison tolerances.
    """
    params = np.asarray(params, dtype=float)
    modes, q_along, c_xi, k, Q = _cw_flow(A, init)
    point, _tangent = init
    y, dy = modes(params)
    x = y @ Q.T
    dx = dy @ Q.T

    a, b = params[:-1], params[1:]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    seg = np.sum(q_along(pts) * _GL_WEIGHTS[None, :], axis=1) * half
    q_int = np.concatenate([[0.0], np.cumsum(seg)])

    xi = float(point[0]) + c_xi * params - 2.0 * k * q_int
    eta = float(point[1]) + k * params
    qs = q_along(params)
    dxi = c_xi - 2.0 * k * qs

    n = params.size
    pts_arr = np.column_stack([xi, eta, x.reshape(n, -1)])
    tan_arr = np.column_stack([dxi, np.full(n, k), dx.reshape(n, -1)])
    norm_sq = (2.0 * dxi * k + 2.0 * qs * k * k
               + np.sum(dx.reshape(n, -1) ** 2, axis=1))
    first_integral = dxi + 2.0 * qs * k
    coords = ("xi", "eta") + tuple("x%d" % (i + 1) for i in range(A.n))
    return CurveSample(params, pts_arr, tan_arr,
                       logs={"norm_sq": norm_sq, "deta": np.full(n, k),
                             "first_integral": first_integral},
                       coords=coords)


# ---------------------------------------------------------------------------
# random causal curves


def sample_causal_curve(model: ReducedModel, p_start, n_steps: int, rng_seed,
                        step: float = 0.1) -> CurveSample:
    """Piecewise-linear future-directed causal curve, deterministic per seed.

    Each step draws deta in (0, step], then dtau within the band that keeps
    the cone condition satisfiable with margin, then dxi uniformly from an
    interval hanging below the cone bound f(tau_mid) deta - dtau^2/(2 deta);
    where f <= 0 the transverse step degenerates to dtau = 0.  Every
    segment's midpoint tangent is causal and future-directed by
    construction.
    """
    if n_steps < 1:
        raise ValueError("need at least one step")
    rng = np.random.default_rng(rng_seed)
    f = model.f
    xi, eta, tau = float(p_start[0]), float(p_start[1]), float(p_start[2])
    points = np.empty((n_steps + 1, 3))
    tangents = np.empty((n_steps + 1, 3))
    fmid = np.empty(n_steps + 1)
    points[0] = (xi, eta, tau)
    for i in range(n_steps):
        deta = (1.0 - rng.uniform()) * step  # in (0, step]
        fplus = max(float(f(tau)), 0.0)
        if fplus > 0.0:
            amp = math.sqrt(2.0 * fplus * deta * 0.9)
            dtau = rng.uniform(-amp, amp)
        else:
            dtau = 0.0
        f_mid = float(f(tau + 0.5 * dtau))
        bound = f_mid * deta - dtau * dtau / (2.0 * deta)
        span = (1.0 + abs(f_mid)) * deta
        dxi = bound - rng.uniform() * span
        tangents[i] = (dxi, deta, dtau)
        fmid[i] = f_mid
        xi += dxi
        eta += deta
        tau += dtau
        points[i + 1] = (xi, eta, tau)
    tangents[n_steps] = tangents[n_steps - 1]
    fmid[n_steps] = fmid[n_steps - 1]
    dxi_, deta_, dtau_ = tangents[:, 0], tangents[:, 1], tangents[:, 2]
    norm_sq = 2.0 * dxi_ * deta_ - 2.0 * fmid * deta_ * deta_ + dtau_ ** 2
    first_integral = dxi_ - 2.0 * fmid * deta_
    return CurveSample(np.arange(n_steps + 1, dtype=float), points, tangents,
                       logs={"norm_sq": norm_sq, "deta": deta_.copy(),
                             "first_integral": first_integral},
                       coords=("xi", "eta", "tau"))


def sample_causal_curve_cw(model: CWModel, p_start, n_steps: int, rng_seed,
                           step: float = 0.1) -> CurveSample:
    """Full-model analogue of :func:`sample_causal_curve` (profile role: -x^T A x)."""
    if n_steps < 1:
        raise ValueError("need at least one step")
    rng = np.random.default_rng(rng_seed)
    A = model.A
    xi, eta = float(p_start[0]), float(p_start[1])
    x = np.array(p_start[2], dtype=float)
    if x.shape != (model.n,):
        raise ValueError("start point dimension mismatch with model")
    n = model.n
    points = np.empty((n_steps + 1, 2 + n))
    tangents = np.empty((n_steps + 1, 2 + n))
    qmid = np.empty(n_steps + 1)
    points[0] = (xi, eta, *x)
    for i in range(n_steps):
        deta = (1.0 - rng.uniform()) * step
        gain = max(-A.quad_form(x), 0.0)
        if gain > 0.0:
            amp = math.sqrt(2.0 * gain * deta * 0.9)
            direction = rng.normal(size=n)
            nrm = np.linalg.norm(direction)
            direction = direction / nrm if nrm > 0.0 else np.zeros(n)
            dx = rng.uniform(0.0, amp) * direction
        else:
            dx = np.zeros(n)
        q_mid = A.quad_form(x + 0.5 * dx)
        bound = -q_mid * deta - float(dx @ dx) / (2.0 * deta)
        span = (1.0 + abs(q_mid)) * deta
        dxi = bound - rng.uniform() * span
        tangents[i] = (dxi, deta, *dx)
        qmid[i] = q_mid
        xi += dxi
        eta += deta
        x = x + dx
        points[i + 1] = (xi, eta, *x)
    tangents[n_steps] = tangents[n_steps - 1]
    qmid[n_steps] = qmid[n_steps - 1]
    dxi_, deta_ = tangents[:, 0], tangents[:, 1]
    dxsq = np.sum(tangents[:, 2:] ** 2, axis=1)
    norm_sq = 2.0 * dxi_ * deta_ + 2.0 * qmid * deta_ ** 2 + dxsq
    first_integral = dxi_ + 2.0 * qmid * deta_
    coords = ("xi", "eta") + tuple("x%d" % (i + 1) for i in range(n))
    return CurveSample(np.arange(n_steps + 1, dtype=float), points, tangents,
                       logs={"norm_sq": norm_sq, "deta": deta_.copy(),
                             "first_integral": first_integral},
                       coords=coords)


# ---------------------------------------------------------------------------
# the null-escape counterexample integrator


def null_escape_integrate(profile, tau0: float, eta_budget: float = 1e3,
                          rel_tol: float = 1e-6, max_doublings: int = 60) -> EscapeReport:
    """Drive the future null curve of -2 deta^2 + dtau^2 / f(tau) from tau0.

    Integrates deta/dtau = 1 / sqrt(2 f) over doubling cutoffs.  escaped is
    True when the improper integral converges (successive doublings change
    it by < rel_tol relative) to a value within eta_budget; if the partial
    integral exhausts the budget first, the report instead carries the tau
    actually reached at that eta (from the equivalent ODE dtau/deta =
    sqrt(2 f)).
    """
    if isinstance(profile, ReducedModel):
        f = profile.f
    else:
        f = profile
    if not eta_budget > 0.0:
        raise ValueError("eta_budget must be positive")
    if tau0 < 0.0:
        raise ValueError("tau0 must be non-negative")

    def integrand(t):
        return 1.0 / math.sqrt(2.0 * f(t))

    def check_positive(lo, hi):
        ts = np.linspace(lo, hi, 129)
        if np.any(np.asarray(f(ts), dtype=float) <= 0.0):
            raise ValueError("profile must stay positive on the escape range")

    check_positive(tau0, tau0 + 1.0)
    base = tau0 if tau0 > 0.0 else 1.0
    history = []
    total = 0.0
    prev_cut = tau0
    escaped = False
    eta_at_escape = None
    tau_reached = None
    for k in range(1, max_doublings + 1):
        cut = base * (2.0 ** k)
        if cut <= prev_cut:
            continue
        check_positive(prev_cut, cut)
        seg, _err = quad(integrand, prev_cut, cut, limit=400)
        prev_total = total
        total += seg
        history.append((cut, total))
        prev_cut = cut
        if total > eta_budget:
            sol = solve_ivp(lambda _e, t: math.sqrt(2.0 * f(t[0])) * np.ones(1),
                            (0.0, eta_budget), [tau0], rtol=1e-10, atol=1e-12)
            tau_reached = float(sol.y[0, -1])
            break
        if len(history) >= 2 and abs(total - prev_total) < rel_tol * max(abs(total), 1e-300):
            escaped = True
            eta_at_escape = total
            tau_reached = math.inf
            break
    if tau_reached is None:
        # cutoffs exhausted without converging or exhausting the budget;
        # report the last cutoff actually explored
        tau_reached = prev_cut
    return EscapeReport(escaped, eta_at_escape, eta_budget, tau_reached, history)

"""The acceptance checks: one function per criterion, shared by tests and CLI.

Each criterion function runs a self-contained, seeded computation at desk
scale and returns a :class:`CheckResult` whose `passed` flag is decided at
the stated tolerance.  `run_all` executes the whole battery (optionally on
a small thread pool; the criteria are independent) and preserves criterion
order in the output regardless of scheduling.
"""

import concurrent.futures
import math
import os
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import geodesics, reachability, spacetimes, timefunctions
from ._util import write_json_atomic
from .spacetimes import (CWModel, FUTURE, NULL, Point3, ReducedModel, SymMatrix,
                         Tangent3, TIMELIKE, causal_class)
from .timefunctions import TimeFnParams, XiTauGrid

# the standard reduced instance used throughout
STANDARD_MODEL = ReducedModel.quadratic(1.0, 1.0)
STANDARD_P1 = Point3(0.0, 0.0, 0.0)
STANDARD_P2 = Point3(0.0, 0.4, 0.0)
STANDARD_GRID = reachability.GridSpec(0.0, 0.4, 400, -6.0, 6.0, 2001)

TOL_FD_GRADIENT = 1e-6
TOL_ORACLE_EQUALITY = 1e-12
TOL_ODE_DRIFT = 1e-8
TOL_ESCAPE = 1e-3


@dataclass
class CheckResult:
    criterion: int
    name: str
    passed: bool
    seconds: float
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return "criterion %2d %-28s %s  (%.2f s)" % (
            self.criterion, self.name, status, self.seconds)


def _timed(criterion, name, fn):
    t0 = time.perf_counter()
    passed, details = fn()
    return CheckResult(criterion, name, bool(passed), time.perf_counter() - t0,
                       details)


# ---------------------------------------------------------------------------


def criterion_1_timelike_gradient() -> CheckResult:
    """|grad T|^2 < 0 on the [-50, 50]^2 grid (step 0.1) and -0.5 at the origin."""

    def body():
        params = TimeFnParams(0.1, 1.0, 1.0)
        grid = XiTauGrid.square(50.0, 0.1)
        report = timefunctions.verify_timelike_gradient(params, grid)
        _, origin = timefunctions.grad_time_fn(Point3(0.0, 0.0, 0.0), params)
        ok = report.passed and abs(origin - (-0.5)) <= 1e-12
        return ok, {"max_norm_sq": report.max_norm_sq, "argmax": report.argmax,
                    "origin_norm_sq": origin,
                    "ode_residual_max": report.ode_residual_max}

    return _timed(1, "timelike_gradient", body)


def criterion_2_gradient_fd_oracle() -> CheckResult:
    """Closed-form gradient vs central differences at 10^3 random points."""

    def body():
        params = TimeFnParams(0.1, 1.0, 1.0)
        rng = np.random.default_rng(20240802)
        h = 1e-4
        worst = 0.0
        for _ in range(1000):
            xi = rng.uniform(-1e3, 1e3)
            tau = rng.uniform(-1e3, 1e3)
            eta = rng.uniform(-2.0, 2.0)
            p = Point3(xi, eta, tau)
            grad, _ = timefunctions.grad_time_fn(p, params)
            # metric gradient components (a, b, c) pair against the metric;
            # dT/dxi = g(grad, d_xi) = b, dT/deta = a - 2 f0 b, dT/dtau = c
            f0 = float(params.f0(tau))
            dT = (grad.deta, grad.dxi - 2.0 * f0 * grad.deta, grad.dtau)
            fd = (
                (timefunctions.time_fn(Point3(xi + h, eta, tau), params)
                 - timefunctions.time_fn(Point3(xi - h, eta, tau), params)) / (2 * h),
                (timefunctions.time_fn(Point3(xi, eta + h, tau), params)
                 - timefunctions.time_fn(Point3(xi, eta - h, tau), params)) / (2 * h),
                (timefunctions.time_fn(Point3(xi, eta, tau + h), params)
                 - timefunctions.time_fn(Point3(xi, eta, tau - h), params)) / (2 * h),
            )
            scale = max(math.sqrt(sum(c * c for c in dT)), 1e-300)
            err = max(abs(a - b) for a, b in zip(dT, fd)) / scale
            worst = max(worst, err)
        return worst <= TOL_FD_GRADIENT, {"worst_rel_error": worst, "tol": TOL_FD_GRADIENT}

    return _timed(2, "gradient_fd_oracle", body)


def criterion_3_geodesic_oracle() -> CheckResult:
    """RK4 vs tau(s) = cos(sqrt(2) s); conserved-quantity drifts within 1e-8."""

    def body():
        init = (Point3(0.0, 0.0, 1.0), Tangent3(0.0, 1.0, 0.0))
        curve = geodesics.integrate_geodesic(STANDARD_MODEL, init, 10.0, 1e-3)
        sup_err = float(np.max(np.abs(curve.points[:, 2]
                                      - np.cos(np.sqrt(2.0) * curve.params))))
        drift_norm = float(np.max(np.abs(curve.logs["norm_sq"]
                                         - curve.logs["norm_sq"][0])))
        drift_fi = float(np.max(np.abs(curve.logs["first_integral"]
                                       - curve.logs["first_integral"][0])))
        ok = sup_err <= 1e-6 and drift_norm <= TOL_ODE_DRIFT and drift_fi <= TOL_ODE_DRIFT
        return ok, {"sup_error": sup_err, "norm_drift": drift_norm,
                    "first_integral_drift": drift_fi}

    return _timed(3, "geodesic_oracle", body)


def criterion_4_null_escape() -> CheckResult:
    """Escape for tau^4 and tau^3 at the analytic values; no escape for f0."""

    def body():
        r4 = geodesics.null_escape_integrate(spacetimes.PowerProfile(4.0), 1.0)
        r3 = geodesics.null_escape_integrate(spacetimes.PowerProfile(3.0), 1.0)
        rf0 = geodesics.null_escape_integrate(STANDARD_MODEL, 0.0, eta_budget=5.0)
        tau_expected = math.sinh(math.sqrt(2.0) * 5.0)
        ok = (r4.escaped and abs(r4.eta_at_escape - 1.0 / math.sqrt(2.0)) <= TOL_ESCAPE
              and r3.escaped and abs(r3.eta_at_escape - math.sqrt(2.0)) <= TOL_ESCAPE
              and not rf0.escaped
              and abs(rf0.tau_reached - tau_expected) / tau_expected <= 1e-4)
        return ok, {"eta_escape_p4": r4.eta_at_escape, "eta_escape_p3": r3.eta_at_escape,
                    "f0_escaped": rf0.escaped, "f0_tau_at_budget": rf0.tau_reached,
                    "f0_tau_expected": tau_expected}

    return _timed(4, "null_escape_counterexample", body)


def criterion_5_dual_implementation() -> CheckResult:
    """Envelope vs brute-force propagation on 10^3 random slices (m = 2001)."""

    def body():
        rng = np.random.default_rng(20240805)
        tau = STANDARD_GRID.tau_nodes()
        f = np.asarray(STANDARD_MODEL.f(tau), dtype=float)
        worst = 0.0
        for i in range(1000):
            direction = reachability.UPPER if i % 2 == 0 else reachability.LOWER
            vals = rng.normal(size=tau.size) * rng.uniform(0.5, 5.0)
            sentinel = -np.inf if direction == reachability.UPPER else np.inf
            vals[rng.uniform(size=tau.size) < rng.uniform(0.0, 0.6)] = sentinel
            if not np.isfinite(vals).any():
                vals[int(rng.integers(tau.size))] = 0.0
            deta = rng.uniform(2e-4, 5e-2)
            fast = reachability.propagate_step(vals, deta, f, tau, direction, "fast")
            brute = reachability.propagate_step(vals, deta, f, tau, direction, "brute")
            finite = np.isfinite(fast) | np.isfinite(brute)
            if finite.any():
                worst = max(worst, float(np.max(np.abs(fast[finite] - brute[finite]))))
        return worst <= TOL_ORACLE_EQUALITY, {"worst_abs_diff": worst,
                                              "tol": TOL_ORACLE_EQUALITY}

    return _timed(5, "hopf_lax_dual_implementation", body)


def criterion_6_certificate_containment() -> CheckResult:
    """Standard diamond bounded and inside the certificate constants."""

    def body():
        params0 = TimeFnParams(1.0, 1.0, 1.0)
        eps = timefunctions.choose_epsilon(STANDARD_P1, STANDARD_P2, params0)
        cert = timefunctions.lemma2_certificate(
            STANDARD_P1, STANDARD_P2, TimeFnParams(eps, 1.0, 1.0))
        result = reachability.compute_diamond(STANDARD_MODEL, STANDARD_P1,
                                              STANDARD_P2, STANDARD_GRID)
        report = reachability.verify_compactness(result, cert)
        ok = (result.verdict == reachability.VERDICT_BOUNDED
              and report.status == "pass")
        details = {"verdict": result.verdict, "max_abs_x": result.max_abs_x,
                   "d": cert.d, "tau_max": cert.tau_max, "xi_max": cert.xi_max,
                   "n_cells": result.n_cells}
        details.update(report.metrics)
        return ok, details

    return _timed(6, "lemma2_certificate_containment", body)


def criterion_7_time_monotonicity() -> CheckResult:
    """T strictly increases and eta never decreases on 10^3 random causal curves."""

    def body():
        params = TimeFnParams(1.0, 1.0, 1.0)
        min_slope = math.inf
        min_deta = math.inf
        for idx in range(1000):
            start_rng = np.random.default_rng((20240807, idx, 1))
            start = Point3(start_rng.uniform(-2.0, 2.0), 0.0,
                           start_rng.uniform(-2.0, 2.0))
            curve = geodesics.sample_causal_curve(STANDARD_MODEL, start, 30,
                                                  (20240807, idx, 2), step=0.05)
            T = np.array([timefunctions.time_fn(p, params) for p in curve.points])
            dT = np.diff(T) / np.diff(curve.params)
            min_slope = min(min_slope, float(np.min(dT)))
            min_deta = min(min_deta, float(np.min(np.diff(curve.points[:, 1]))))
        ok = min_slope > 0.0 and min_deta >= 0.0
        return ok, {"min_T_slope": min_slope, "min_delta_eta": min_deta}

    return _timed(7, "time_function_monotonicity", body)


def criterion_8_projection_causality() -> CheckResult:
    """10^3 full-model causal curves project to causal reduced-model curves."""

    def body():
        cw = CWModel.from_matrix(SymMatrix([[-0.5, 0.0], [0.0, -0.5]]))
        target = spacetimes.dominating_reduced_model(cw)
        report = reachability.check_causal_image("projection_pi", cw, target,
                                                 n_curves=1000, seed=20240808,
                                                 n_steps=30, step=0.1)
        ok = report.fraction_causal == 1.0 and report.min_projection_slack >= -1e-9
        return ok, report.to_json_dict()

    return _timed(8, "projection_causality", body)


def criterion_9_reachability_properties() -> CheckResult:
    """Time-reflection, tau-parity, and cone-widening monotonicity."""

    def body():
        grid = STANDARD_GRID
        tau = grid.tau_nodes()
        f = np.asarray(STANDARD_MODEL.f(tau), dtype=float)
        deta = grid.deta
        n_slices = grid.n_eta + 1
        j0 = int(np.argmin(np.abs(tau)))
        U = np.full((n_slices, tau.size), -np.inf)
        L = np.full((n_slices, tau.size), np.inf)
        U[0, j0] = 0.0
        L[-1, j0] = 0.0
        for k in range(grid.n_eta):
            U[k + 1] = reachability.propagate_step(U[k], deta, f, tau,
                                                   reachability.UPPER)
            back = n_slices - 1 - k
            L[back - 1] = reachability.propagate_step(L[back], deta, f, tau,
                                                      reachability.LOWER)
        refl = L[::-1, :]
        both = np.isfinite(U) & np.isfinite(refl)
        reflection_err = float(np.max(np.abs(U[both] + refl[both]))) if both.any() else 0.0
        parity_exact = bool(np.array_equal(U, U[:, ::-1])
                            and np.array_equal(L, L[:, ::-1]))

        # cone-widening monotonicity on 100 random profile pairs f <= g <= f0
        rng = np.random.default_rng(20240809)
        small = reachability.GridSpec(0.0, 0.2, 20, -3.0, 3.0, 201)
        t2 = small.tau_nodes()
        f0 = np.asarray(STANDARD_MODEL.f(t2), dtype=float)
        monotone = True
        for _ in range(100):
            g_prof = f0 * rng.uniform(0.0, 1.0, size=t2.size)
            f_prof = g_prof * rng.uniform(0.0, 1.0, size=t2.size)
            seed = np.full(t2.size, -np.inf)
            seed[int(rng.integers(t2.size))] = rng.normal()
            uf, ug = seed.copy(), seed.copy()
            lf = np.where(np.isfinite(seed), seed, np.inf)
            lg = lf.copy()
            for _step in range(10):
                uf = reachability.propagate_step(uf, small.deta, f_prof, t2,
                                                 reachability.UPPER)
                ug = reachability.propagate_step(ug, small.deta, g_prof, t2,
                                                 reachability.UPPER)
                lf = reachability.propagate_step(lf, small.deta, f_prof, t2,
                                                 reachability.LOWER)
                lg = reachability.propagate_step(lg, small.deta, g_prof, t2,
                                                 reachability.LOWER)
                if np.any(uf > ug) or np.any(lf < lg):
                    monotone = False
        ok = reflection_err <= 1e-12 and parity_exact and monotone
        return ok, {"time_reflection_err": reflection_err,
                    "tau_parity_exact": parity_exact,
                    "cone_widening_monotone": monotone}

    return _timed(9, "reachability_properties", body)


def criterion_10_scaling_probe(out_dir: str | None = None) -> CheckResult:
    """Scaling-map probes on the eta2 = 2 instance complete and emit reports.

    The causal-image fraction under sigma is recorded, not asserted; the
    expected outcome (documented) is a fraction below 1 at C = 2 because the
    rescaled profile narrows the cone at large |tau|.
    """

    def body():
        model = STANDARD_MODEL
        p1 = Point3(0.0, 0.0, 0.0)
        p2 = Point3(0.0, 2.0, 0.0)
        grid = reachability.GridSpec(0.0, 2.0, 400, -6.0, 6.0, 2001)
        comparison = reachability.diamond_via_scaling(model, p1, p2, grid)
        image = reachability.check_causal_image(("sigma", 2.0), model,
                                                ReducedModel.quadratic(0.5, 0.5),
                                                n_curves=200, seed=20240810,
                                                n_steps=40, step=0.1)
        directory = out_dir or tempfile.mkdtemp(prefix="ppcausal_scaling_")
        scaling_path = os.path.join(directory, "scaling_comparison.json")
        image_path = os.path.join(directory, "sigma_causal_image.json")
        write_json_atomic(scaling_path, comparison.to_json_dict())
        write_json_atomic(image_path, image.to_json_dict())
        ok = (os.path.exists(scaling_path) and os.path.exists(image_path)
              and 0.0 <= image.fraction_causal <= 1.0)
        return ok, {"C": comparison.C,
                    "total_symmdiff": comparison.total_symmdiff,
                    "direct_verdict": comparison.direct.verdict,
                    "scaled_verdict": comparison.scaled.verdict,
                    "sigma_fraction_causal": image.fraction_causal,
                    "sigma_worst_g_residual": image.worst_g_residual,
                    "reports": [scaling_path, image_path]}

    return _timed(10, "scaling_probe", body)


ALL_CRITERIA = (
    criterion_1_timelike_gradient,
    criterion_2_gradient_fd_oracle,
    criterion_3_geodesic_oracle,
    criterion_4_null_escape,
    criterion_5_dual_implementation,
    criterion_6_certificate_containment,
    criterion_7_time_monotonicity,
    criterion_8_projection_causality,
    criterion_9_reachability_properties,
    criterion_10_scaling_probe,
)


def run_all(threads: int = 1):
    """Run every criterion; results come back in criterion order."""
    if threads <= 1:
        return [fn() for fn in ALL_CRITERIA]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn) for fn in ALL_CRITERIA]
        return [f.result() for f in futures]

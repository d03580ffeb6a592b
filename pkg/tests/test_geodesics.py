"""Geodesic integration, closed-form oracle, causal sampling, null escape."""

import math

import numpy as np
import pytest

from ppcausal import (CWModel, FUTURE, IntegrationBlowupError, Point3, PointN,
                      PowerProfile, QuadraticProfile, ReducedModel, SymMatrix,
                      Tangent3, TangentN, causal_class, cw_geodesic_closed_form,
                      cw_geodesic_curve, geodesic_rhs, integrate_geodesic,
                      null_escape_integrate, sample_causal_curve,
                      sample_causal_curve_cw)

M11 = ReducedModel.quadratic(1.0, 1.0)


class TestGeodesicRHS:
    def test_tau_acceleration(self):
        state = (Point3(0.0, 0.0, 1.0), Tangent3(0.0, 1.0, 0.0))
        vel, acc = geodesic_rhs(M11, state)
        assert acc.dtau == -2.0
        assert acc.deta == 0.0

    def test_eta_always_affine(self):
        rng = np.random.default_rng(41)
        for _ in range(50):
            state = (Point3(*rng.normal(size=3)), Tangent3(*rng.normal(size=3)))
            _, acc = geodesic_rhs(M11, state)
            assert acc.deta == 0.0

    def test_xi_acceleration_vanishes_without_tau_motion(self):
        state = (Point3(0.0, 0.0, 2.0), Tangent3(1.0, 3.0, 0.0))
        _, acc = geodesic_rhs(M11, state)
        assert acc.dxi == 0.0

    def test_profile_without_derivative_rejected(self):
        bare = ReducedModel(profile=lambda t: 1.0 + t * t, c1=1.0, c2=1.0)
        with pytest.raises(ValueError):
            geodesic_rhs(bare, (Point3(0, 0, 0), Tangent3(0, 1, 0)))


class TestIntegrateGeodesic:
    def test_oscillator_oracle(self):
        init = (Point3(0.0, 0.0, 1.0), Tangent3(0.0, 1.0, 0.0))
        curve = integrate_geodesic(M11, init, 10.0, 1e-3)
        ref = np.cos(np.sqrt(2.0) * curve.params)
        assert float(np.max(np.abs(curve.points[:, 2] - ref))) <= 1e-6
        assert curve.params[-1] == 10.0

    def test_conserved_quantities_drift(self):
        rng = np.random.default_rng(42)
        for _ in range(10):
            init = (Point3(rng.normal(), rng.normal(), rng.uniform(-5, 5)),
                    Tangent3(rng.normal(), rng.uniform(0.2, 1.5), rng.normal()))
            curve = integrate_geodesic(M11, init, 10.0, 1e-3)
            for key in ("norm_sq", "first_integral"):
                drift = np.max(np.abs(curve.logs[key] - curve.logs[key][0]))
                assert drift <= 1e-8

    def test_fourth_order_window(self):
        # c1 = 2 keeps truncation error well above the roundoff floor
        model = ReducedModel.quadratic(2.0, 1.0)
        init = (Point3(0.0, 0.0, 1.0), Tangent3(0.0, 1.0, 0.0))
        errs = []
        for h in (1e-3, 5e-4):
            curve = integrate_geodesic(model, init, 10.0, h)
            ref = np.cos(2.0 * np.sqrt(2.0) * curve.params)
            errs.append(float(np.max(np.abs(curve.points[:, 2] - ref))))
        ratio = errs[0] / errs[1]
        assert 12.0 <= ratio <= 20.0

    def test_partial_last_step_hits_s_max(self):
        curve = integrate_geodesic(M11, (Point3(0, 0, 1), Tangent3(0, 1, 0)),
                                   0.0123456, 1e-3)
        assert curve.params[-1] == 0.0123456

    def test_blowup_carries_partial_curve(self):
        # tau'' = -3 tau^2 from tau < 0 runs away to -inf in finite parameter
        model = ReducedModel.power(3.0)
        init = (Point3(0.0, 0.0, -1.0), Tangent3(0.0, 1.0, 0.0))
        with pytest.raises(IntegrationBlowupError) as exc:
            integrate_geodesic(model, init, 1e3, 0.05)
        partial = exc.value.partial
        assert len(partial) >= 2
        assert np.all(np.isfinite(partial.points))

    def test_bad_steps_rejected(self):
        with pytest.raises(ValueError):
            integrate_geodesic(M11, (Point3(0, 0, 0), Tangent3(0, 1, 0)), 1.0, 0.0)
        with pytest.raises(ValueError):
            integrate_geodesic(M11, (Point3(0, 0, 0), Tangent3(0, 1, 0)), -1.0, 0.1)


class TestClosedForm:
    def test_trig_mode(self):
        init = (PointN(0.0, 0.0, np.array([1.0])), TangentN(0.0, 1.0, np.array([0.0])))
        A = SymMatrix([[-0.5]])
        for s in (0.0, 0.7, 2.0, 9.5):
            p, _v = cw_geodesic_closed_form(A, init, s)
            assert abs(p.x[0] - math.cos(s)) <= 1e-12

    def test_hyperbolic_mode(self):
        init = (PointN(0.0, 0.0, np.array([1.0])), TangentN(0.0, 1.0, np.array([0.0])))
        A = SymMatrix([[0.5]])
        for s in (0.0, 0.7, 2.0):
            p, _v = cw_geodesic_closed_form(A, init, s)
            assert abs(p.x[0] - math.cosh(s)) <= 1e-12

    def test_flat_mode_straight_lines(self):
        init = (PointN(1.0, 2.0, np.array([0.5, -0.5])),
                TangentN(0.3, 0.7, np.array([1.0, 2.0])))
        A = SymMatrix(np.zeros((2, 2)))
        p, v = cw_geodesic_closed_form(A, init, 3.0)
        assert np.allclose(p.x, [0.5 + 3.0, -0.5 + 6.0], atol=1e-14)
        assert p.xi == 1.0 + 0.3 * 3.0
        assert p.eta == 2.0 + 0.7 * 3.0
        assert np.allclose(v.dx, [1.0, 2.0], atol=0)

    def test_oracle_equivalence_with_rk4(self):
        # reduced profile c1^2 tau^2 + c2^2 embeds as the single-mode full model
        # A = [[-c1^2]] (the constant term does not enter the equations)
        rng = np.random.default_rng(43)
        A = SymMatrix([[-1.0]])
        for _ in range(10):
            tau0 = rng.uniform(-5.0, 5.0)
            dtau0 = rng.normal()
            deta0 = rng.uniform(0.3, 1.2)
            dxi0 = rng.normal()
            red_init = (Point3(0.0, 0.0, tau0), Tangent3(dxi0, deta0, dtau0))
            cw_init = (PointN(0.0, 0.0, np.array([tau0])),
                       TangentN(dxi0, deta0, np.array([dtau0])))
            rk = integrate_geodesic(M11, red_init, 10.0, 1e-3)
            cf = cw_geodesic_curve(A, cw_init, rk.params)
            err = np.max(np.abs(rk.points - cf.points))
            assert err <= 1e-6


class TestCausalSampling:
    def test_every_segment_satisfies_cone_condition(self):
        curve = sample_causal_curve(M11, Point3(0.0, 0.0, 0.5), 200, 7)
        assert np.all(curve.logs["norm_sq"] <= 1e-12)

    def test_eta_strictly_increasing(self):
        curve = sample_causal_curve(M11, Point3(0.0, 0.0, 0.0), 100, 9)
        assert np.all(np.diff(curve.points[:, 1]) > 0.0)

    def test_seed_reproducibility(self):
        a = sample_causal_curve(M11, Point3(0.0, 0.0, 0.0), 50, 42)
        b = sample_causal_curve(M11, Point3(0.0, 0.0, 0.0), 50, 42)
        assert np.array_equal(a.points, b.points)
        assert np.array_equal(a.tangents, b.tangents)

    def test_segments_classify_causal_future(self):
        curve = sample_causal_curve(M11, Point3(0.0, 0.0, 1.0), 100, 11)
        mids = 0.5 * (curve.points[:-1] + curve.points[1:])
        deltas = np.diff(curve.points, axis=0)
        for mid, d in zip(mids, deltas):
            cc = causal_class(M11, Point3(*mid), Tangent3(*d))
            assert cc.orientation == FUTURE
            assert cc.kind in ("timelike", "null")

    def test_degenerate_profile_freezes_tau(self):
        # f <= 0 everywhere: transverse steps must degenerate to dtau = 0
        taus = np.linspace(-2.0, 2.0, 11)
        model = ReducedModel.from_table(taus, -np.ones_like(taus), c1=1.0, c2=1.0)
        curve = sample_causal_curve(model, Point3(0.0, 0.0, 0.3), 50, 13)
        assert np.all(curve.points[:, 2] == 0.3)

    def test_cw_sampler_matches_contract(self):
        cw = CWModel.from_matrix([[-0.5, 0.0], [0.0, -0.5]])
        curve = sample_causal_curve_cw(cw, (0.0, 0.0, np.array([1.0, -1.0])), 60, 17)
        assert np.all(curve.logs["norm_sq"] <= 1e-12)
        assert np.all(np.diff(curve.points[:, 1]) > 0.0)
        b = sample_causal_curve_cw(cw, (0.0, 0.0, np.array([1.0, -1.0])), 60, 17)
        assert np.array_equal(curve.points, b.points)


class TestNullEscape:
    def test_quartic_escapes_at_analytic_value(self):
        report = null_escape_integrate(PowerProfile(4.0), 1.0)
        assert report.escaped
        assert abs(report.eta_at_escape - 1.0 / math.sqrt(2.0)) <= 1e-3
        assert report.tau_reached == math.inf

    def test_cubic_escapes_at_analytic_value(self):
        report = null_escape_integrate(PowerProfile(3.0), 1.0)
        assert report.escaped
        assert abs(report.eta_at_escape - math.sqrt(2.0)) <= 1e-3

    def test_quadratic_does_not_escape(self):
        report = null_escape_integrate(M11, 0.0, eta_budget=5.0)
        assert not report.escaped
        assert report.eta_at_escape is None
        expect = math.sinh(math.sqrt(2.0) * 5.0)
        assert abs(report.tau_reached - expect) / expect <= 1e-4

    def test_history_non_decreasing(self):
        report = null_escape_integrate(PowerProfile(2.5), 1.0)
        vals = [v for _c, v in report.refinement_history]
        assert all(b >= a for a, b in zip(vals, vals[1:]))
        cuts = [c for c, _v in report.refinement_history]
        assert all(b > a for a, b in zip(cuts, cuts[1:]))

    def test_pointwise_domination_escapes_sooner(self):
        fast = null_escape_integrate(PowerProfile(4.0), 1.0)
        slow = null_escape_integrate(PowerProfile(3.0), 1.0)
        # tau^4 >= tau^3 on [1, inf): larger profile escapes with less eta
        assert fast.eta_at_escape <= slow.eta_at_escape

    def test_nonpositive_profile_rejected(self):
        with pytest.raises(ValueError):
            null_escape_integrate(lambda t: 1.0 - t, 0.5)
        with pytest.raises(ValueError):
            null_escape_integrate(PowerProfile(4.0), 1.0, eta_budget=0.0)

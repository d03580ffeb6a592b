"""Numerical laboratory for the causal structure of plane-wave spacetimes.

The package turns the qualitative causal theory of plane-fronted waves into
checkable computations: explicit time functions with verified timelike
gradients, geodesic and causal-curve integration with conserved-quantity
audits, causal diamonds by max-plus grid propagation with compactness
verdicts, analytic diamond-size certificates, and the super-quadratic
null-escape counterexample.
"""

from .spacetimes import (CausalClass, CWModel, DEFAULT_FLOOR, FUTURE, NONE, NULL,
                         PAST, Point3, PointN, PowerProfile, QuadraticProfile,
                         ReducedModel, SPACELIKE, SymMatrix, TabulatedProfile,
                         Tangent3, TangentN, TIMELIKE, causal_class,
                         choose_scale_C, conformal_scale, derive_bounds_from_A,
                         dominating_reduced_model, metric_inner, projection_pi,
                         scaled_constants, sigma_map, translate)
from .timefunctions import (CertificateError, GradReport, Lemma2Certificate,
                            TimeFnParams, XiTauGrid, choose_epsilon, grad_time_fn,
                            lemma2_certificate, phi_eps, phi_eps_deriv, time_fn,
                            verify_timelike_gradient)
from .geodesics import (CurveSample, EscapeReport, IntegrationBlowupError,
                        cw_geodesic_closed_form, cw_geodesic_curve, geodesic_rhs,
                        integrate_geodesic, null_escape_integrate,
                        sample_causal_curve, sample_causal_curve_cw)
from .reachability import (CausalImageReport, CompactnessReport, DiamondResult,
                           GridSpec, LOWER, ScalingComparison, UPPER,
                           ValueFunction, VERDICT_BOUNDED, VERDICT_CLIPPED,
                           VERDICT_EMPTY, check_causal_image, compute_diamond,
                           diamond_via_scaling, propagate_step, verify_compactness)

__version__ = "0.1.0"

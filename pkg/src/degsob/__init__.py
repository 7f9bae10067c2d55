"""Numerical toolkit for degenerate weighted Sobolev spaces QH^{1,p}.

Weighted norms and adaptive quadrature, quasimetric ball covers, weight
class estimators (doubling, A_p, balance), Poincare/Sobolev probes and two
explicit counterexample families.
"""
from .errors import (DefinitenessError, DegenerateBallError, DegsobError, DivergenceVerdict,
                     EvaluationError, ParameterError, PreconditionError, RadiusError)
from .fields import (Ball, BoxDomain, Face, MatrixField, Point, ScalarField, WeightField,
                     check_ellipticity, cone_bump, constant, constant_weight, diag_power_matrix,
                     identity_matrix, monomial, polynomial_family, power_weight, sine_mode,
                     smooth_bump)
from .quadrature import (NormReport, QuadratureResult, ball_mass, integrate, qh1p_norm,
                         v_average, weighted_lp_norm)
from .cover import (BallCover, QuasiMetricSpace, euclidean, finite_overlap_cover,
                    geometric_doubling_probe, power_euclidean, verify_quasimetric)
from .weightclass import (ap_constant, balance_check, check_admissible, doubling_constant,
                          q_search)
from .probes import (ProbeReport, compat_ratio, extract_subsequence, global_sobolev_ratio,
                     poincare_ratio, poincare_vanishing_probe, sobolev_ratio)
from .counterexamples import (ExampleAParams, ExampleBParams, build_example_a, build_example_b,
                              verify_a_cauchy, verify_a_divergence, verify_b_bounds,
                              verify_b_gradient_bound, verify_b_noncompact)

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "BallCover",
    "BoxDomain",
    "DefinitenessError",
    "DegenerateBallError",
    "DegsobError",
    "DivergenceVerdict",
    "EvaluationError",
    "ExampleAParams",
    "ExampleBParams",
    "Face",
    "MatrixField",
    "NormReport",
    "ParameterError",
    "Point",
    "PreconditionError",
    "ProbeReport",
    "QuadratureResult",
    "QuasiMetricSpace",
    "RadiusError",
    "ScalarField",
    "WeightField",
    "ap_constant",
    "balance_check",
    "ball_mass",
    "build_example_a",
    "build_example_b",
    "check_admissible",
    "check_ellipticity",
    "compat_ratio",
    "cone_bump",
    "constant",
    "constant_weight",
    "diag_power_matrix",
    "doubling_constant",
    "euclidean",
    "extract_subsequence",
    "finite_overlap_cover",
    "geometric_doubling_probe",
    "global_sobolev_ratio",
    "identity_matrix",
    "integrate",
    "monomial",
    "poincare_ratio",
    "poincare_vanishing_probe",
    "polynomial_family",
    "power_euclidean",
    "power_weight",
    "q_search",
    "qh1p_norm",
    "sine_mode",
    "smooth_bump",
    "sobolev_ratio",
    "v_average",
    "verify_a_cauchy",
    "verify_a_divergence",
    "verify_b_bounds",
    "verify_b_gradient_bound",
    "verify_b_noncompact",
    "verify_quasimetric",
    "weighted_lp_norm",
]

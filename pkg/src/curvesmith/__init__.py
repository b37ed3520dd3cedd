"""curvesmith: decide whether a curve admits a twice continuously
differentiable parametrization, and build one when it does."""

from .config import Config, DEFAULT
from .curve_model import (CurveSource, IntervalSet, ScalarFunction,
                          build_curve, cantor_phase_curve, circle_arc,
                          derivative, harmonic_phase_curve, line_curve,
                          odm_curve, precompose, spiral_curve)
from .decision import (AnalysisReport, CurvatureIntegral, SingularSetEstimate,
                       decide, detect_singular_set, lebedev_check,
                       lp_half_variation, monotone_tail_decide,
                       sqrt_curvature_integral)
from .errors import (CertificateFailure, CurvesmithError, DegenerateComponent,
                     HypothesisViolated, IntegrationFailure, InvalidDescriptor,
                     InvalidParameter, MonotonicityNotDetected, NonConvergent,
                     OutOfDomain, PreconditionFailure, RootNotBracketed,
                     StallDetected)
from .partition import (CurvatureField, GeneralizedPartition,
                        PartitionCertificate, greedy_partition,
                        half_variation_lower_bound, sqrt_variation_sum,
                        verify_partition)
from .variation import (VariationProfile, arc_length_associate,
                        image_null_test, total_variation)

__version__ = "0.1.0"

__all__ = [
    "Config", "DEFAULT", "CurveSource", "IntervalSet", "ScalarFunction",
    "build_curve", "cantor_phase_curve", "circle_arc", "derivative",
    "harmonic_phase_curve", "line_curve", "odm_curve", "precompose",
    "spiral_curve", "AnalysisReport", "CurvatureIntegral",
    "SingularSetEstimate", "decide", "detect_singular_set", "lebedev_check",
    "lp_half_variation", "monotone_tail_decide", "sqrt_curvature_integral",
    "CurvatureField", "GeneralizedPartition", "PartitionCertificate",
    "greedy_partition", "half_variation_lower_bound", "sqrt_variation_sum",
    "verify_partition", "VariationProfile", "arc_length_associate",
    "image_null_test", "total_variation", "CurvesmithError", "OutOfDomain",
    "InvalidParameter", "InvalidDescriptor", "IntegrationFailure",
    "NonConvergent", "DegenerateComponent", "StallDetected",
    "RootNotBracketed", "CertificateFailure", "HypothesisViolated",
    "PreconditionFailure", "MonotonicityNotDetected", "__version__",
]

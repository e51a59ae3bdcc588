"""geolab: geodesic experiments on doubled polygons, tubes, and ellipsoids."""

from .verify import (ClosedCurve, DistanceOracle, ToleranceConfig,
                     VerificationReport, curve_length, diameter_cutoff,
                     metric_axiom_check, verify_one_over_k)

__version__ = "0.1.0"

__all__ = [
    "ClosedCurve", "DistanceOracle", "ToleranceConfig", "VerificationReport",
    "curve_length", "diameter_cutoff", "metric_axiom_check",
    "verify_one_over_k", "__version__",
]

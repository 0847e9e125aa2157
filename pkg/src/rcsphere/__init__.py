"""Recentered confidence spheres for a multivariate normal mean."""

from .known import QuadratureConfig, RcsKnown, coverage, sev
from .knots import ConstantD, JamesSteinPlus, JamesSteinPlusUnknown, KnotFunction
from .unknown import OuterQuadConfig, RcsUnknown, coverage_unknown, sev_unknown

__version__ = "0.1.0"

__all__ = [
    "ConstantD", "JamesSteinPlus", "JamesSteinPlusUnknown", "KnotFunction", "OuterQuadConfig",
    "QuadratureConfig", "RcsKnown", "RcsUnknown", "coverage", "coverage_unknown", "sev", "sev_unknown",
]

"""Casimir pressure from Lifshitz theory and comparison with measurements."""

__version__ = "0.1.0"

from .comparison import (ConfidenceSpec, ExperimentDataset, band_cross_overlap,  # noqa: E402
                         difference_analysis, normality_probe, patch_area_check,
                         read_experiment)
from .lifshitz import (QuadratureSettings, ideal_metal_pressure, pressure_curve,  # noqa: E402
                       pressure_matsubara, pressure_T0)
from .roughness import RoughnessProfile, rough_pressure  # noqa: E402

__all__ = [
    "ConfidenceSpec", "ExperimentDataset", "QuadratureSettings", "RoughnessProfile",
    "band_cross_overlap", "difference_analysis", "ideal_metal_pressure",
    "normality_probe", "patch_area_check", "pressure_T0", "pressure_curve",
    "pressure_matsubara", "read_experiment", "rough_pressure",
]

from .graph import (
    AdmissibleCap, AnalyticGraph, CurvatureData, HGradient, curvature_data,
    find_admissible_cap, h_eval, h_gradient, is_asymptotic, normal_curvature,
    split_direction, tangency_point, unit_normal
)
from .patch import (
    BumpSpec, ComplexPatch, build_patch, gauss_legendre, stationary_residuals
)

__all__ = [
    "AdmissibleCap", "AnalyticGraph", "BumpSpec", "ComplexPatch",
    "CurvatureData", "HGradient", "build_patch", "curvature_data",
    "find_admissible_cap", "gauss_legendre", "h_eval", "h_gradient",
    "is_asymptotic", "normal_curvature", "split_direction",
    "stationary_residuals", "tangency_point", "unit_normal",
]

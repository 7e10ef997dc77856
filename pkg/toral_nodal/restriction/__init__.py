from toral_nodal.types import Cap
from toral_nodal.utils import reflect

from .caps import (
    CapPropagation, EpsilonEstimate, cap_propagate, check_cap_preconditions,
    epsilon_d, estimate_epsilon, reflected_set
)
from .certificate import (
    BaseCaseBound, Certificate, base_case_bound, choose_frame, default_params,
    lower_bound_certificate, mean_square
)
from .real import (
    RestrictionSample, circle_arc_sample, real_restriction_norm,
    restriction_ratios, segment_sample, sup_on_sample
)

__all__ = [
    "BaseCaseBound", "Cap", "CapPropagation", "Certificate", "EpsilonEstimate",
    "RestrictionSample", "base_case_bound", "cap_propagate",
    "check_cap_preconditions", "choose_frame", "circle_arc_sample",
    "default_params", "epsilon_d", "estimate_epsilon",
    "lower_bound_certificate", "mean_square", "real_restriction_norm",
    "reflect", "reflected_set", "restriction_ratios", "segment_sample",
    "sup_on_sample",
]

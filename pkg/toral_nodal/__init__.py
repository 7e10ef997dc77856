from .eigenfun import Eigenfunction, ShiftFrame, random_eigenfunction
from .lattice import ClusterParams, cluster_decompose, enumerate_shell
from .restriction import lower_bound_certificate, mean_square
from .surface import AnalyticGraph, build_patch
from .utils import InputInvalidError, NumericalFailure, ToralNodalError
from .command import cli, run

__all__ = [
    "AnalyticGraph", "ClusterParams", "Eigenfunction", "InputInvalidError",
    "NumericalFailure", "ShiftFrame", "ToralNodalError", "build_patch", "cli",
    "cluster_decompose", "enumerate_shell", "lower_bound_certificate",
    "mean_square", "random_eigenfunction", "run",
]

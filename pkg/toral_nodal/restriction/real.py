import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from toral_nodal.eigenfun import Eigenfunction, evaluate
from toral_nodal.surface import gauss_legendre
from toral_nodal.utils import InputInvalidError, check_positive

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RestrictionSample:
    """Points on a curve or surface in T^d with arclength/area weights."""
    points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if len(self.points) != len(self.weights):
            raise InputInvalidError("points and weights differ in length")
        if np.any(self.weights < 0):
            raise InputInvalidError("negative quadrature weight")

    @property
    def measure(self) -> float:
        return float(np.sum(self.weights))


def circle_arc_sample(
    center: Sequence[float],
    radius: float,
    theta0: float,
    theta1: float,
    n: int
) -> RestrictionSample:
    check_positive("radius", radius)
    if not theta1 > theta0:
        raise InputInvalidError(f"empty arc [{theta0}, {theta1}]")
    theta, w = gauss_legendre(n, theta0, theta1)
    center = np.asarray(center, dtype=float)
    points = center + radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return RestrictionSample(points=points, weights=radius * w)


def segment_sample(
    p0: Sequence[float],
    p1: Sequence[float],
    n: int
) -> RestrictionSample:
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    length = float(np.linalg.norm(p1 - p0))
    check_positive("segment length", length)
    s, w = gauss_legendre(n, 0.0, 1.0)
    return RestrictionSample(
        points=p0 + np.outer(s, p1 - p0), weights=length * w
    )


def real_restriction_norm(sample: RestrictionSample, phi: Eigenfunction) -> float:
    """int_Sigma |phi|^2 d sigma by quadrature."""
    if sample.points.shape[1] != phi.d:
        raise InputInvalidError(
            f"sample in R^{sample.points.shape[1]} against phi on T^{phi.d}"
        )
    values = evaluate(phi, sample.points)
    return float(sample.weights @ (np.abs(values) ** 2))


def sup_on_sample(sample: RestrictionSample, phi: Eigenfunction) -> float:
    return float(np.max(np.abs(evaluate(phi, sample.points))))


def restriction_ratios(
    sample: RestrictionSample,
    phis: Sequence[Eigenfunction]
) -> np.ndarray:
    """int_Sigma |phi|^2 / ||phi||^2 for each phi; coefficients are
    orthonormal so ||phi||^2 is the coefficient mass."""
    ratios = []
    for phi in phis:
        mass = float(np.sum(np.abs(phi.coeffs) ** 2))
        ratios.append(real_restriction_norm(sample, phi) / mass)
    ratios = np.asarray(ratios)
    if len(ratios):
        logger.info(
            f"restriction ratios over {len(ratios)} eigenfunctions: "
            f"min={ratios.min():.4g}"
        )
    return ratios


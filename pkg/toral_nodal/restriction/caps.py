"""Reflected caps and the cap growth iteration.

Reflecting a direction w in every hyperplane orthogonal to some
u in Cap(u0, delta) sweeps out a set that contains a cap; iterating
with shrunken caps grows the cap of normals until it covers the
sphere.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from toral_nodal.constants import (
    CAP_MAX_STEPS, CENTER_CANDIDATES, COVERAGE_PROBES, DEFAULT_SEED
)
from toral_nodal.types import Cap, CapFlowReport, CapStep
from toral_nodal.utils import (
    InputInvalidError, PreconditionViolated, angle_between, check_dimension,
    check_unit, unit
)

logger = logging.getLogger(__name__)


def _sample_counts(d: int) -> Tuple[int, int]:
    """(radial, angular) sample counts for Cap.sample by dimension."""
    if d == 2:
        return 400, 1
    if d == 3:
        return 40, 96
    return 20, 256


def _nearest_angle(tree: cKDTree, y: np.ndarray) -> np.ndarray:
    chord, _ = tree.query(y)
    return 2.0 * np.arcsin(np.minimum(chord / 2.0, 1.0))


@dataclass(frozen=True)
class EpsilonEstimate:
    w1: np.ndarray
    epsilon: float
    resolution: float
    reflected: np.ndarray = field(repr=False)


def reflected_set(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """tau_u(w) for every row u."""
    return w - 2.0 * (u @ w)[:, None] * u


def estimate_epsilon(
    d: int,
    u0: Sequence[float],
    delta: float,
    w: Sequence[float],
    probes: int = COVERAGE_PROBES,
    seed: int = DEFAULT_SEED
) -> EpsilonEstimate:
    """Largest cap inside {tau_u w : u in Cap(u0, delta)}.

    A probe direction counts as covered when it lies within the sampling
    resolution of a reflected point; a center's epsilon is the angle to
    the nearest uncovered probe less that resolution. The spherical mean
    is tried first, then a subsample of reflected points: for d >= 3 and
    w orthogonal to u0 the set pinches at its mean.
    """
    d = check_dimension(d)
    u0 = check_unit(u0, tol=1e-9)
    w = check_unit(w, tol=1e-9)
    if len(u0) != d or len(w) != d:
        raise InputInvalidError(f"directions must lie in R^{d}")
    if not 0.0 < delta < math.pi / 2:
        raise InputInvalidError(f"delta must lie in (0, pi/2), got {delta}")

    n_radial, n_angular = _sample_counts(d)
    u = Cap.around(u0, delta).sample(n_radial, n_angular, seed)
    reflected = reflected_set(u, w)
    mean = unit(reflected.mean(axis=0))
    tree = cKDTree(reflected)
    spacing, _ = tree.query(reflected, k=2)
    resolution = float(2.0 * np.arcsin(np.minimum(spacing[:, 1].max() / 2, 1.0)))

    reach = min(float(angle_between(reflected, mean).max()) + 2 * resolution, math.pi)
    candidates = Cap.around(mean, reach).probe(probes, seed)
    uncovered = candidates[_nearest_angle(tree, candidates) > resolution]
    stride = max(1, len(reflected) // CENTER_CANDIDATES)
    centers = np.vstack([mean[None, :], reflected[::stride]])
    # a center's cap must stay inside the probed region
    edges = reach - angle_between(centers, mean)
    if len(uncovered):
        gaps = np.arccos(np.clip(centers @ uncovered.T, -1.0, 1.0))
        edges = np.minimum(edges, gaps.min(axis=1))
    best = int(np.argmax(edges))
    w1 = centers[best]
    epsilon = max(float(edges[best]) - resolution, 0.0)
    logger.debug(
        f"epsilon({delta:.4g}) at w={np.round(w, 4).tolist()}: {epsilon:.5g} "
        f"(resolution {resolution:.2e})"
    )
    return EpsilonEstimate(
        w1=w1, epsilon=epsilon, resolution=resolution, reflected=reflected
    )


def epsilon_d(d: int, delta: float, base_points: int = 5) -> float:
    """min of estimate_epsilon over base points at angles 0..pi/2 from u0."""
    d = check_dimension(d)
    u0 = np.zeros(d)
    u0[-1] = 1.0
    e1 = np.zeros(d)
    e1[0] = 1.0
    best = math.inf
    for alpha in np.linspace(0.0, math.pi / 2, base_points):
        w = math.cos(alpha) * u0 + math.sin(alpha) * e1
        best = min(best, estimate_epsilon(d, u0, delta, w).epsilon)
    return best


@dataclass(frozen=True)
class CapPropagation:
    delta0: float
    delta1: float
    epsilon_d: float
    caps: Tuple[Cap, ...]
    steps: Tuple[CapStep, ...]
    full_sphere: bool

    @property
    def step_bound(self) -> int:
        return math.ceil(math.pi / self.delta0)

    def document(self) -> CapFlowReport:
        return CapFlowReport(
            delta0=self.delta0,
            delta1=self.delta1,
            epsilon_d=self.epsilon_d,
            steps=list(self.steps),
            full_sphere=self.full_sphere,
            step_bound=self.step_bound,
        )


def check_cap_preconditions(
    d: int,
    delta1: float,
    delta0: float
) -> float:
    """Return epsilon_d(delta1 / 2) once delta0 is known to be small enough."""
    if not 0 < delta0 < delta1 / 2:
        raise PreconditionViolated(
            f"need 0 < delta0 < delta1/2, got delta0={delta0} delta1={delta1}"
        )
    eps = epsilon_d(d, delta1 / 2)
    if not delta0 < eps / 6:
        raise PreconditionViolated(
            f"need delta0 < epsilon_d/6 = {eps / 6:.5g}, got {delta0}",
            epsilon=eps,
        )
    return eps


def cap_propagate(
    omega0: Cap,
    u0: Sequence[float],
    delta1: float,
    delta0: float,
    max_steps: int = CAP_MAX_STEPS,
    probes: int = COVERAGE_PROBES,
    seed: int = DEFAULT_SEED,
    eps: Optional[float] = None
) -> CapPropagation:
    """Grow Omega_0 by reflected caps Cap(tau_u w_k, theta_k - 5 delta0).

    Each step is probe-checked: every probe of the new cap must lie within
    theta_k - 5 delta0 (plus the sampling resolution) of a reflected center.
    """
    d = omega0.dimension
    u0 = check_unit(u0, tol=1e-9)
    if eps is None:
        eps = check_cap_preconditions(d, delta1, delta0)
    w, theta = omega0.vector, omega0.angle
    caps = [omega0]
    steps = []
    full = theta >= math.pi
    for k in range(max_steps):
        if full:
            break
        estimate = estimate_epsilon(d, u0, delta1 / 2, w, probes, seed)
        shrunk = theta - 5 * delta0
        if shrunk <= estimate.resolution:
            raise PreconditionViolated(
                f"cap angle {theta:.4g} does not exceed 5 delta0",
                epsilon=estimate.epsilon,
            )
        grown = min(math.pi, shrunk + estimate.epsilon)
        candidates = Cap.around(estimate.w1, grown).probe(probes, seed + k)
        reach = _nearest_angle(cKDTree(estimate.reflected), candidates)
        covered = bool(np.all(reach <= shrunk + estimate.resolution + 1e-12))
        steps.append(CapStep(
            center=estimate.w1.tolist(),
            angle=grown,
            epsilon=estimate.epsilon,
            growth=grown - theta,
            covered=covered,
        ))
        logger.debug(f"step {k}: theta {theta:.5f} -> {grown:.5f}")
        if not covered or grown < min(math.pi, theta + delta0):
            logger.warning(
                f"cap growth stalled at step {k}: theta={grown:.5f}, "
                f"covered={covered}"
            )
            break
        w, theta = estimate.w1, grown
        caps.append(Cap.around(w, theta))
        full = theta >= math.pi
    logger.info(
        f"cap propagation: {len(steps)} steps, full sphere={full}"
    )
    return CapPropagation(
        delta0=delta0,
        delta1=delta1,
        epsilon_d=eps,
        caps=tuple(caps),
        steps=tuple(steps),
        full_sphere=full,
    )

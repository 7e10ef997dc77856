import math

import numpy as np
import pytest

from toral_nodal.restriction import (
    Cap, cap_propagate, check_cap_preconditions, epsilon_d, estimate_epsilon,
    reflect, reflected_set
)
from toral_nodal.utils import InputInvalidError, PreconditionViolated

E1 = (1.0, 0.0)
E2 = (0.0, 1.0)


def test_reflected_set() -> None:
    u = np.array([E1, E2])
    reflected = reflected_set(u, np.array([0.6, 0.8]))
    assert reflected == pytest.approx(np.array([[-0.6, 0.8], [0.6, -0.8]]))
    assert reflected[0] == pytest.approx(reflect(E1, np.array([0.6, 0.8])))


@pytest.mark.parametrize("delta", [0.05, 0.1, 0.2])
def test_planar_epsilon_is_twice_delta(delta: float) -> None:
    estimate = estimate_epsilon(2, E2, delta, E1)
    assert estimate.epsilon == pytest.approx(2 * delta, rel=0.02)
    assert np.linalg.norm(estimate.w1) == pytest.approx(1.0)
    assert estimate.resolution < 0.01 * delta


def test_estimate_epsilon_rejects() -> None:
    with pytest.raises(InputInvalidError):
        estimate_epsilon(2, E2, 2.0, E1)
    with pytest.raises(InputInvalidError):
        estimate_epsilon(3, E2, 0.1, E1)


def test_reflected_cap_around_the_antipode() -> None:
    # tau_u(u0) sweeps the cap of angle 2 delta around -u0
    estimate = estimate_epsilon(3, (0.0, 0.0, 1.0), 0.2, (0.0, 0.0, 1.0))
    assert estimate.epsilon == pytest.approx(0.4, rel=0.1)
    assert estimate.w1[2] < -0.99


def test_epsilon_d_is_the_smallest_estimate() -> None:
    u0 = (0.0, 0.0, 1.0)
    assert 0 <= epsilon_d(3, 0.2) <= estimate_epsilon(3, u0, 0.2, u0).epsilon


@pytest.mark.parametrize(
    "delta1, delta0",
    [(0.4, 0.2), (0.4, 0.3), (0.4, 0.0), (0.4, 0.15)]
)
def test_cap_preconditions(delta1: float, delta0: float) -> None:
    with pytest.raises(PreconditionViolated):
        check_cap_preconditions(2, delta1, delta0)


def test_cap_propagation_covers_the_circle() -> None:
    delta1 = 0.4
    eps = check_cap_preconditions(2, delta1, 0.05)
    assert eps == pytest.approx(0.4, rel=0.02)
    result = cap_propagate(Cap.around(E1, 0.5), E2, delta1, 0.05, eps=eps)
    assert result.full_sphere
    assert len(result.steps) <= result.step_bound == math.ceil(math.pi / 0.05)
    assert all(step.covered for step in result.steps)
    assert all(step.growth >= result.delta0 for step in result.steps[:-1])
    assert result.caps[-1].angle == pytest.approx(math.pi)
    document = result.document()
    assert document.full_sphere
    assert document.step_bound == result.step_bound
    assert len(document.steps) == len(result.steps)


def test_cap_propagation_needs_a_wide_start() -> None:
    with pytest.raises(PreconditionViolated):
        cap_propagate(Cap.around(E1, 0.1), E2, 0.4, 0.05, eps=0.4)

import math
from fractions import Fraction

import numpy as np
import pytest

from toral_nodal.utils import (
    DegenerateInput, InputInvalidError, NumericalFailure, PreconditionViolated,
    ToralNodalError, angle_between, as_fraction, cauchy_riemann_residual,
    check_dimension, check_positive, check_unit, parallel_map, reflect,
    thread_count, unit
)

SEED = 42


def test_error_hierarchy() -> None:
    assert issubclass(PreconditionViolated, InputInvalidError)
    assert issubclass(InputInvalidError, ValueError)
    assert issubclass(NumericalFailure, ToralNodalError)
    assert not issubclass(NumericalFailure, InputInvalidError)
    assert PreconditionViolated("eps", epsilon=0.1).epsilon == 0.1


@pytest.mark.parametrize("d, minimum", [(1, 2), (2.5, 2), (0, 1)])
def test_check_dimension_rejects(d, minimum: int) -> None:
    with pytest.raises(InputInvalidError):
        check_dimension(d, minimum)


def test_checks() -> None:
    assert check_dimension(3.0) == 3
    check_positive("tau", 0.1)
    with pytest.raises(InputInvalidError):
        check_positive("tau", 0)
    assert check_unit([0.6, 0.8]) == pytest.approx([0.6, 0.8])
    with pytest.raises(InputInvalidError):
        check_unit([0.6, 0.81])


@pytest.mark.parametrize(
    "value, expected",
    [("1/4", Fraction(1, 4)), (0.5, Fraction(1, 2)), (3, Fraction(3))]
)
def test_as_fraction(value, expected: Fraction) -> None:
    assert as_fraction(value) == expected


@pytest.mark.parametrize("value", ["a/b", "1/0", None])
def test_as_fraction_rejects(value) -> None:
    with pytest.raises(InputInvalidError):
        as_fraction(value)


def test_unit_and_angles() -> None:
    assert unit([3.0, 4.0]) == pytest.approx([0.6, 0.8])
    with pytest.raises(DegenerateInput):
        unit([0.0, 0.0])
    a = np.array([1.0, 0.0])
    assert angle_between(a, a) == 0.0
    assert angle_between(a, -a) == pytest.approx(math.pi)
    assert angle_between(a, [0.0, 1.0]) == pytest.approx(math.pi / 2)


def test_reflect() -> None:
    rng = np.random.default_rng(SEED)
    for _ in range(20):
        u = unit(rng.standard_normal(4))
        x = rng.standard_normal(4)
        assert reflect(u, u) == pytest.approx(-u, abs=1e-14)
        assert reflect(u, reflect(u, x)) == pytest.approx(x, abs=1e-14)
        assert np.linalg.norm(reflect(u, x)) == pytest.approx(np.linalg.norm(x))
    stack = rng.standard_normal((5, 4))
    assert reflect(u, stack)[2] == pytest.approx(reflect(u, stack[2]))


def test_two_reflections_rotate_by_twice_the_angle() -> None:
    rng = np.random.default_rng(SEED)
    for _ in range(20):
        alpha = rng.uniform(0.0, math.pi / 2)
        u = np.array([1.0, 0.0])
        u1 = np.array([math.cos(alpha), math.sin(alpha)])
        x = unit(rng.standard_normal(2))
        y = reflect(u, reflect(u1, x))
        assert angle_between(x, y) == pytest.approx(
            min(2 * alpha, 2 * math.pi - 2 * alpha), abs=1e-12
        )


def test_cauchy_riemann_residual() -> None:
    assert cauchy_riemann_residual(
        lambda z: np.exp(z[0]) * np.sin(z[1]), np.array([0.1 + 0.2j, 0.3])
    ) < 1e-8
    assert cauchy_riemann_residual(
        lambda z: np.conj(z[0]), np.array([0.1 + 0.2j])
    ) > 1.0


def test_thread_count(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("TORAL_NODAL_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("TORAL_NODAL_THREADS", "0")
    assert thread_count() == 1
    monkeypatch.setenv("TORAL_NODAL_THREADS", "many")
    with pytest.raises(InputInvalidError):
        thread_count()


@pytest.mark.parametrize("threads", ["1", "4"])
def test_parallel_map_keeps_order(
    monkeypatch: pytest.MonkeyPatch, threads: str
) -> None:
    monkeypatch.setenv("TORAL_NODAL_THREADS", threads)
    assert parallel_map(lambda k: k * k, range(50)) == [k * k for k in range(50)]
    assert parallel_map(str, []) == []

import math
import random
from fractions import Fraction
from itertools import product
from typing import List, Tuple

import numpy as np
import pytest
from pydantic import ValidationError

from toral_nodal.lattice import (
    ClusterParams, affine_rank, cap_points, cluster_decompose, enumerate_shell,
    grow_overset, jarnik_scan, max_chain_length, proximity_components,
    proximity_pairs, recursion_constants, shell_stats
)
from toral_nodal.utils import InputInvalidError, ResourceLimitExceeded


def brute_shell(d: int, r2: int) -> List[Tuple[int, ...]]:
    bound = math.isqrt(r2)
    return sorted(
        p for p in product(range(-bound, bound + 1), repeat=d)
        if sum(v * v for v in p) == r2
    )


def brute_count2(r2: int) -> int:
    bound = math.isqrt(r2)
    count = 0
    for x in range(-bound, bound + 1):
        rest = r2 - x * x
        y = math.isqrt(rest)
        if y * y == rest:
            count += 1 if y == 0 else 2
    return count


@pytest.mark.parametrize(
    "d, r2, count",
    [
        (2, 1, 4),
        (2, 2, 4),
        (2, 3, 0),
        (2, 25, 12),
        (2, 65, 16),
        (2, 5525, 48),
        (3, 3, 8),
        (3, 7, 0),
        (3, 9, 30),
        (4, 1, 8),
    ],
)
def test_shell_counts(d: int, r2: int, count: int) -> None:
    shell = enumerate_shell(d, r2)
    assert len(shell) == count
    assert shell.tuples == brute_shell(d, r2)


def test_shell_matches_brute_force_in_the_plane() -> None:
    for r2 in range(1, 10 ** 4 + 1, 7):
        assert len(enumerate_shell(2, r2)) == brute_count2(r2)


def test_shell_is_sorted_and_symmetric() -> None:
    shell = enumerate_shell(3, 50)
    assert shell.tuples == sorted(shell.tuples)
    points = set(shell.tuples)
    assert all(tuple(-v for v in p) in points for p in points)
    assert all(shell.contains(p) for p in points)
    assert not shell.contains((1, 2, 3))


@pytest.mark.parametrize("d, r2", [(1, 4), (2, 0), (2, -3), (2, 2.5)])
def test_shell_rejects_invalid_input(d: int, r2: float) -> None:
    with pytest.raises(InputInvalidError):
        enumerate_shell(d, r2)


def test_shell_visit_budget() -> None:
    with pytest.raises(ResourceLimitExceeded):
        enumerate_shell(3, 10 ** 4, max_visits=100)


def test_shell_stats() -> None:
    stats = shell_stats(enumerate_shell(2, 25))
    assert stats.count == 12
    # (3, 4) and (4, 3)
    assert stats.min_distance2 == 2
    assert stats.diameter2 == 100


@pytest.mark.parametrize(
    "d, c, delta",
    [
        (2, Fraction(0), Fraction(1, 4)),
        (3, Fraction(24), Fraction(1, 200)),
        (4, Fraction(1600), Fraction(1, 16010)),
    ],
)
def test_recursion_constants(d: int, c: Fraction, delta: Fraction) -> None:
    assert recursion_constants(d, Fraction(1, 4)) == (c, delta)


@pytest.mark.parametrize("delta2", ["0", "1/3", "1/2", -1])
def test_recursion_constants_rejects_delta2(delta2: str) -> None:
    with pytest.raises(InputInvalidError):
        recursion_constants(3, delta2)


def test_cluster_params() -> None:
    params = ClusterParams(rho=2.0, delta2="1/4")
    assert params.delta2 == Fraction(1, 4)
    assert params.c[4] == 1600
    assert params.document().delta[3] == "1/200"
    assert params.with_rho(3.0).rho == 3.0
    with pytest.raises(ValidationError):
        ClusterParams(rho=0.0)
    with pytest.raises(ValidationError):
        ClusterParams(rho=1.0, delta2="1/2")


def test_cap_points() -> None:
    shell = enumerate_shell(2, 25)
    cap = cap_points(shell, (1.0, 0.0), 1.5)
    assert [shell.tuples[i] for i in cap] == [(5, 0)]
    assert cap_points(shell, (0.0, 1.0), 0) == ()
    assert len(cap_points(shell, (0.0, 1.0), 10.0)) == 12
    with pytest.raises(InputInvalidError):
        cap_points(shell, (1.0, 1.0), 1.0)


@pytest.mark.parametrize(
    "points, rank",
    [
        ([(1, 2)], 0),
        ([(1, 2), (1, 2)], 0),
        ([(1, 2), (3, 4)], 1),
        ([(0, 0), (1, 1), (2, 2)], 1),
        ([(0, 0), (1, 0), (0, 1)], 2),
        ([(1, 0, 0), (0, 1, 0), (0, 0, 1)], 2),
    ],
)
def test_affine_rank(points: list, rank: int) -> None:
    assert affine_rank(points) == rank


def test_jarnik_small_caps_have_no_violations() -> None:
    rng = random.Random(42)
    for r2 in rng.sample(range(1, 10 ** 6 + 1), 200):
        radius = 0.5 * r2 ** (1 / 6)
        report = jarnik_scan(enumerate_shell(2, r2), radius)
        assert report.violations == []
        assert report.caps_scanned == brute_count2(r2)


def test_jarnik_large_caps_report_violations() -> None:
    report = jarnik_scan(enumerate_shell(2, 25), 20.0)
    assert report.violations
    assert all(v.rank == 2 for v in report.violations)


def test_proximity_pairs_are_exact() -> None:
    shell = enumerate_shell(2, 25)
    pairs = proximity_pairs(shell, math.sqrt(2))
    assert len(pairs) == 4
    assert all(shell.distance2(int(i), int(j)) == 2 for i, j in pairs)


def _check_decomposition(shell, decomposition, rho: float) -> None:
    members = sorted(i for c in decomposition.clusters for i in c)
    assert members == list(range(len(shell)))
    label = np.empty(len(shell), dtype=int)
    for k, cluster in enumerate(decomposition.clusters):
        label[list(cluster)] = k
    diff = shell.points[:, None, :] - shell.points[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    foreign = label[:, None] != label[None, :]
    assert np.all(d2[foreign] > rho * rho)
    for component in proximity_components(shell, rho):
        assert len({int(label[i]) for i in component}) == 1


def test_cluster_soundness_on_random_shells() -> None:
    rng = random.Random(42)
    shells = []
    while len(shells) < 50:
        d = rng.choice([2, 3])
        shell = enumerate_shell(d, rng.randint(5, 400 if d == 3 else 5000))
        if len(shell):
            shells.append(shell)
    for shell in shells:
        for rho in (1.0, 1.5, 3.0, 7.5, 20.0):
            decomposition = cluster_decompose(shell, ClusterParams(rho=rho))
            _check_decomposition(shell, decomposition, rho)
            if len(decomposition.clusters) > 1:
                assert decomposition.min_intercluster_distance > rho


def test_cluster_document() -> None:
    shell = enumerate_shell(2, 25)
    decomposition = cluster_decompose(shell, ClusterParams(rho=1.5))
    doc = decomposition.document()
    assert doc.rho == 1.5
    assert doc.constants.c[2] == "0"
    assert sorted(i for c in doc.clusters for i in c) == list(range(12))
    # (3, 4) and (4, 3) are 2 ** 0.5 apart, the axis points are isolated
    assert sorted(len(c) for c in doc.clusters) == [1, 1, 1, 1, 2, 2, 2, 2]


def test_grow_overset() -> None:
    shell = enumerate_shell(2, 25)
    start = shell.index[(3, 4)]
    grown = grow_overset(shell, [start], 1.5)
    assert {shell.tuples[i] for i in grown} == {(3, 4), (4, 3)}
    assert len(grow_overset(shell, [start], 10.0)) == 12
    with pytest.raises(InputInvalidError):
        grow_overset(shell, [99], 1.0)


def test_max_chain_length() -> None:
    shell = enumerate_shell(2, 25)
    assert max_chain_length(shell, 1.0) == 0
    assert max_chain_length(shell, 1.5) == 1
    assert max_chain_length(shell, 10.0) >= 1

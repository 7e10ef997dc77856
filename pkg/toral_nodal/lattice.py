"""Lattice points on spheres and their cluster structure.

Every membership and distance decision is made on exact integers; floats
are only used to propose candidates (kd-tree queries) that are then
re-checked exactly.
"""
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import sympy
from pydantic import ConfigDict, field_validator
from pydantic.dataclasses import dataclass as pydantic_dataclass
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, shortest_path
from scipy.spatial import cKDTree

from toral_nodal.constants import DEFAULT_DELTA2, MAX_CANDIDATE_VISITS
from toral_nodal.types import (
    CapViolation, ConstantsDocument, JarnikReport, ShellDocument, ShellStats
)
from toral_nodal.utils import (
    InputInvalidError, ResourceLimitExceeded, as_fraction, check_dimension,
    check_positive, check_unit
)

logger = logging.getLogger(__name__)

LatticePoint = Tuple[int, ...]
IndexSet = Tuple[int, ...]


def recursion_constants(d: int, delta2: Fraction = DEFAULT_DELTA2):
    """Return ``(c(d), delta(d))`` as exact rationals.

        c(2) = 0, delta(2) = delta2
        c(d) = 2 * max(c(d-1), d / delta(d-1))
        delta(d) = 1 / (2 (d+1) (1 + c(d)))
    """
    d = check_dimension(d)
    delta2 = as_fraction(delta2)
    if not Fraction(0) < delta2 < Fraction(1, 3):
        raise InputInvalidError(f"delta2 must lie in (0, 1/3), got {delta2}")
    c, delta = Fraction(0), delta2
    for k in range(3, d + 1):
        c = 2 * max(c, k / delta)
        delta = 1 / (2 * (k + 1) * (1 + c))
    return c, delta


@pydantic_dataclass(
    frozen=True, config=ConfigDict(arbitrary_types_allowed=True)
)
class ClusterParams:
    rho: float
    delta2: Fraction = DEFAULT_DELTA2
    max_dim: int = 4

    @field_validator("delta2", mode="before")
    @classmethod
    def _rational(cls, value) -> Fraction:
        value = as_fraction(value)
        if not Fraction(0) < value < Fraction(1, 3):
            raise ValueError(f"delta2 must lie in (0, 1/3), got {value}")
        return value

    @field_validator("rho")
    @classmethod
    def _positive_rho(cls, value: float) -> float:
        if not value > 0:
            raise ValueError(f"rho must be positive, got {value}")
        return value

    @property
    def c(self) -> Dict[int, Fraction]:
        return {
            k: recursion_constants(k, self.delta2)[0]
            for k in range(2, self.max_dim + 1)
        }

    @property
    def delta(self) -> Dict[int, Fraction]:
        return {
            k: recursion_constants(k, self.delta2)[1]
            for k in range(2, self.max_dim + 1)
        }

    def with_rho(self, rho: float) -> "ClusterParams":
        return ClusterParams(
            rho=rho, delta2=self.delta2, max_dim=self.max_dim
        )

    def document(self) -> ConstantsDocument:
        return ConstantsDocument(
            c={k: str(v) for k, v in self.c.items()},
            delta={k: str(v) for k, v in self.delta.items()},
        )


@dataclass(frozen=True)
class LatticeShell:
    d: int
    r2: int
    points: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.points.setflags(write=False)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def radius(self) -> float:
        return math.sqrt(self.r2)

    @cached_property
    def tuples(self) -> List[LatticePoint]:
        return [tuple(int(v) for v in row) for row in self.points]

    @cached_property
    def index(self) -> Dict[LatticePoint, int]:
        return {p: i for i, p in enumerate(self.tuples)}

    @cached_property
    def tree(self) -> cKDTree:
        return cKDTree(self.points.astype(float))

    def contains(self, xi: Sequence[int]) -> bool:
        return sum(int(v) * int(v) for v in xi) == self.r2 and \
            len(xi) == self.d

    def distance2(self, i: int, j: int) -> int:
        diff = self.points[i] - self.points[j]
        return int(diff @ diff)

    def document(self) -> ShellDocument:
        return ShellDocument(d=self.d, r2=self.r2, points=self.tuples)


@dataclass(frozen=True)
class ClusterDecomposition:
    shell: LatticeShell = field(repr=False)
    clusters: Tuple[IndexSet, ...]
    rho: float
    diameters: Tuple[float, ...]
    min_intercluster_distance2: Optional[int]
    hypothesis_holds: bool
    params: Optional[ClusterParams] = None

    @property
    def min_intercluster_distance(self) -> float:
        if self.min_intercluster_distance2 is None:
            return math.inf
        return math.sqrt(self.min_intercluster_distance2)

    def document(self) -> ShellDocument:
        doc = self.shell.document()
        doc.clusters = [list(c) for c in self.clusters]
        doc.rho = self.rho
        doc.hypothesis_holds = self.hypothesis_holds
        if self.params is not None:
            doc.constants = self.params.document()
        return doc


class _VisitBudget:
    def __init__(self, limit: int) -> None:
        self.limit = limit
        self.visits = 0

    def spend(self, amount: int) -> None:
        self.visits += amount
        if self.visits > self.limit:
            raise ResourceLimitExceeded(
                f"shell search exceeded {self.limit} candidate visits"
            )


def _fill(
    prefix: Tuple[int, ...],
    remaining: int,
    slots: int,
    budget: _VisitBudget,
    out: List[LatticePoint]
) -> None:
    bound = math.isqrt(remaining)
    if slots == 1:
        budget.spend(1)
        if bound * bound == remaining:
            out.append(prefix + (-bound,))
            if bound:
                out.append(prefix + (bound,))
        return
    budget.spend(2 * bound + 1)
    for n in range(-bound, bound + 1):
        _fill(prefix + (n,), remaining - n * n, slots - 1, budget, out)


def enumerate_shell(
    d: int,
    r2: int,
    max_visits: int = MAX_CANDIDATE_VISITS
) -> LatticeShell:
    d = check_dimension(d)
    if int(r2) != r2 or r2 < 1:
        raise InputInvalidError(f"invalid squared radius: {r2}")
    r2 = int(r2)
    found: List[LatticePoint] = []
    _fill((), r2, d, _VisitBudget(max_visits), found)
    found.sort()
    points = np.array(found, dtype=np.int64).reshape(-1, d)
    logger.info(f"shell d={d} r2={r2}: {len(found)} points")
    return LatticeShell(d=d, r2=r2, points=points)


def shell_stats(shell: LatticeShell) -> ShellStats:
    stats = ShellStats(d=shell.d, r2=shell.r2, count=len(shell))
    if len(shell) >= 2:
        _, nearest = shell.tree.query(shell.points.astype(float), k=2)
        stats.min_distance2 = min(
            shell.distance2(i, int(j)) for i, j in enumerate(nearest[:, 1])
        )
        # the shell is symmetric under negation
        stats.diameter2 = 4 * shell.r2
    return stats


def cap_points(
    shell: LatticeShell,
    center: Sequence[float],
    euclidean_radius: float
) -> IndexSet:
    center = check_unit(center)
    if euclidean_radius < 0:
        raise InputInvalidError(f"negative cap radius: {euclidean_radius}")
    if euclidean_radius == 0 or not len(shell):
        return ()
    if euclidean_radius >= 2 * shell.radius:
        return tuple(range(len(shell)))
    offsets = shell.points - shell.radius * center
    inside = np.einsum("ij,ij->i", offsets, offsets) < euclidean_radius ** 2
    return tuple(int(i) for i in np.flatnonzero(inside))


def affine_rank(points: Sequence[Sequence[int]]) -> int:
    points = [tuple(int(v) for v in p) for p in points]
    if not points:
        raise InputInvalidError("affine_rank needs a nonempty point list")
    if len(points) == 1:
        return 0
    base = points[0]
    diffs = [[a - b for a, b in zip(p, base)] for p in points[1:]]
    if len(points) == 2:
        return int(any(diffs[0]))
    return int(sympy.Matrix(diffs).rank())


def jarnik_scan(shell: LatticeShell, cap_radius: float) -> JarnikReport:
    check_positive("cap_radius", cap_radius)
    report = JarnikReport(
        d=shell.d, r2=shell.r2, cap_radius=cap_radius,
        caps_scanned=len(shell)
    )
    if not len(shell):
        return report
    limit2 = cap_radius * cap_radius
    neighbours = shell.tree.query_ball_point(
        shell.points.astype(float), r=cap_radius * (1 + 1e-12)
    )
    for i, members in enumerate(neighbours):
        cap = sorted(j for j in members if shell.distance2(i, j) < limit2)
        if len(cap) <= shell.d:
            continue
        rank = affine_rank([shell.tuples[j] for j in cap])
        if rank <= shell.d - 1:
            continue
        reason = "not contained in an affine hyperplane"
        if shell.d == 2:
            reason = f"{len(cap)} non-collinear points"
        report.violations.append(
            CapViolation(center_index=i, points=cap, rank=rank, reason=reason)
        )
    logger.info(
        f"jarnik scan r2={shell.r2} radius={cap_radius:.4g}: "
        f"{len(report.violations)} violations"
    )
    return report


def _rho2(rho: float) -> Fraction:
    return Fraction(rho) ** 2


def proximity_pairs(shell: LatticeShell, rho: float) -> np.ndarray:
    """Index pairs i<j with |xi_i - xi_j| <= rho, exactly."""
    if len(shell) < 2:
        return np.empty((0, 2), dtype=np.int64)
    candidates = shell.tree.query_pairs(
        r=rho * (1 + 1e-9) + 1e-9, output_type="ndarray"
    )
    if not len(candidates):
        return np.empty((0, 2), dtype=np.int64)
    diff = shell.points[candidates[:, 0]] - shell.points[candidates[:, 1]]
    d2 = np.einsum("ij,ij->i", diff, diff)
    rho2 = _rho2(rho)
    keep = np.array([Fraction(int(v)) <= rho2 for v in d2], dtype=bool)
    pairs = np.sort(candidates[keep], axis=1)
    return pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]


def _adjacency(shell: LatticeShell, rho: float) -> List[List[int]]:
    adjacency: List[List[int]] = [[] for _ in range(len(shell))]
    for i, j in proximity_pairs(shell, rho):
        adjacency[int(i)].append(int(j))
        adjacency[int(j)].append(int(i))
    return adjacency


def _grow(
    adjacency: List[List[int]],
    seed: Iterable[int],
    allowed: Optional[FrozenSet[int]] = None
) -> IndexSet:
    reached = set(seed)
    queue = deque(sorted(reached))
    while queue:
        i = queue.popleft()
        for j in adjacency[i]:
            if j in reached or (allowed is not None and j not in allowed):
                continue
            reached.add(j)
            queue.append(j)
    return tuple(sorted(reached))


def grow_overset(
    shell: LatticeShell,
    seed: Iterable[int],
    rho: float
) -> IndexSet:
    """Smallest superset T of ``seed`` with dist(T, E \\ T) > rho."""
    check_positive("rho", rho)
    seed = set(int(i) for i in seed)
    if any(i < 0 or i >= len(shell) for i in seed):
        raise InputInvalidError("seed indices outside the shell")
    return _grow(_adjacency(shell, rho), seed)


def proximity_components(shell: LatticeShell, rho: float) -> List[IndexSet]:
    check_positive("rho", rho)
    n = len(shell)
    if not n:
        return []
    pairs = proximity_pairs(shell, rho)
    graph = coo_matrix(
        (np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)
    )
    _, labels = connected_components(graph, directed=False)
    groups: Dict[int, List[int]] = {}
    for i, label in enumerate(labels):
        groups.setdefault(int(label), []).append(i)
    return sorted(tuple(g) for g in groups.values())


def seed_radius(rho: float, c: Fraction) -> float:
    """rho ** (1 + c), saturating to inf instead of overflowing."""
    exponent = (1 + float(c)) * math.log(rho)
    if exponent > 700:
        return math.inf
    return math.exp(exponent)


def hypothesis_holds(shell: LatticeShell, rho: float, delta: Fraction) -> bool:
    """Whether rho < R ** delta(d)."""
    if shell.r2 <= 1:
        return rho < 1
    return math.log(rho) < float(delta) * 0.5 * math.log(shell.r2)


def _min_intercluster(
    shell: LatticeShell,
    labels: np.ndarray
) -> Optional[int]:
    n = len(shell)
    if len(set(labels.tolist())) < 2:
        return None
    coords = shell.points.astype(float)
    best: Optional[int] = None
    pending = np.arange(n)
    k = min(n, 16)
    while len(pending):
        _, nearest = shell.tree.query(coords[pending], k=k)
        nearest = np.atleast_2d(nearest)
        unresolved = []
        for row, i in enumerate(pending):
            foreign = [j for j in nearest[row] if labels[j] != labels[i]]
            if foreign:
                d2 = min(shell.distance2(int(i), int(j)) for j in foreign)
                best = d2 if best is None else min(best, d2)
            elif k < n:
                unresolved.append(i)
        pending = np.array(unresolved, dtype=np.int64)
        k = min(n, 2 * k)
    return best


def _diameter(points: np.ndarray, block: int = 512) -> float:
    best = 0
    for start in range(0, len(points), block):
        diff = points[start:start + block, None, :] - points[None, :, :]
        best = max(best, int(np.einsum("ijk,ijk->ij", diff, diff).max()))
    return math.sqrt(best)


def cluster_decompose(
    shell: LatticeShell,
    params: ClusterParams
) -> ClusterDecomposition:
    """Greedy decomposition into rho-separated clusters.

    The lexicographically smallest remaining point seeds a ball of radius
    rho ** (1 + c(d)); the seed grows to its rho-overset inside the
    remaining points, which is emitted as a cluster.
    """
    rho = params.rho
    c, delta = recursion_constants(shell.d, params.delta2)
    radius = seed_radius(rho, c)
    adjacency = _adjacency(shell, rho)
    remaining = set(range(len(shell)))
    clusters: List[IndexSet] = []
    while remaining:
        first = min(remaining)
        seed = {first}
        if radius > 0:
            offsets = shell.points - shell.points[first]
            d2 = np.einsum("ij,ij->i", offsets, offsets)
            seed |= {i for i in remaining if d2[i] < radius * radius}
        cluster = _grow(adjacency, seed, frozenset(remaining))
        clusters.append(cluster)
        remaining.difference_update(cluster)

    labels = np.empty(len(shell), dtype=np.int64)
    diameters = []
    for label, cluster in enumerate(clusters):
        labels[list(cluster)] = label
        diameters.append(_diameter(shell.points[list(cluster)]))

    logger.info(
        f"decomposed r2={shell.r2} rho={rho:.4g} into {len(clusters)} clusters"
    )
    return ClusterDecomposition(
        shell=shell,
        clusters=tuple(clusters),
        rho=rho,
        diameters=tuple(diameters),
        min_intercluster_distance2=_min_intercluster(shell, labels),
        hypothesis_holds=hypothesis_holds(shell, rho, delta),
        params=params,
    )


def max_chain_length(shell: LatticeShell, rho: float) -> int:
    """Largest graph eccentricity over rho-proximity components.

    A lower bound for the longest rho-chain of distinct points.
    """
    check_positive("rho", rho)
    n = len(shell)
    pairs = proximity_pairs(shell, rho)
    if not len(pairs):
        return 0
    graph = coo_matrix(
        (np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)
    ).tocsr()
    longest = 0
    for component in proximity_components(shell, rho):
        if len(component) < 2:
            continue
        members = list(component)
        sub = graph[members][:, members]
        distances = shortest_path(sub, directed=False, unweighted=True)
        longest = max(longest, int(distances.max()))
    return longest

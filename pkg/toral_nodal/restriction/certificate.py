"""Mean squares on complex patches and their cluster lower bound.

All integrals run on the patch's own quadrature grid, so the certified
bound and the direct mean square are compared on identical data.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from toral_nodal.constants import BASE_CASE_DELTAS, DEFAULT_DELTA2
from toral_nodal.eigenfun import (
    Eigenfunction, ShiftFrame, shift_heights, short_support
)
from toral_nodal.lattice import (
    ClusterParams, IndexSet, LatticeShell, affine_rank, cluster_decompose,
    recursion_constants
)
from toral_nodal.oscillatory import check_frame, exponentials, gram_matrix
from toral_nodal.surface import AnalyticGraph, ComplexPatch, tangency_point
from toral_nodal.types import (
    CertificateDocument, ClusterNode, OffDiagonalEntry
)
from toral_nodal.utils import (
    BaseCaseFailure, DegenerateInput, InputInvalidError, PreconditionViolated,
    parallel_map
)

logger = logging.getLogger(__name__)


def _check_dimension(patch: ComplexPatch, phi: Eigenfunction) -> None:
    if phi.d != patch.Z.shape[1]:
        raise InputInvalidError(
            f"eigenfunction on T^{phi.d} against a patch in C^{patch.Z.shape[1]}"
        )


def mean_square(
    patch: ComplexPatch,
    phi: Eigenfunction,
    frame: ShiftFrame
) -> float:
    """int |phi^C(Z) e^{-2 pi i <xi0, Z>}|^2 against the patch weights."""
    check_frame(patch, frame)
    _check_dimension(patch, phi)
    values = exponentials(patch, frame, phi.freqs) @ phi.coeffs
    return float(patch.weights @ (np.abs(values) ** 2))


@dataclass(frozen=True)
class BaseCaseBound:
    integral: float
    constant: float
    delta: Optional[float]
    bound: float


def base_case_bound(
    patch: ComplexPatch,
    frame: ShiftFrame,
    xi: Sequence[int],
    xi_prime: Sequence[int],
    a: complex,
    a_prime: complex,
    deltas: Sequence[float] = BASE_CASE_DELTAS
) -> BaseCaseBound:
    """Certified lower bound for a two-frequency mean square.

    On S_delta = {cos 2 pi phi >= -1 + delta} the integrand is at least
    delta (A^2 + A'^2), so C = max over the delta grid of
    delta * mass(S_delta). With one amplitude zero C is the bump mass.
    """
    check_frame(patch, frame)
    xi = np.asarray(xi, dtype=np.int64)
    xi_prime = np.asarray(xi_prime, dtype=np.int64)
    if np.array_equal(xi, xi_prime):
        raise InputInvalidError("base case needs two distinct frequencies")
    freqs = np.stack([xi, xi_prime])
    heights = shift_heights(frame, freqs)
    E = exponentials(patch, frame, freqs)
    integral = float(
        patch.weights @ (np.abs(a * E[:, 0] + a_prime * E[:, 1]) ** 2)
    )
    damped = np.abs([a, a_prime]) ** 2 * np.exp(-8 * np.pi * patch.tau * heights)

    if a == 0 or a_prime == 0:
        constant, best = patch.mass, None
    else:
        phase = np.mod(patch.G @ (xi - xi_prime).astype(float), 1.0)
        cosine = np.cos(np.angle(a) - np.angle(a_prime) + 2 * np.pi * phase)
        constant, best = 0.0, None
        for delta in deltas:
            mass = float(patch.weights[cosine >= -1.0 + delta].sum())
            if delta * mass > constant:
                constant, best = delta * mass, float(delta)
    return BaseCaseBound(
        integral=integral,
        constant=float(constant),
        delta=best,
        bound=float(constant * damped.sum()),
    )


@dataclass(frozen=True)
class Certificate:
    """verdict = constant * diagonal_sum - offdiag_bound.

    ``offdiag_bound`` holds the cross-cluster mass plus the tail penalty
    for frequencies outside the short support.
    """
    diagonal_sum: float
    offdiag_bound: float
    tail_penalty: float
    constant: float
    verdict: float
    mean_square: float
    refinement_error: float
    cutoff: float
    cluster_tree: ClusterNode = field(repr=False)
    ledger: Tuple[OffDiagonalEntry, ...] = field(default=(), repr=False)
    leaves: Tuple[Tuple[Tuple[int, ...], ...], ...] = field(default=(), repr=False)

    @property
    def sound(self) -> bool:
        return self.mean_square >= self.verdict - self.refinement_error

    def document(self) -> CertificateDocument:
        return CertificateDocument(
            diagonal_sum=self.diagonal_sum,
            offdiag_bound=self.offdiag_bound,
            tail_penalty=self.tail_penalty,
            constant=self.constant,
            verdict=self.verdict,
            mean_square=self.mean_square,
            refinement_error=self.refinement_error,
            d_cutoff=self.cutoff,
            cluster_tree=self.cluster_tree,
            ledger=list(self.ledger),
        )

    def report(self) -> str:
        lines = [
            f"leaves          {len(self.leaves)}",
            f"constant C      {self.constant:.6e}",
            f"diagonal sum    {self.diagonal_sum:.6e}",
            f"off-diagonal    {self.offdiag_bound - self.tail_penalty:.6e}",
            f"tail penalty    {self.tail_penalty:.6e}",
            f"verdict         {self.verdict:.6e}",
            f"mean square     {self.mean_square:.6e}",
            f"refinement err  {self.refinement_error:.3e}",
            f"cutoff D        {self.cutoff:g}",
        ]
        return "\n".join(lines) + "\n"


def default_params(
    phi: Eigenfunction,
    delta2=DEFAULT_DELTA2
) -> ClusterParams:
    """rho = lambda ** delta(d)."""
    _, delta = recursion_constants(max(phi.d, 2), delta2)
    rho = math.exp(float(delta) * 0.5 * math.log(phi.r2)) if phi.r2 > 1 else 1.0
    return ClusterParams(rho=rho, delta2=delta2, max_dim=max(phi.d, 4))


def _split(
    shell: LatticeShell,
    members: IndexSet,
    params: ClusterParams
) -> Tuple[List[IndexSet], float, bool]:
    """Clusters of ``members``; rho is halved until the set splits."""
    sub = LatticeShell(d=shell.d, r2=shell.r2, points=shell.points[list(members)])
    rho, forced = params.rho, False
    while True:
        parts = cluster_decompose(sub, params.with_rho(rho)).clusters
        if len(parts) > 1:
            return [tuple(members[i] for i in p) for p in parts], rho, forced
        rho, forced = rho / 2, True
        logger.debug(f"{len(members)} frequencies did not split, rho -> {rho:.4g}")


def _build_tree(
    shell: LatticeShell,
    members: IndexSet,
    params: ClusterParams,
    leaves: List[Tuple[IndexSet, ClusterNode]],
    forced: bool = False
) -> ClusterNode:
    node = ClusterNode(
        frequencies=[list(shell.tuples[i]) for i in members],
        rho=params.rho,
        forced=forced,
    )
    if affine_rank([shell.tuples[i] for i in members]) <= 1:
        if len(members) > 2:
            raise BaseCaseFailure(
                f"{len(members)} collinear frequencies on one sphere"
            )
        leaves.append((members, node))
        return node
    parts, rho, split_forced = _split(shell, members, params)
    node.rho = rho
    node.forced = forced or split_forced
    child_params = params.with_rho(rho)
    node.children = [
        _build_tree(shell, part, child_params, leaves) for part in parts
    ]
    return node


def lower_bound_certificate(
    patch: ComplexPatch,
    phi: Eigenfunction,
    frame: ShiftFrame,
    params: Optional[ClusterParams] = None,
    D: Optional[float] = None,
    deltas: Sequence[float] = BASE_CASE_DELTAS
) -> Certificate:
    check_frame(patch, frame)
    _check_dimension(patch, phi)
    params = default_params(phi) if params is None else params
    support = short_support(phi, frame, D)
    if not support.indices:
        raise DegenerateInput(f"no frequency with A(xi) < {support.cutoff}")
    keep = list(support.indices)
    freqs = phi.freqs[keep]
    coeffs = phi.coeffs[keep]
    heights = shift_heights(frame, freqs)
    shell = LatticeShell(d=phi.d, r2=phi.r2, points=freqs.copy())

    leaves: List[Tuple[IndexSet, ClusterNode]] = []
    tree = _build_tree(shell, tuple(range(len(shell))), params, leaves)

    def leaf_constant(members: IndexSet) -> Tuple[float, Optional[float]]:
        if len(members) == 1:
            return patch.mass, None
        i, j = members
        result = base_case_bound(
            patch, frame, freqs[i], freqs[j], coeffs[i], coeffs[j], deltas
        )
        return result.constant, result.delta

    constants = parallel_map(leaf_constant, [m for m, _ in leaves])
    labels: Dict[int, int] = {}
    for label, ((members, node), (c, delta)) in enumerate(zip(leaves, constants)):
        node.leaf_constant = c
        node.leaf_delta = delta
        for i in members:
            labels[i] = label
    constant = min(c for c, _ in constants)

    gram = gram_matrix(patch, frame, freqs)
    amplitudes = np.abs(coeffs)
    ledger = []
    cross = 0.0
    for i in range(len(freqs)):
        for j in range(i + 1, len(freqs)):
            if labels[i] == labels[j]:
                continue
            weight = float(amplitudes[i] * amplitudes[j])
            j_abs = float(abs(gram[i, j]))
            cross += 2 * weight * j_abs
            ledger.append(OffDiagonalEntry(
                xi=list(shell.tuples[i]), xi_prime=list(shell.tuples[j]),
                weight=weight, j_abs=j_abs,
            ))

    diagonal = float(np.sum(amplitudes ** 2 * np.exp(-8 * np.pi * patch.tau * heights)))
    short_verdict = constant * diagonal - cross

    # tail: sum over A(xi) >= D of |a| e^{-2 pi tau A}, valid for t > tau
    outside = np.setdiff1d(np.arange(len(phi.freqs)), keep)
    tail = 0.0
    if len(outside):
        tail_heights = shift_heights(frame, phi.freqs[outside])
        tail = float(np.sum(
            np.abs(phi.coeffs[outside])
            * np.exp(-2 * np.pi * patch.tau * tail_heights)
        ))
    # x - 2 T sqrt(M x) increases for x >= M T^2, so the short-sum lower
    # bound may stand in for the short mean square once the verdict is positive
    penalty = 2 * math.sqrt(max(short_verdict, 0.0) * patch.mass) * tail

    direct = mean_square(patch, phi, frame)
    refined = mean_square(patch.refined(), phi, frame)
    verdict = short_verdict - penalty
    logger.info(
        f"certificate: {len(leaves)} leaves, C={constant:.4g}, "
        f"verdict={verdict:.4g}, mean square={refined:.4g}"
    )
    return Certificate(
        diagonal_sum=diagonal,
        offdiag_bound=cross + penalty,
        tail_penalty=penalty,
        constant=constant,
        verdict=verdict,
        mean_square=direct,
        refinement_error=abs(refined - direct),
        cutoff=support.cutoff,
        cluster_tree=tree,
        ledger=tuple(ledger),
        leaves=tuple(
            tuple(shell.tuples[i] for i in members) for members, _ in leaves
        ),
    )


def choose_frame(
    S: AnalyticGraph,
    phi: Eigenfunction,
    reach: float = 0.5
) -> ShiftFrame:
    """Frame at the largest coefficient whose -xi/|xi| touches S inside
    ``reach`` times the domain radius."""
    order = np.lexsort((np.arange(len(phi.coeffs)), -np.abs(phi.coeffs)))
    for k in order:
        frame = ShiftFrame.for_point(phi.freqs[k])
        try:
            x = tangency_point(S, frame.v0)
        except PreconditionViolated:
            continue
        if np.linalg.norm(x) < reach * S.domain_radius:
            logger.debug(f"frame xi0={frame.xi0} touches at {x.tolist()}")
            return frame
    raise PreconditionViolated("no frequency direction is normal to the surface")

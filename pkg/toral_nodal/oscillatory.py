"""Oscillatory integrals over complex patches and surface measures.

Phases are built from the tabulated G = Re Z of a patch so the direct
and factored forms of J use identical data.
"""
import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import linregress

from toral_nodal.constants import (
    DECAY_RATIO, GAUSS_NORMAL_SEPARATION, MAX_ORDER, MIN_ORDER,
    ORDER_PER_CYCLE
)
from toral_nodal.eigenfun import ShiftFrame, shift_heights
from toral_nodal.surface import AnalyticGraph, ComplexPatch, gauss_legendre
from toral_nodal.utils import (
    DegenerateFit, GaussMapNotInjective, InputInvalidError, MismatchedFrame,
    NumericalFailure, angle_between, check_unit, parallel_map, unit
)

logger = logging.getLogger(__name__)

MEASURE_MAX_ORDER = 1024


def check_frame(patch: ComplexPatch, frame: ShiftFrame, tol: float = 1e-9) -> None:
    gap = float(np.linalg.norm(patch.v - frame.v0))
    if gap > tol:
        raise MismatchedFrame(
            f"patch direction differs from -xi0/|xi0| for xi0={frame.xi0} "
            f"by {gap:.3g}"
        )


def exponentials(
    patch: ComplexPatch,
    frame: ShiftFrame,
    freqs: np.ndarray
) -> np.ndarray:
    """e^{2 pi i <xi - xi0, Z>} at every node, shape (nodes, len(freqs))."""
    offsets = (np.atleast_2d(freqs) - np.asarray(frame.xi0)).T.astype(float)
    phase = np.mod(patch.G @ offsets, 1.0)
    damping = -2 * np.pi * (patch.Z.imag @ offsets)
    return np.exp(2j * np.pi * phase + damping)


def gram_matrix(
    patch: ComplexPatch,
    frame: ShiftFrame,
    freqs: np.ndarray
) -> np.ndarray:
    """All J_{xi, xi'} on the patch grid as one matrix.

    sum_{xi, xi'} a_xi conj(a_xi') J_{xi, xi'} is the mean square of the
    corresponding sum, exactly on this grid.
    """
    check_frame(patch, frame)
    E = exponentials(patch, frame, freqs)
    return E.T @ (patch.weights[:, None] * E.conj())


@dataclass(frozen=True)
class OscillatoryResult:
    value: complex
    refinement_error: float
    xi: Tuple[int, ...]
    xi_prime: Tuple[int, ...]
    separation: float
    factored: complex = 0j
    identity_error: float = 0.0
    orders: Tuple[int, ...] = ()


def adaptive_orders(patch: ComplexPatch, separation: float) -> Tuple[int, ...]:
    speed = float(np.max(np.linalg.norm(patch.tangents, axis=-1))) \
        if len(patch) else 1.0
    cycles = separation * patch.param_diameter * max(speed, 1.0)
    n = max(MIN_ORDER, ORDER_PER_CYCLE * math.ceil(cycles))
    n = min(n, MAX_ORDER)
    return tuple(n for _ in patch.orders)


def _direct_and_factored(
    patch: ComplexPatch,
    frame: ShiftFrame,
    xi: np.ndarray,
    xi_prime: np.ndarray
) -> Tuple[complex, complex, float]:
    xi0 = np.asarray(frame.xi0, dtype=float)
    a = xi - xi0
    b = xi_prime - xi0
    direct = np.exp(
        2j * np.pi * (patch.Z @ a - patch.Z.conj() @ b)
    ) * patch.weights
    heights = shift_heights(frame, np.stack([xi, xi_prime]).astype(np.int64))
    factored = np.exp(
        2j * np.pi * (patch.G @ (xi - xi_prime))
        - 2 * np.pi * patch.t * heights.sum()
    ) * patch.weights
    mass = float(np.sum(np.abs(direct))) or 1.0
    error = abs(direct.sum() - factored.sum()) / mass
    return complex(direct.sum()), complex(factored.sum()), float(error)


def j_integral(
    patch: ComplexPatch,
    frame: ShiftFrame,
    xi: Sequence[int],
    xi_prime: Sequence[int],
    orders: Optional[Tuple[int, ...]] = None
) -> OscillatoryResult:
    """J_{xi, xi'} with one refinement step; the value is the finer grid's.

    ``identity_error`` is |direct - factored| relative to the integrand's
    L1 mass on the finer grid.
    """
    check_frame(patch, frame)
    xi = np.asarray(xi, dtype=np.int64)
    xi_prime = np.asarray(xi_prime, dtype=np.int64)
    shift_heights(frame, np.stack([xi, xi_prime]))
    separation = float(np.linalg.norm(xi - xi_prime))
    if orders is None:
        orders = adaptive_orders(patch, separation)
    coarse = patch.at_orders(orders)
    fine = coarse.refined()
    value_coarse, _, _ = _direct_and_factored(coarse, frame, xi, xi_prime)
    value, factored, error = _direct_and_factored(fine, frame, xi, xi_prime)
    return OscillatoryResult(
        value=value,
        refinement_error=abs(value - value_coarse),
        xi=tuple(int(v) for v in xi),
        xi_prime=tuple(int(v) for v in xi_prime),
        separation=separation,
        factored=factored,
        identity_error=error,
        orders=fine.orders,
    )


def phase_gradient_min(patch: ComplexPatch, u: Sequence[float]) -> float:
    """min over bump-support nodes of |grad_(t, xhat) <u, G>|."""
    u = check_unit(u, tol=1e-9)
    gradients = patch.tangents @ u
    norms = np.linalg.norm(gradients, axis=-1)
    support = patch.support
    if not np.any(support):
        raise NumericalFailure("bump has no support on the grid")
    return float(np.min(norms[support]))


@dataclass(frozen=True)
class DecayRow:
    separation: float
    j_abs: float
    refinement_error: float


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    table: Tuple[DecayRow, ...]
    monotone: bool

    def csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["separation", "|J|", "refinement_error"])
        for row in self.table:
            writer.writerow([
                f"{row.separation:.12g}", f"{row.j_abs:.12g}",
                f"{row.refinement_error:.6g}"
            ])
        return buffer.getvalue()


def _monotone(table: Sequence[DecayRow]) -> bool:
    for i, near in enumerate(table):
        for far in table[i + 1:]:
            if far.separation <= near.separation:
                continue
            slack = near.refinement_error + far.refinement_error
            if far.j_abs > near.j_abs + slack:
                return False
    return True


def decay_fit(
    patch: ComplexPatch,
    frame: ShiftFrame,
    pairs: Sequence[Tuple[Sequence[int], Sequence[int]]]
) -> DecayFit:
    """Least-squares slope of log|J| against log|xi - xi'|."""
    pairs = [(tuple(a), tuple(b)) for a, b in pairs]
    if any(a == b for a, b in pairs):
        raise InputInvalidError("decay pairs must be distinct frequencies")
    results = parallel_map(
        lambda pair: j_integral(patch, frame, pair[0], pair[1]), pairs
    )
    table = tuple(sorted(
        (
            DecayRow(
                separation=r.separation, j_abs=abs(r.value),
                refinement_error=r.refinement_error
            )
            for r in results
        ),
        key=lambda row: (row.separation, row.j_abs),
    ))
    separations = sorted({round(row.separation, 9) for row in table})
    if len(separations) < 3:
        raise DegenerateFit(
            f"need 3 distinct separations, got {len(separations)}"
        )
    fit = linregress(
        np.log([row.separation for row in table]),
        np.log([max(row.j_abs, 1e-300) for row in table]),
    )
    logger.info(f"decay slope {fit.slope:.3f} over {len(table)} pairs")
    return DecayFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        table=table,
        monotone=_monotone(table),
    )


@dataclass(frozen=True)
class SurfaceMeasure:
    """Quadrature for mu_u = chi(angle(N, u) / delta0) dsigma on a graph."""
    points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    preimage: np.ndarray
    half_width: float

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    def transform(self, y: Sequence[float]) -> complex:
        y = np.asarray(y, dtype=float)
        return complex(np.exp(-2j * np.pi * (self.points @ y)) @ self.weights)


def _gauss_normals(S: AnalyticGraph, x: np.ndarray) -> np.ndarray:
    grad = S.gradient(x)
    return unit(np.concatenate([-grad, np.ones(grad.shape[:-1] + (1,))], axis=-1))


def _cap_bump(normals: np.ndarray, u: np.ndarray, delta0: float) -> np.ndarray:
    s = angle_between(normals, u) / delta0
    inside = s < 1
    safe = np.where(inside, s, 0.0)
    return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - safe ** 2)), 0.0)


def _preimage(S: AnalyticGraph, u: np.ndarray) -> np.ndarray:
    if abs(u[-1]) < 1e-12:
        raise InputInvalidError("a graph never has a horizontal unit normal")
    target = -u[:-1] / u[-1]
    x = np.zeros(S.n)
    for _ in range(50):
        residual = S.gradient(x) - target
        if np.linalg.norm(residual) < 1e-13:
            return x
        x = x - np.linalg.solve(S.hessian(x), residual)
    raise NumericalFailure(f"Gauss map preimage of {u.tolist()} not found")


def _box_boundary(center: np.ndarray, half: float, count: int = 64) -> np.ndarray:
    n = len(center)
    line = np.linspace(-half, half, count)
    faces = []
    for k in range(n):
        for sign in (-1.0, 1.0):
            if n == 1:
                pts = np.array([[sign * half]])
            else:
                grids = np.meshgrid(*([line] * (n - 1)), indexing="ij")
                rest = np.stack([g.ravel() for g in grids], axis=-1)
                pts = np.insert(rest, k, sign * half, axis=1)
            faces.append(pts)
    return center + np.vstack(faces)


def surface_measure(
    S: AnalyticGraph,
    u: Sequence[float],
    delta0: float,
    order: int = MIN_ORDER
) -> SurfaceMeasure:
    u = check_unit(u, tol=1e-9)
    x_u = _preimage(S, u)
    eigvals = np.abs(np.linalg.eigvalsh(S.hessian(x_u)))
    half = 2 * delta0 / max(float(eigvals.min()), 1e-3)
    for _ in range(6):
        boundary = _box_boundary(x_u, half)
        if not np.any(_cap_bump(_gauss_normals(S, boundary), u, delta0) > 0):
            break
        half *= 1.5
    else:
        raise NumericalFailure("cap bump does not vanish on the parameter box")
    if np.linalg.norm(x_u) + math.sqrt(S.n) * half >= S.domain_radius:
        raise InputInvalidError(
            f"preimage of Cap(u, {delta0}) leaves the domain radius "
            f"{S.domain_radius}"
        )
    axes, axis_weights = zip(*[
        gauss_legendre(order, c - half, c + half) for c in x_u
    ])
    mesh = np.meshgrid(*axes, indexing="ij")
    wmesh = np.meshgrid(*axis_weights, indexing="ij")
    x = np.stack([m.ravel() for m in mesh], axis=-1)
    quad = np.prod([w.ravel() for w in wmesh], axis=0)
    grad = S.gradient(x)
    normals = _gauss_normals(S, x)
    chi = _cap_bump(normals, u, delta0)
    support = chi > 0
    check_gauss_injective(normals[support], x[support])
    area = np.sqrt(1.0 + np.einsum("ij,ij->i", grad, grad))
    points = np.concatenate([x, S.value(x)[:, None]], axis=1)
    return SurfaceMeasure(
        points=points[support],
        weights=(chi * area * quad)[support],
        preimage=x_u,
        half_width=half,
    )


def check_gauss_injective(
    normals: np.ndarray,
    params: np.ndarray,
    separation: float = GAUSS_NORMAL_SEPARATION
) -> None:
    if len(normals) < 2:
        return
    pairs = cKDTree(normals).query_pairs(r=separation, output_type="ndarray")
    for i, j in pairs:
        if np.linalg.norm(params[i] - params[j]) > 1e-12:
            raise GaussMapNotInjective(
                f"normals collide at {params[i].tolist()} and {params[j].tolist()}"
            )


def _measure_order(half_width: float, radius: float) -> int:
    n = max(2 * MIN_ORDER, ORDER_PER_CYCLE * math.ceil(2 * half_width * radius))
    return min(n, MEASURE_MAX_ORDER)


def surface_measure_ft(
    S: AnalyticGraph,
    u: Sequence[float],
    delta0: float,
    y: Sequence[float],
    order: Optional[int] = None
) -> complex:
    """Fourier transform of the cap-localized surface measure at y."""
    if order is None:
        probe = surface_measure(S, u, delta0)
        order = _measure_order(probe.half_width, float(np.linalg.norm(y)))
    return surface_measure(S, u, delta0, order).transform(y)


@dataclass(frozen=True)
class RayDecay:
    ray: Tuple[float, ...]
    radii: Tuple[float, ...]
    values: Tuple[float, ...]
    threshold: Optional[float]
    passed: bool


@dataclass(frozen=True)
class NonstationaryReport:
    rays: Tuple[RayDecay, ...]
    floor: float

    @property
    def failures(self) -> List[Tuple[float, ...]]:
        return [r.ray for r in self.rays if not r.passed]


def _threshold(
    radii: Sequence[float],
    values: Sequence[float],
    floor: float
) -> Optional[float]:
    """Smallest r from which every doubling step halves |mu^| (or hits the floor)."""
    lookup = dict(zip(radii, values))
    doubling = [
        (r, lookup[2 * r]) for r in radii if 2 * r in lookup
    ]
    threshold = None
    for r, far in reversed(doubling):
        near = lookup[r]
        if far <= DECAY_RATIO * near or max(near, far) <= floor:
            threshold = r
        else:
            break
    return threshold


def nonstationary_decay_check(
    S: AnalyticGraph,
    u: Sequence[float],
    delta0: float,
    rays: Sequence[Sequence[float]],
    radii: Sequence[float]
) -> NonstationaryReport:
    """|mu_u^(r ray)| along rays away from the double caps around +-u."""
    u = check_unit(u, tol=1e-9)
    for ray in rays:
        ray = check_unit(ray, tol=1e-9)
        closest = min(angle_between(ray, u), angle_between(ray, -u))
        if closest <= 2 * delta0:
            raise InputInvalidError(
                f"ray {np.round(ray, 6).tolist()} meets Cap(+-u, 2 delta0)"
            )
    radii = sorted(float(r) for r in radii)
    probe = surface_measure(S, u, delta0)
    measure = surface_measure(
        S, u, delta0, _measure_order(probe.half_width, radii[-1])
    )
    floor = 1e-10 * measure.mass
    results = []
    for ray in rays:
        ray = np.asarray(ray, dtype=float)
        values = tuple(abs(measure.transform(r * ray)) for r in radii)
        threshold = _threshold(radii, values, floor)
        results.append(RayDecay(
            ray=tuple(ray.tolist()),
            radii=tuple(radii),
            values=values,
            threshold=threshold,
            passed=threshold is not None,
        ))
    return NonstationaryReport(rays=tuple(results), floor=floor)

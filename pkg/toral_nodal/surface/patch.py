import logging
import threading
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.special import roots_legendre

from toral_nodal.constants import (
    BUMP_FILL, DEFAULT_GRID, NEWTON_MAX_ITER, NEWTON_TOL, PATCH_IMAG_TOL,
    STATIONARY_TOL
)
from toral_nodal.surface.graph import (
    AnalyticGraph, ArrayLike, split_direction, tangency_point
)
from toral_nodal.types import PatchDocument, PatchNode
from toral_nodal.utils import (
    BumpOverlapsStationarySet, InputInvalidError, NewtonDivergence,
    NumericalFailure, PreconditionViolated, check_positive
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BumpSpec:
    """psi(t, xhat) = exp(p - p / (1 - s^2)) for s < 1, else 0.

    s is the ellipsoidal radius ((t - t_c)/r_t)^2 + |xhat - xhat_c|^2 / r_x^2
    under the square root; psi is 1 at the center.
    """
    t_center: float
    t_radius: float
    x_center: Tuple[float, ...]
    x_radius: float
    exponent: float = 1.0

    @classmethod
    def default(
        cls,
        tau: float,
        x_center: ArrayLike,
        x_radius: float,
        fill: float = BUMP_FILL
    ) -> "BumpSpec":
        return cls(
            t_center=1.5 * tau,
            t_radius=0.5 * tau * fill,
            x_center=tuple(float(v) for v in x_center),
            x_radius=x_radius * fill,
        )

    def shrunk(self, factor: float = 0.5) -> "BumpSpec":
        return replace(
            self, t_radius=self.t_radius * factor,
            x_radius=self.x_radius * factor
        )

    def validate(self, tau: float, domain_radius: float) -> None:
        check_positive("bump t radius", self.t_radius)
        if not (tau < self.t_center - self.t_radius
                and self.t_center + self.t_radius < 2 * tau):
            raise InputInvalidError(
                f"bump support in t is not inside ({tau}, {2 * tau})"
            )
        if self.x_center:
            check_positive("bump x radius", self.x_radius)
            reach = np.linalg.norm(self.x_center) + self.x_radius
            if reach >= domain_radius:
                raise InputInvalidError(
                    f"bump support reaches {reach:.4g} >= {domain_radius}"
                )

    def __call__(self, t: np.ndarray, xhat: np.ndarray) -> np.ndarray:
        s2 = ((t - self.t_center) / self.t_radius) ** 2
        if self.x_center:
            offset = xhat - np.asarray(self.x_center)
            s2 = s2 + np.sum(offset ** 2, axis=-1) / self.x_radius ** 2
        inside = s2 < 1
        safe = np.where(inside, s2, 0.0)
        return np.where(
            inside,
            np.exp(self.exponent - self.exponent / (1.0 - safe)),
            0.0,
        )


def gauss_legendre(n: int, lo: float, hi: float) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_legendre(n)
    half = 0.5 * (hi - lo)
    return lo + half * (nodes + 1.0), half * weights


@dataclass(frozen=True)
class ComplexPatch:
    """Discretized Sigma(v, tau) on a tensor Gauss-Legendre grid in (t, xhat).

    ``x`` holds the real base point of each node (the solved coordinate at
    ``axis``), ``Z = (x + i t omega, F(x + i t omega))`` and ``tangents``
    the real derivatives of G = Re Z along t and each xhat coordinate.
    """
    surface: AnalyticGraph = field(repr=False)
    v: np.ndarray
    tau: float
    bump: BumpSpec
    axis: int
    orders: Tuple[int, ...]
    t: np.ndarray = field(repr=False)
    xhat: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    Z: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    tangents: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    seed_point: np.ndarray = field(repr=False)
    degenerate: bool = False
    _variants: Dict[Tuple[int, ...], "ComplexPatch"] = field(
        default_factory=dict, repr=False, compare=False
    )
    _lock: threading.Lock = field(
        default_factory=threading.Lock, repr=False, compare=False
    )

    def __len__(self) -> int:
        return len(self.t)

    @property
    def G(self) -> np.ndarray:
        return self.Z.real

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    @property
    def support(self) -> np.ndarray:
        return self.weights > 0

    @property
    def param_diameter(self) -> float:
        """Largest extent of the bump box in (t, xhat)."""
        extents = [2 * self.bump.t_radius]
        if self.xhat.shape[1]:
            extents.append(2 * self.bump.x_radius)
        return float(max(extents))

    def imag_defect(self) -> float:
        return float(np.max(
            np.linalg.norm(self.Z.imag - np.outer(self.t, self.v), axis=1)
        ))

    def at_orders(self, orders: Tuple[int, ...]) -> "ComplexPatch":
        """Same surface, direction and bump on another quadrature grid."""
        orders = tuple(int(n) for n in orders)
        if orders == self.orders:
            return self
        with self._lock:
            cached = self._variants.get(orders)
        if cached is not None:
            return cached
        variant = _assemble(
            self.surface, self.v, self.tau, self.bump, orders,
            self.seed_point, self.axis, self.degenerate
        )
        with self._lock:
            self._variants[orders] = variant
        return variant

    def refined(self, factor: int = 2) -> "ComplexPatch":
        return self.at_orders(tuple(factor * n for n in self.orders))

    def document(self) -> PatchDocument:
        return PatchDocument(
            v=self.v.tolist(),
            tau=self.tau,
            axis=self.axis,
            nodes=[
                PatchNode(
                    t=float(t), xhat=xh.tolist(), x1=float(x[self.axis]),
                    z_re=z.real.tolist(), z_im=z.imag.tolist(), w=float(w)
                )
                for t, xh, x, z, w in zip(
                    self.t, self.xhat, self.x, self.Z, self.weights
                )
            ],
        )


def _grid(
    bump: BumpSpec,
    orders: Tuple[int, ...],
    n_hat: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    t_nodes, t_weights = gauss_legendre(
        orders[0], bump.t_center - bump.t_radius, bump.t_center + bump.t_radius
    )
    axes = [t_nodes]
    weights = [t_weights]
    for k in range(n_hat):
        c = bump.x_center[k]
        nodes, w = gauss_legendre(
            orders[1], c - bump.x_radius, c + bump.x_radius
        )
        axes.append(nodes)
        weights.append(w)
    mesh = np.meshgrid(*axes, indexing="ij")
    wmesh = np.meshgrid(*weights, indexing="ij")
    t = mesh[0].ravel()
    xhat = np.stack([m.ravel() for m in mesh[1:]], axis=-1) if n_hat \
        else np.empty((len(t), 0))
    quad = np.prod([w.ravel() for w in wmesh], axis=0)
    return t, xhat, quad


def _newton(
    S: AnalyticGraph,
    omega: np.ndarray,
    w_d: float,
    x: np.ndarray,
    t: np.ndarray,
    axis: int,
    degenerate: bool
) -> np.ndarray:
    """Damped Newton on h(x, t) = 0 in the ``axis`` coordinate, all nodes at once."""

    def h_and_slope(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        z = points + 1j * t[:, None] * omega
        h = np.imag(S.value(z)) / t - w_d
        slope = np.imag(S.gradient(z)[:, axis]) / t
        return h, slope

    h, slope = h_and_slope(x)
    for _ in range(NEWTON_MAX_ITER):
        active = np.abs(h) >= NEWTON_TOL
        if not np.any(active):
            return x
        flat = np.abs(slope) < 1e-14
        if np.any(active & flat):
            if degenerate:
                active &= ~flat
                if not np.any(active):
                    return x
            else:
                bad = int(np.flatnonzero(active & flat)[0])
                raise NewtonDivergence(
                    f"h has zero slope at node t={t[bad]:.6g}",
                    node=np.append(t[bad], x[bad]),
                )
        step = np.where(active, h / np.where(flat, 1.0, slope), 0.0)
        scale = np.ones(len(x))
        trial = x.copy()
        for _ in range(30):
            trial = x.copy()
            trial[:, axis] -= scale * step
            h_new, slope_new = h_and_slope(trial)
            worse = active & ~(np.abs(h_new) < np.abs(h))
            if not np.any(worse):
                break
            scale = np.where(worse, scale / 2, scale)
        x, h, slope = trial, h_new, slope_new
    active = np.abs(h) >= NEWTON_TOL
    if degenerate:
        active &= np.abs(slope) >= 1e-14
    if np.any(active):
        bad = int(np.flatnonzero(active)[0])
        raise NewtonDivergence(
            f"Newton failed at node t={t[bad]:.6g}, |h|={abs(h[bad]):.3g}",
            node=np.append(t[bad], x[bad]),
        )
    return x


def stationary_residuals(
    S: AnalyticGraph,
    v: ArrayLike,
    Z: np.ndarray
) -> np.ndarray:
    """Both residuals of the stationary locus at patch points, shape (n, 2).

    r1 = Re grad F(z) . omega - w_d and r2 = Im grad F(z) . omega with
    z = x + i t omega.
    """
    omega, w_d = split_direction(v)
    grad = S.gradient(Z[:, :-1]) @ omega
    return np.stack([grad.real - w_d, grad.imag], axis=-1)


def _tangents(
    S: AnalyticGraph,
    omega: np.ndarray,
    z: np.ndarray,
    t: np.ndarray,
    axis: int,
    degenerate: bool
) -> np.ndarray:
    n = S.n
    grad = S.gradient(z)
    value = S.value(z)
    h_axis = np.imag(grad[:, axis]) / t
    h_t = np.real(grad @ omega) / t - np.imag(value) / t ** 2
    safe = np.where(np.abs(h_axis) < 1e-14, 1.0, h_axis)
    scale = np.where(np.abs(h_axis) < 1e-14, 0.0, 1.0) if degenerate else 1.0
    others = [k for k in range(n) if k != axis]
    params = 1 + len(others)
    tangents = np.zeros((len(t), params, n + 1))

    dx_dt = np.zeros((len(t), n))
    dx_dt[:, axis] = -scale * h_t / safe
    tangents[:, 0, :n] = dx_dt
    tangents[:, 0, n] = np.real(np.einsum("ij,ij->i", grad, dx_dt)) \
        - np.imag(grad @ omega)
    for p, k in enumerate(others, start=1):
        h_k = np.imag(grad[:, k]) / t
        dx = np.zeros((len(t), n))
        dx[:, k] = 1.0
        dx[:, axis] = -scale * h_k / safe
        tangents[:, p, :n] = dx
        tangents[:, p, n] = np.real(np.einsum("ij,ij->i", grad, dx))
    return tangents


def _assemble(
    S: AnalyticGraph,
    v: np.ndarray,
    tau: float,
    bump: BumpSpec,
    orders: Tuple[int, ...],
    seed_point: np.ndarray,
    axis: int,
    degenerate: bool
) -> ComplexPatch:
    omega, w_d = split_direction(v)
    others = [k for k in range(S.n) if k != axis]
    t, xhat, quad = _grid(bump, orders, len(others))
    x = np.tile(seed_point, (len(t), 1))
    x[:, others] = xhat
    x = _newton(S, omega, w_d, x, t, axis, degenerate)
    z = x + 1j * t[:, None] * omega
    Z = np.concatenate([z, S.value(z)[:, None]], axis=1)
    patch = ComplexPatch(
        surface=S,
        v=np.asarray(v, dtype=float),
        tau=tau,
        bump=bump,
        axis=axis,
        orders=tuple(orders),
        t=t,
        xhat=xhat,
        x=x,
        Z=Z,
        weights=bump(t, xhat) * quad,
        tangents=_tangents(S, omega, z, t, axis, degenerate),
        residuals=stationary_residuals(S, v, Z),
        seed_point=seed_point,
        degenerate=degenerate,
    )
    defect = patch.imag_defect()
    if defect > PATCH_IMAG_TOL:
        raise NumericalFailure(f"patch nodes leave Im Z = t v by {defect:.3g}")
    return patch


def _touches_stationary(patch: ComplexPatch, tol: float) -> bool:
    stationary = np.all(np.abs(patch.residuals) < tol, axis=1)
    return bool(np.any(stationary & patch.support))


def build_patch(
    S: AnalyticGraph,
    v: ArrayLike,
    tau: float,
    bump: Optional[BumpSpec] = None,
    grid_sizes: Tuple[int, int] = DEFAULT_GRID,
    stationary_tol: float = STATIONARY_TOL,
    allow_degenerate: bool = False,
    x_radius: Optional[float] = None,
    fill: float = BUMP_FILL
) -> ComplexPatch:
    """Sigma(v, tau) on a Gauss-Legendre grid weighted by the bump.

    The x coordinate with the largest |d h / d x_k| at the tangency point
    is solved for; the others form xhat. ``allow_degenerate`` keeps
    surfaces where h does not depend on x (flat controls).
    """
    check_positive("tau", tau)
    v = np.asarray(v, dtype=float)
    omega, w_d = split_direction(v)
    if allow_degenerate:
        seed_point = np.zeros(S.n)
        try:
            seed_point = tangency_point(S, v)
        except PreconditionViolated:
            if abs(S.gradient(seed_point) @ omega - w_d) > NEWTON_TOL:
                raise
    else:
        seed_point = tangency_point(S, v)
    hess_omega = S.hessian(seed_point) @ omega
    curvature = abs(omega @ hess_omega)
    if curvature < 1e-9 * (omega @ omega) and not allow_degenerate:
        raise PreconditionViolated(
            f"v is an asymptotic direction at {seed_point.tolist()}"
        )
    axis = int(np.argmax(np.abs(hess_omega)))
    others = [k for k in range(S.n) if k != axis]
    if bump is None:
        radius = x_radius if x_radius is not None else \
            0.5 * (S.domain_radius - np.linalg.norm(seed_point))
        bump = BumpSpec.default(tau, seed_point[others], radius, fill)
    bump.validate(tau, S.domain_radius)

    patch = _assemble(
        S, v, tau, bump, tuple(grid_sizes), seed_point, axis, allow_degenerate
    )
    if not allow_degenerate and _touches_stationary(patch, stationary_tol):
        logger.info("bump meets the stationary locus, shrinking once")
        patch = _assemble(
            S, v, tau, bump.shrunk(), tuple(grid_sizes), seed_point, axis,
            allow_degenerate
        )
        if _touches_stationary(patch, stationary_tol):
            raise BumpOverlapsStationarySet(
                "bump support meets the stationary locus after shrinking"
            )
    logger.info(
        f"patch v={np.round(v, 4).tolist()} tau={tau} nodes={len(patch)} "
        f"defect={patch.imag_defect():.2e}"
    )
    return patch

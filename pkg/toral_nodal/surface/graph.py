"""Graph hypersurfaces x -> (x, f(x)) with f a closed analytic expression.

f is held as a sympy expression in x1..x_{d-1}; value, gradient and
Hessian are lambdified to numpy once, so the same code path serves real
points, complex points and broadcast grids.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import sympy

from toral_nodal.constants import (
    ADMISSIBLE_HESSIAN_BOUND, ADMISSIBLE_PROBES, ASYMPTOTIC_TOL,
    CONDITION_LIMIT, DEFAULT_SEED, DOMAIN_RADIUS, MIN_CAP_ANGLE,
    NEWTON_MAX_ITER
)
from toral_nodal.types import Cap
from toral_nodal.utils import (
    CapNotFound, FlatSurface, InputInvalidError, NumericalFailure,
    PreconditionViolated, check_dimension, check_unit, unit
)

logger = logging.getLogger(__name__)

ALLOWED_FUNCTIONS = (
    sympy.exp, sympy.sin, sympy.cos, sympy.acos, sympy.asin, sympy.log
)

ArrayLike = Union[Sequence[float], np.ndarray]


def _compile(expr: sympy.Expr, symbols: Sequence[sympy.Symbol]) -> Callable:
    func = sympy.lambdify(symbols, expr, modules="numpy")

    def evaluate(x: np.ndarray) -> np.ndarray:
        value = func(*[x[..., k] for k in range(x.shape[-1])])
        return np.broadcast_to(np.asarray(value, dtype=x.dtype), x.shape[:-1])

    return evaluate


@dataclass(frozen=True)
class AnalyticGraph:
    d: int
    expression: sympy.Expr
    domain_radius: float = DOMAIN_RADIUS
    symbols: Tuple[sympy.Symbol, ...] = field(default=(), repr=False)

    @classmethod
    def parse(
        cls,
        text: str,
        d: int,
        domain_radius: float = DOMAIN_RADIUS
    ) -> "AnalyticGraph":
        """
            AnalyticGraph.parse("(x1**2 + x2**2) / 2", d=3)
        """
        d = check_dimension(d)
        symbols = sympy.symbols(f"x1:{d}", real=True)
        names = {s.name: s for s in symbols}
        try:
            expr = sympy.sympify(text, locals=names)
        except (sympy.SympifyError, TypeError) as e:
            raise InputInvalidError(f"invalid expression {text!r}: {str(e)}")
        return cls.from_expression(expr, d, domain_radius, symbols)

    @classmethod
    def from_expression(
        cls,
        expr: sympy.Expr,
        d: int,
        domain_radius: float = DOMAIN_RADIUS,
        symbols: Optional[Sequence[sympy.Symbol]] = None
    ) -> "AnalyticGraph":
        if symbols is None:
            symbols = sympy.symbols(f"x1:{d}", real=True)
        symbols = tuple(symbols)
        if len(symbols) != d - 1:
            raise InputInvalidError(f"need {d - 1} variables, got {symbols}")
        extra = expr.free_symbols - set(symbols)
        if extra:
            raise InputInvalidError(f"unknown symbols in f: {sorted(map(str, extra))}")
        for func in expr.atoms(sympy.Function):
            if not isinstance(func, ALLOWED_FUNCTIONS):
                raise InputInvalidError(f"unsupported function in f: {func}")
        if expr.has(sympy.I):
            raise InputInvalidError("f must have real coefficients")
        if domain_radius <= 0:
            raise InputInvalidError(f"invalid domain radius {domain_radius}")
        return cls(
            d=d, expression=expr, domain_radius=domain_radius,
            symbols=symbols
        )

    @property
    def n(self) -> int:
        return self.d - 1

    @cached_property
    def _value(self) -> Callable:
        return _compile(self.expression, self.symbols)

    @cached_property
    def _gradient(self) -> List[Callable]:
        return [
            _compile(sympy.diff(self.expression, s), self.symbols)
            for s in self.symbols
        ]

    @cached_property
    def _hessian(self) -> List[List[Callable]]:
        return [
            [
                _compile(sympy.diff(self.expression, a, b), self.symbols)
                for b in self.symbols
            ]
            for a in self.symbols
        ]

    def _prepare(self, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x)
        if x.dtype.kind not in "fc":
            x = x.astype(float)
        if x.shape[-1] != self.n:
            raise InputInvalidError(
                f"expected points with {self.n} coordinates, got {x.shape}"
            )
        return x

    def value(self, x: ArrayLike) -> np.ndarray:
        x = self._prepare(x)
        return self._value(x)

    def gradient(self, x: ArrayLike) -> np.ndarray:
        x = self._prepare(x)
        return np.stack([g(x) for g in self._gradient], axis=-1)

    def hessian(self, x: ArrayLike) -> np.ndarray:
        x = self._prepare(x)
        rows = [np.stack([h(x) for h in row], axis=-1) for row in self._hessian]
        return np.stack(rows, axis=-2)

    def check_domain(self, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if np.linalg.norm(x) >= self.domain_radius:
            raise InputInvalidError(
                f"point {x.tolist()} outside the domain radius "
                f"{self.domain_radius}"
            )
        return x


@dataclass(frozen=True)
class CurvatureData:
    normal: np.ndarray
    first_form: np.ndarray
    second_form: np.ndarray
    shape: np.ndarray
    principal_curvatures: np.ndarray
    gauss_kronecker: float


def unit_normal(S: AnalyticGraph, x: ArrayLike) -> np.ndarray:
    x = S.check_domain(x)
    grad = S.gradient(x)
    return np.append(-grad, 1.0) / math.sqrt(1.0 + grad @ grad)


def curvature_data(S: AnalyticGraph, x: ArrayLike) -> CurvatureData:
    x = S.check_domain(x)
    grad = S.gradient(x)
    hess = S.hessian(x)
    first = np.eye(S.n) + np.outer(grad, grad)
    if np.linalg.cond(first) > CONDITION_LIMIT:
        raise NumericalFailure(
            f"first fundamental form ill conditioned at {x.tolist()}"
        )
    second = hess / math.sqrt(1.0 + grad @ grad)
    shape = np.linalg.solve(first, second)
    principal = scipy.linalg.eigh(second, first, eigvals_only=True)
    return CurvatureData(
        normal=unit_normal(S, x),
        first_form=first,
        second_form=second,
        shape=shape,
        principal_curvatures=principal,
        gauss_kronecker=float(np.linalg.det(shape)),
    )


def normal_curvature(S: AnalyticGraph, x: ArrayLike, omega: ArrayLike) -> float:
    omega = np.asarray(omega, dtype=float)
    if not np.any(omega):
        raise InputInvalidError("omega must be nonzero")
    x = S.check_domain(x)
    grad = S.gradient(x)
    hess = S.hessian(x)
    return float(
        omega @ hess @ omega
        / (math.sqrt(1.0 + grad @ grad) * (omega @ omega + (grad @ omega) ** 2))
    )


def is_asymptotic(
    S: AnalyticGraph,
    x: ArrayLike,
    omega: ArrayLike,
    tol: float = ASYMPTOTIC_TOL
) -> bool:
    omega = np.asarray(omega, dtype=float)
    x = np.asarray(x, dtype=float)
    return bool(abs(omega @ S.hessian(x) @ omega) <= tol * (omega @ omega))


def split_direction(v: ArrayLike) -> Tuple[np.ndarray, float]:
    """(omega, w_d) of a unit direction in R^d."""
    v = check_unit(v, tol=1e-9)
    return v[:-1], float(v[-1])


def tangency_point(
    S: AnalyticGraph,
    v: ArrayLike,
    seed: Optional[ArrayLike] = None,
    tol: float = 1e-13
) -> np.ndarray:
    """Solve grad f(x) . omega = w_d by minimum-norm Gauss-Newton steps.

    Starting from the domain center this returns the solution nearest to
    it; raises PreconditionViolated when no solution is found inside the
    domain.
    """
    omega, w_d = split_direction(v)
    if not np.any(omega):
        raise PreconditionViolated("vertical direction has no tangency point")
    x = np.zeros(S.n) if seed is None else np.array(seed, dtype=float)
    for _ in range(NEWTON_MAX_ITER):
        residual = S.gradient(x) @ omega - w_d
        if abs(residual) < tol:
            break
        slope = S.hessian(x) @ omega
        size = slope @ slope
        if size == 0:
            raise PreconditionViolated(
                f"grad f . omega is constant near {x.tolist()}"
            )
        x = x - residual * slope / size
    else:
        raise PreconditionViolated(f"no tangency point for v={np.round(v, 6).tolist()}")
    if np.linalg.norm(x) >= S.domain_radius:
        raise PreconditionViolated(
            f"tangency point {x.tolist()} leaves the domain"
        )
    return x


@dataclass(frozen=True)
class AdmissibleCap:
    surface: AnalyticGraph = field(repr=False)
    cap: Cap
    base_point: np.ndarray
    witnesses: Tuple[Tuple[Tuple[float, ...], Tuple[float, ...]], ...] = \
        field(repr=False)
    hessian_bound: float

    @property
    def antipodal(self) -> Cap:
        return Cap.around(-self.cap.vector, self.cap.angle)

    def witness(self, v: ArrayLike) -> np.ndarray:
        """Tangency point for v or -v in the cap (the equation is odd in v)."""
        v = np.asarray(v, dtype=float)
        if not (self.cap.contains(v, tol=1e-12)
                or self.antipodal.contains(v, tol=1e-12)):
            raise PreconditionViolated("direction outside the admissible cap")
        return _witness(self.surface, v, self.hessian_bound)


def _witness(S: AnalyticGraph, v: np.ndarray, bound: float) -> np.ndarray:
    x = tangency_point(S, v)
    omega, _ = split_direction(v)
    if np.linalg.norm(x) >= 0.9 * S.domain_radius:
        raise PreconditionViolated("tangency point too close to the boundary")
    if abs(omega @ S.hessian(x) @ omega) < bound * (omega @ omega):
        raise PreconditionViolated(
            f"omega is asymptotic at the tangency point {x.tolist()}"
        )
    return x


def _sample_domain(S: AnalyticGraph, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    directions = unit(rng.standard_normal((count, S.n)))
    radii = 0.9 * S.domain_radius * rng.random(count) ** (1.0 / S.n)
    return np.vstack([np.zeros(S.n), directions * radii[:, None]])


def find_admissible_cap(
    S: AnalyticGraph,
    probes: int = ADMISSIBLE_PROBES,
    hessian_bound: float = ADMISSIBLE_HESSIAN_BOUND,
    min_angle: float = MIN_CAP_ANGLE,
    seed: int = DEFAULT_SEED
) -> AdmissibleCap:
    """A cap of directions v = (omega, w_d) that are non-asymptotic normals.

    Each probe direction of the returned cap has a witness x with
    grad f(x) . omega = w_d and |omega^T D^2 f(x) omega| >= hessian_bound.
    """
    samples = _sample_domain(S, 200, seed)
    hessians = S.hessian(samples)
    sizes = np.linalg.norm(hessians, axis=(-2, -1))
    if np.all(sizes < hessian_bound):
        raise FlatSurface("all sampled Hessians vanish")
    first = int(np.argmax(sizes >= hessian_bound))
    base = samples[first]
    eigvals, eigvecs = np.linalg.eigh(hessians[first])
    omega0 = eigvecs[:, int(np.argmax(np.abs(eigvals)))]
    center = unit(np.append(omega0, S.gradient(base) @ omega0))

    angle = math.pi / 4
    while angle >= min_angle:
        cap = Cap.around(center, angle)
        directions = np.vstack([cap.vector, cap.probe(probes, seed)])
        try:
            witnesses = tuple(
                (tuple(v), tuple(_witness(S, v, hessian_bound)))
                for v in directions
            )
        except PreconditionViolated:
            angle /= 2
            continue
        logger.info(f"admissible cap of angle {angle:.4g} around {np.round(center, 4).tolist()}")
        return AdmissibleCap(
            surface=S, cap=cap, base_point=base, witnesses=witnesses,
            hessian_bound=hessian_bound,
        )
    raise CapNotFound(f"no admissible cap of angle >= {min_angle}")


def h_eval(S: AnalyticGraph, v: ArrayLike, x: ArrayLike, t):
    """h(x, t) = Im F(x + i t omega) / t - w_d.

    At t = 0 the limit grad f(x) . omega - w_d is returned; ``x`` has shape
    (..., d-1) and ``t`` broadcasts against its leading shape.
    """
    omega, w_d = split_direction(v)
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    shape = np.broadcast_shapes(x.shape[:-1], t.shape)
    x = np.broadcast_to(x, shape + (S.n,))
    t = np.broadcast_to(t, shape)
    safe = np.where(t == 0, 1.0, t)
    z = x + 1j * safe[..., None] * omega
    value = np.imag(S.value(z)) / safe - w_d
    result = np.where(t == 0, S.gradient(x) @ omega - w_d, value)
    return float(result) if result.ndim == 0 else result


@dataclass(frozen=True)
class HGradient:
    analytic: np.ndarray
    finite_difference: np.ndarray
    dt: float
    agreement: float


def h_gradient(
    S: AnalyticGraph,
    v: ArrayLike,
    x: ArrayLike,
    t: float = 1e-4,
    step: float = 1e-5,
    tol: float = 1e-8
) -> HGradient:
    """grad_x h(x, 0) = D^2 f(x) omega at a tangency point, with FD checks."""
    omega, _ = split_direction(v)
    x = np.asarray(x, dtype=float)
    if abs(h_eval(S, v, x, 0.0)) > tol:
        raise PreconditionViolated(f"x={x.tolist()} is not a tangency point")
    analytic = S.hessian(x) @ omega
    fd = np.empty(S.n)
    for k in range(S.n):
        e = np.zeros(S.n)
        e[k] = step
        fd[k] = (h_eval(S, v, x + e, t) - h_eval(S, v, x - e, t)) / (2 * step)
    dt = (h_eval(S, v, x, step) - h_eval(S, v, x, -step)) / (2 * step)
    return HGradient(
        analytic=analytic,
        finite_difference=fd,
        dt=float(dt),
        agreement=float(np.max(np.abs(analytic - fd))),
    )

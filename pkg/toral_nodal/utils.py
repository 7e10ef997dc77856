import logging
import os
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, List, Optional, Sequence, TypeVar, Union

import numpy as np

from toral_nodal.constants import CENTER_UNIT_TOL, THREADS_ENV

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class ToralNodalError(Exception):
    pass


class InputInvalidError(ToralNodalError, ValueError):
    pass


class MismatchedFrame(InputInvalidError):
    pass


class PreconditionViolated(InputInvalidError):
    def __init__(self, message: str, epsilon: Optional[float] = None) -> None:
        super().__init__(message)
        self.epsilon = epsilon


class DegenerateInput(InputInvalidError):
    pass


class OverflowGuard(InputInvalidError):
    pass


class ResourceLimitExceeded(InputInvalidError):
    pass


class NumericalFailure(ToralNodalError):
    pass


class NewtonDivergence(NumericalFailure):
    def __init__(self, message: str, node: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.node = None if node is None else tuple(float(v) for v in node)


class BumpOverlapsStationarySet(NumericalFailure):
    pass


class GaussMapNotInjective(NumericalFailure):
    pass


class BaseCaseFailure(NumericalFailure):
    pass


class FlatSurface(NumericalFailure):
    pass


class CapNotFound(NumericalFailure):
    pass


class DegenerateFit(NumericalFailure):
    pass


class OutputFormat(str, Enum):
    JSON = "json"
    CSV = "csv"
    TEXT = "text"


def check_dimension(d: int, minimum: int = 2) -> int:
    if int(d) != d or d < minimum:
        raise InputInvalidError(f"invalid dimension: {d}, need d >= {minimum}")
    return int(d)


def check_positive(name: str, value: Union[int, float, Fraction]) -> None:
    if not value > 0:
        raise InputInvalidError(f"{name} must be positive, got {value}")


def check_unit(
    vector: Union[Sequence[float], np.ndarray],
    tol: float = CENTER_UNIT_TOL
) -> np.ndarray:
    vector = np.asarray(vector, dtype=float)
    norm = float(np.linalg.norm(vector))
    if abs(norm - 1.0) > tol:
        raise InputInvalidError(f"expected a unit vector, |v| = {norm!r}")
    return vector


def as_fraction(value: Union[int, float, str, Fraction]) -> Fraction:
    try:
        fraction = Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError) as e:
        raise InputInvalidError(f"invalid rational: {value!r}, {str(e)}")
    return fraction


def unit(vector: Union[Sequence[float], np.ndarray]) -> np.ndarray:
    vector = np.asarray(vector, dtype=float)
    norm = np.linalg.norm(vector, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise DegenerateInput("cannot normalize the zero vector")
    return vector / norm


def angle_between(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Angle between unit vectors, stable near 0 and pi."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    cross = np.linalg.norm(a - b, axis=-1)
    summed = np.linalg.norm(a + b, axis=-1)
    return 2.0 * np.arctan2(cross, summed)


def reflect(u: Union[Sequence[float], np.ndarray], x: np.ndarray) -> np.ndarray:
    """Reflection in the hyperplane orthogonal to ``u``.

    ``x`` may be a single vector or a stack of row vectors.
    """
    u = check_unit(u, tol=1e-9)
    x = np.asarray(x, dtype=float)
    return x - 2.0 * np.multiply.outer(x @ u, u)


def cauchy_riemann_residual(
    func: Callable[[np.ndarray], np.ndarray],
    z: np.ndarray,
    step: float = 1e-5
) -> float:
    """Relative residual of df/dy = i df/dx, by centered differences.

    ``func`` maps a complex point of shape (k,) to a complex scalar.
    """
    z = np.asarray(z, dtype=complex)
    worst = 0.0
    for j in range(len(z)):
        e = np.zeros(len(z), dtype=complex)
        e[j] = step
        dx = (func(z + e) - func(z - e)) / (2 * step)
        dy = (func(z + 1j * e) - func(z - 1j * e)) / (2 * step)
        scale = max(1.0, abs(dx))
        worst = max(worst, abs(dy - 1j * dx) / scale)
    return float(worst)


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return min(8, os.cpu_count() or 1)
    try:
        count = int(raw)
    except ValueError:
        raise InputInvalidError(f"invalid {THREADS_ENV}: {raw!r}")
    return max(1, count)


def parallel_map(func: Callable[[T], R], items: Iterable[T]) -> List[R]:
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [func(item) for item in items]
    logger.debug(f"parallel_map over {len(items)} items, {workers} workers")
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, items))

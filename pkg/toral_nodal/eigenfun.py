import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from toral_nodal.constants import (
    D_MULTIPLIER, MAX_IMAG_PART, NORMALIZATION_TOL, SLAB_TOL
)
from toral_nodal.lattice import LatticePoint, enumerate_shell
from toral_nodal.types import CoefficientEntry, EigenfunctionDocument
from toral_nodal.utils import (
    DegenerateInput, InputInvalidError, OverflowGuard, check_dimension,
    check_positive
)

logger = logging.getLogger(__name__)

ArrayLike = Union[Sequence[float], np.ndarray]


def _norm2(xi: Sequence[int]) -> int:
    return sum(int(v) * int(v) for v in xi)


@dataclass(frozen=True)
class Eigenfunction:
    """Trigonometric polynomial sum_xi a_xi e(<xi, x>) on one shell.

    Frequencies are stored sorted lexicographically; every sum runs in
    that order.
    """
    d: int
    r2: int
    freqs: np.ndarray = field(repr=False)
    coeffs: np.ndarray = field(repr=False)
    real: bool = False

    def __post_init__(self) -> None:
        self.freqs.setflags(write=False)
        self.coeffs.setflags(write=False)

    @classmethod
    def from_mapping(
        cls,
        d: int,
        r2: int,
        coeffs: Mapping[Sequence[int], complex],
        real: bool = False,
        normalize: bool = True
    ) -> "Eigenfunction":
        d = check_dimension(d, minimum=1)
        items: Dict[LatticePoint, complex] = {}
        for xi, a in coeffs.items():
            xi = tuple(int(v) for v in xi)
            if len(xi) != d or _norm2(xi) != r2:
                raise InputInvalidError(
                    f"frequency {xi} is not on the shell d={d} r2={r2}"
                )
            items[xi] = items.get(xi, 0j) + complex(a)
        if not items:
            raise DegenerateInput("an eigenfunction needs a frequency")
        keys = sorted(items)
        values = np.array([items[k] for k in keys], dtype=complex)
        mass = float(np.sum(np.abs(values) ** 2))
        if mass == 0:
            raise DegenerateInput("all coefficients vanish")
        if normalize:
            values = values / math.sqrt(mass)
        elif abs(mass - 1.0) > NORMALIZATION_TOL:
            raise InputInvalidError(f"coefficients not normalized: {mass}")
        phi = cls(
            d=d, r2=int(r2),
            freqs=np.array(keys, dtype=np.int64).reshape(-1, d),
            coeffs=values, real=real,
        )
        if real:
            phi.check_real()
        return phi

    @property
    def eigenvalue_radius(self) -> float:
        return math.sqrt(self.r2)

    @property
    def mapping(self) -> Dict[LatticePoint, complex]:
        return {
            tuple(int(v) for v in xi): complex(a)
            for xi, a in zip(self.freqs, self.coeffs)
        }

    def coefficient(self, xi: Sequence[int]) -> complex:
        return self.mapping.get(tuple(int(v) for v in xi), 0j)

    def check_real(self, tol: float = NORMALIZATION_TOL) -> None:
        mapping = self.mapping
        for xi, a in mapping.items():
            partner = mapping.get(tuple(-v for v in xi), 0j)
            if abs(partner - a.conjugate()) > tol:
                raise InputInvalidError(
                    f"not real valued: a{xi} and its partner are not conjugate"
                )

    def permuted(self, order: Sequence[int]) -> "Eigenfunction":
        order = list(order)
        if sorted(order) != list(range(self.d)):
            raise InputInvalidError(f"not a permutation: {order}")
        return Eigenfunction.from_mapping(
            self.d, self.r2,
            {tuple(xi[order]): a for xi, a in zip(self.freqs, self.coeffs)},
            real=self.real,
        )

    def document(self) -> EigenfunctionDocument:
        return EigenfunctionDocument(
            d=self.d, r2=self.r2, real=self.real,
            coeffs=[
                CoefficientEntry(
                    xi=[int(v) for v in xi], re=float(a.real),
                    im=float(a.imag)
                )
                for xi, a in zip(self.freqs, self.coeffs)
            ],
        )

    @classmethod
    def from_document(cls, doc: EigenfunctionDocument) -> "Eigenfunction":
        return cls.from_mapping(
            doc.d, doc.r2,
            {tuple(c.xi): complex(c.re, c.im) for c in doc.coeffs},
            real=doc.real,
        )


@dataclass(frozen=True)
class ShiftFrame:
    xi0: LatticePoint
    r2: int

    @classmethod
    def for_point(cls, xi0: Sequence[int]) -> "ShiftFrame":
        xi0 = tuple(int(v) for v in xi0)
        r2 = _norm2(xi0)
        if r2 == 0:
            raise DegenerateInput("xi0 must be nonzero")
        return cls(xi0=xi0, r2=r2)

    @property
    def radius(self) -> float:
        return math.sqrt(self.r2)

    @property
    def v0(self) -> np.ndarray:
        return -np.asarray(self.xi0, dtype=float) / self.radius


def evaluate(phi: Eigenfunction, x: ArrayLike):
    """phi at real points; ``x`` of shape (d,) or (n, d)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    # reduce <xi, x> mod 1 before scaling by 2 pi
    phase = np.mod(x @ phi.freqs.T.astype(float), 1.0)
    values = np.exp(2j * np.pi * phase) @ phi.coeffs
    return complex(values[0]) if single else values


def _check_imag(Z: np.ndarray, bound: float) -> None:
    largest = float(np.max(np.linalg.norm(Z.imag, axis=-1)))
    if largest > bound:
        raise OverflowGuard(
            f"|Im Z| = {largest:.4g} exceeds the guard {bound}"
        )


def evaluate_complex(
    phi: Eigenfunction,
    Z: ArrayLike,
    bound: float = MAX_IMAG_PART
):
    """Holomorphic extension sum a_xi e^{2 pi i <xi, Z>}."""
    Z = np.asarray(Z, dtype=complex)
    single = Z.ndim == 1
    Z = np.atleast_2d(Z)
    _check_imag(Z, bound)
    freqs = phi.freqs.T.astype(float)
    phase = np.mod(Z.real @ freqs, 1.0)
    damping = -2 * np.pi * (Z.imag @ freqs)
    values = np.exp(2j * np.pi * phase + damping) @ phi.coeffs
    return complex(values[0]) if single else values


def shift_numerators(frame: ShiftFrame, freqs: np.ndarray) -> np.ndarray:
    """Exact integers r2 - <xi, xi0>, so that A(xi) = numerator / lambda."""
    freqs = np.atleast_2d(np.asarray(freqs, dtype=np.int64))
    norms = np.einsum("ij,ij->i", freqs, freqs)
    if np.any(norms != frame.r2):
        raise InputInvalidError(
            f"frequencies off the shell of xi0={frame.xi0}"
        )
    return frame.r2 - freqs @ np.asarray(frame.xi0, dtype=np.int64)


def shift_height(frame: ShiftFrame, xi: Sequence[int]) -> float:
    """A(xi) = <xi - xi0, v0>; zero at xi0 and positive elsewhere."""
    return float(shift_numerators(frame, [xi])[0]) / frame.radius


def shift_heights(frame: ShiftFrame, freqs: np.ndarray) -> np.ndarray:
    return shift_numerators(frame, freqs) / frame.radius


def default_cutoff(r2: int, multiplier: float = D_MULTIPLIER) -> float:
    log_lambda = 0.5 * math.log(r2) if r2 > 1 else 0.0
    return float(max(1, math.ceil(multiplier * log_lambda ** 2)))


@dataclass(frozen=True)
class ShortSupport:
    indices: Tuple[int, ...]
    cutoff: float
    radius_bound: float
    max_offset: float


def short_support(
    phi: Eigenfunction,
    frame: ShiftFrame,
    D: Optional[float] = None
) -> ShortSupport:
    """Frequencies of phi with A(xi) < D."""
    D = default_cutoff(phi.r2) if D is None else D
    check_positive("D", D)
    heights = shift_heights(frame, phi.freqs)
    indices = tuple(int(i) for i in np.flatnonzero(heights < D))
    offsets = phi.freqs[list(indices)] - np.asarray(frame.xi0)
    max_offset = float(np.max(np.linalg.norm(offsets, axis=1))) \
        if indices else 0.0
    return ShortSupport(
        indices=indices,
        cutoff=D,
        radius_bound=math.sqrt(2 * frame.radius * D),
        max_offset=max_offset,
    )


def slab_parameter(
    frame: ShiftFrame,
    Z: np.ndarray,
    tau: float,
    tol: float = SLAB_TOL
) -> np.ndarray:
    """t with Im Z = t v0, after checking tau < t < 2 tau."""
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    v0 = frame.v0
    t = Z.imag @ v0
    off = np.linalg.norm(Z.imag - np.outer(t, v0), axis=1)
    if np.any(off > tol) or np.any(t <= tau - tol) or np.any(t >= 2 * tau + tol):
        raise InputInvalidError(
            f"points off the slab Im Z = t v0, {tau} < t < {2 * tau}"
        )
    return t


def shifted_value(phi: Eigenfunction, frame: ShiftFrame, Z: ArrayLike):
    """phi^C(Z) e^{-2 pi i <xi0, Z>}, summed directly."""
    Z = np.asarray(Z, dtype=complex)
    single = Z.ndim == 1
    Z = np.atleast_2d(Z)
    offsets = (phi.freqs - np.asarray(frame.xi0)).T.astype(float)
    phase = np.mod(Z.real @ offsets, 1.0)
    damping = -2 * np.pi * (Z.imag @ offsets)
    values = np.exp(2j * np.pi * phase + damping) @ phi.coeffs
    return complex(values[0]) if single else values


def short_sum_with_tail(
    phi: Eigenfunction,
    frame: ShiftFrame,
    Z: ArrayLike,
    tau: float,
    D: Optional[float] = None
):
    """Short sum over A(xi) < D on the slab, with the tail bound.

    The cut is strict, as in short_support: a frequency with A(xi) = D
    goes to the tail, which the bound sqrt(#E) e^{-2 pi tau D} still covers.
    """
    D = default_cutoff(phi.r2) if D is None else D
    Z = np.asarray(Z, dtype=complex)
    single = Z.ndim == 1
    t = slab_parameter(frame, Z, tau)
    X = np.atleast_2d(Z).real
    support = short_support(phi, frame, D)
    keep = list(support.indices)
    freqs = phi.freqs[keep]
    heights = shift_heights(frame, freqs) if keep else np.empty(0)
    offsets = (freqs - np.asarray(frame.xi0)).T.astype(float)
    phase = np.mod(X @ offsets, 1.0)
    terms = np.exp(2j * np.pi * phase - 2 * np.pi * np.outer(t, heights))
    values = terms @ phi.coeffs[keep]
    tail_bound = math.sqrt(len(phi.freqs)) * math.exp(-2 * math.pi * tau * D)
    return (complex(values[0]) if single else values), tail_bound


def make_geodesic_vanisher(
    xi: Sequence[int],
    c: float,
    n: int
) -> Eigenfunction:
    """sin 2 pi n (<xi, x> - c), vanishing on the hyperplane <xi, x> = c."""
    xi = np.asarray(xi, dtype=np.int64)
    if not np.any(xi):
        raise DegenerateInput("xi must be nonzero")
    check_positive("n", n)
    shift = np.exp(-2j * np.pi * n * c)
    return Eigenfunction.from_mapping(
        len(xi), int(n * n * (xi @ xi)),
        {
            tuple(n * xi): shift / 2j,
            tuple(-n * xi): -np.conj(shift) / 2j,
        },
        real=True,
    )


def make_cylinder(phi0: Eigenfunction, n: int) -> Eigenfunction:
    """phi0(x, y) cos 2 pi n z on the three-torus."""
    if phi0.d != 2:
        raise InputInvalidError(f"cylinders start from d=2, got d={phi0.d}")
    if n < 0:
        raise InputInvalidError(f"n must be non negative, got {n}")
    coeffs: Dict[Tuple[int, ...], complex] = {}
    for xi, a in phi0.mapping.items():
        if n == 0:
            coeffs[xi + (0,)] = a
        else:
            coeffs[xi + (n,)] = a / 2
            coeffs[xi + (-n,)] = a / 2
    return Eigenfunction.from_mapping(
        3, phi0.r2 + n * n, coeffs, real=phi0.real
    )


@dataclass(frozen=True)
class LineFamily:
    """Lines {x : <normal, x> in alpha + Z} with their vanishing function."""
    normal: Tuple[int, ...]
    alpha: float
    eigenfunction: Eigenfunction

    def offset(self, x: ArrayLike) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        s = x @ np.asarray(self.normal, dtype=float) - self.alpha
        return np.abs(s - np.round(s))

    def contains(self, x: ArrayLike, tol: float = 1e-12) -> np.ndarray:
        return self.offset(x) <= tol

    def sample(self, count: int, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        normal = np.asarray(self.normal, dtype=float)
        x = rng.random((count, len(normal)))
        s = x @ normal - self.alpha
        return x - np.outer(s - np.round(s), normal) / (normal @ normal)


def two_frequency_nodal(
    xi: Sequence[int],
    xi_prime: Sequence[int],
    alpha: float
) -> LineFamily:
    xi = tuple(int(v) for v in xi)
    xi_prime = tuple(int(v) for v in xi_prime)
    if xi == xi_prime:
        raise InputInvalidError("the two frequencies must differ")
    if len(xi) != len(xi_prime) or _norm2(xi) != _norm2(xi_prime):
        raise InputInvalidError(f"{xi} and {xi_prime} are not on one shell")
    phi = Eigenfunction.from_mapping(
        len(xi), _norm2(xi),
        {xi: 1.0, xi_prime: -np.exp(2j * np.pi * alpha)},
    )
    normal = tuple(a - b for a, b in zip(xi, xi_prime))
    return LineFamily(normal=normal, alpha=alpha, eigenfunction=phi)


def random_eigenfunction(
    d: int,
    r2: int,
    seed: int,
    real: bool = False
) -> Eigenfunction:
    """Seeded random coefficients on the full shell."""
    shell = enumerate_shell(d, r2)
    if not len(shell):
        raise DegenerateInput(f"shell d={d} r2={r2} is empty")
    rng = np.random.default_rng(seed)
    values = rng.standard_normal(len(shell)) \
        + 1j * rng.standard_normal(len(shell))
    coeffs = dict(zip(shell.tuples, values))
    if real:
        for xi in shell.tuples:
            partner = tuple(-v for v in xi)
            if xi < partner:
                coeffs[partner] = np.conj(coeffs[xi])
    logger.debug(f"random eigenfunction d={d} r2={r2} seed={seed}")
    return Eigenfunction.from_mapping(d, r2, coeffs, real=real)

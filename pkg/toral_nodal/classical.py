"""Legendre polynomials, Laurent polynomials on T^2 and the abc box bound.

Polynomial arithmetic is exact over the rationals; roots are refined in
256-bit floating point after exact bracketing.
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
import sympy

from toral_nodal.eigenfun import Eigenfunction, ShiftFrame, evaluate
from toral_nodal.types import (
    FrequencyBoxReport, GeodesicVerdict, LaurentDocument, LaurentTerm
)
from toral_nodal.utils import (
    DegenerateInput, InputInvalidError, NumericalFailure, parallel_map
)

logger = logging.getLogger(__name__)

ROOT_PRECISION = 256

Number = Union[int, Fraction]


def _trim(coefficients: Sequence[Number]) -> Tuple[Fraction, ...]:
    coefficients = [Fraction(c) for c in coefficients]
    while coefficients and coefficients[-1] == 0:
        coefficients.pop()
    return tuple(coefficients)


@dataclass(frozen=True)
class RationalPoly:
    """Exact polynomial, coefficients in ascending degree.

    The zero polynomial has no coefficients; otherwise the last one is
    nonzero.
    """
    coefficients: Tuple[Fraction, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "coefficients", _trim(self.coefficients))

    @classmethod
    def constant(cls, value: Number) -> "RationalPoly":
        return cls((Fraction(value),))

    @classmethod
    def monomial(cls, degree: int, value: Number = 1) -> "RationalPoly":
        return cls((Fraction(0),) * degree + (Fraction(value),))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coefficients

    @property
    def leading(self) -> Fraction:
        return self.coefficients[-1] if self.coefficients else Fraction(0)

    def __add__(self, other: "RationalPoly") -> "RationalPoly":
        n = max(len(self.coefficients), len(other.coefficients))
        a = self.coefficients + (Fraction(0),) * (n - len(self.coefficients))
        b = other.coefficients + (Fraction(0),) * (n - len(other.coefficients))
        return RationalPoly(tuple(x + y for x, y in zip(a, b)))

    def __neg__(self) -> "RationalPoly":
        return self.scale(-1)

    def __sub__(self, other: "RationalPoly") -> "RationalPoly":
        return self + (-other)

    def __mul__(self, other: "RationalPoly") -> "RationalPoly":
        if self.is_zero or other.is_zero:
            return RationalPoly(())
        out = [Fraction(0)] * (len(self.coefficients) + len(other.coefficients) - 1)
        for i, a in enumerate(self.coefficients):
            for j, b in enumerate(other.coefficients):
                out[i + j] += a * b
        return RationalPoly(tuple(out))

    def scale(self, factor: Number) -> "RationalPoly":
        return RationalPoly(tuple(Fraction(factor) * c for c in self.coefficients))

    def monic(self) -> "RationalPoly":
        if self.is_zero:
            return self
        return self.scale(1 / self.leading)

    def __call__(self, x: Number) -> Fraction:
        value = Fraction(0)
        for c in reversed(self.coefficients):
            value = value * x + c
        return value

    def mp_eval(self, x):
        value = mpmath.mpf(0)
        for c in reversed(self.coefficients):
            value = value * x + mpmath.mpf(c.numerator) / c.denominator
        return value

    def antiderivative(self) -> "RationalPoly":
        return RationalPoly((Fraction(0),) + tuple(
            c / (k + 1) for k, c in enumerate(self.coefficients)
        ))

    def integrate(self, lo: Number, hi: Number) -> Fraction:
        F = self.antiderivative()
        return F(Fraction(hi)) - F(Fraction(lo))

    def reflected(self) -> "RationalPoly":
        """p(-x)."""
        return RationalPoly(tuple(
            c if k % 2 == 0 else -c for k, c in enumerate(self.coefficients)
        ))

    def to_sympy(self, x: sympy.Symbol) -> sympy.Poly:
        return sympy.Poly(
            [sympy.Rational(c.numerator, c.denominator)
             for c in reversed(self.coefficients)] or [0],
            x, domain=sympy.QQ,
        )

    @classmethod
    def from_sympy(cls, poly: sympy.Poly) -> "RationalPoly":
        return cls(tuple(
            Fraction(int(c.p), int(c.q)) for c in reversed(poly.all_coeffs())
        ))

    def __str__(self) -> str:
        if self.is_zero:
            return "0"
        terms = []
        for k, c in reversed(list(enumerate(self.coefficients))):
            if c == 0:
                continue
            power = "" if k == 0 else ("x" if k == 1 else f"x^{k}")
            if power and c == 1:
                terms.append(power)
            elif power and c == -1:
                terms.append(f"-{power}")
            else:
                terms.append(f"{c}{'*' + power if power else ''}")
        return " + ".join(terms).replace("+ -", "- ")


X = RationalPoly.monomial(1)
ONE = RationalPoly.constant(1)


@lru_cache(maxsize=None)
def legendre(n: int) -> RationalPoly:
    """P_n = 2^-n sum_k (-1)^k C(n, k) C(2n - 2k, n) x^(n - 2k)."""
    if int(n) != n or n < 0:
        raise InputInvalidError(f"Legendre degree must be >= 0, got {n}")
    coefficients = [Fraction(0)] * (n + 1)
    for k in range(n // 2 + 1):
        coefficients[n - 2 * k] = Fraction(
            (-1) ** k * math.comb(n, k) * math.comb(2 * n - 2 * k, n), 2 ** n
        )
    return RationalPoly(tuple(coefficients))


def legendre_recurrence(n: int) -> RationalPoly:
    """(k + 1) P_{k+1} = (2k + 1) x P_k - k P_{k-1}."""
    if n < 0:
        raise InputInvalidError(f"Legendre degree must be >= 0, got {n}")
    previous, current = ONE, X
    if n == 0:
        return previous
    for k in range(1, n):
        previous, current = current, (
            (X * current).scale(2 * k + 1) - previous.scale(k)
        ).scale(Fraction(1, k + 1))
    return current


def common_roots(m: int, n: int) -> RationalPoly:
    """Monic gcd of P_m and P_n over Q."""
    if m == n:
        raise InputInvalidError("common_roots needs two different degrees")
    x = sympy.Symbol("x")
    gcd = sympy.gcd(legendre(m).to_sympy(x), legendre(n).to_sympy(x))
    return RationalPoly.from_sympy(gcd).monic()


def stieltjes_prediction(m: int, n: int) -> RationalPoly:
    """x when both degrees are odd, else 1."""
    return X if m % 2 == 1 and n % 2 == 1 else ONE


@dataclass(frozen=True)
class GcdRow:
    m: int
    n: int
    gcd: RationalPoly
    predicted: bool


def gcd_table(max_degree: int) -> List[GcdRow]:
    pairs = [
        (m, n) for n in range(2, max_degree + 1) for m in range(1, n)
    ]

    def row(pair: Tuple[int, int]) -> GcdRow:
        m, n = pair
        gcd = common_roots(m, n)
        return GcdRow(m=m, n=n, gcd=gcd, predicted=gcd == stieltjes_prediction(m, n))

    rows = parallel_map(row, pairs)
    logger.info(
        f"gcd table up to {max_degree}: "
        f"{sum(not r.predicted for r in rows)} deviations"
    )
    return rows


def _zonal_roots(n: int) -> list:
    """Zeros of P_n in decreasing order, as 256-bit mpf.

    The k-th zero lies in ((k - 1/2) pi / (n + 1/2), k pi / (n + 1/2));
    each bracket is checked for a sign change before refinement.
    """
    if int(n) != n or n < 1:
        raise InputInvalidError(f"need n >= 1, got {n}")
    P = legendre(n)
    roots = []
    with mpmath.workprec(ROOT_PRECISION):
        scale = mpmath.pi / (n + mpmath.mpf(1) / 2)
        for k in range(1, n + 1):
            lo = mpmath.cos(k * scale)
            hi = mpmath.cos((k - mpmath.mpf(1) / 2) * scale)
            f_lo, f_hi = P.mp_eval(lo), P.mp_eval(hi)
            if f_lo * f_hi > 0:
                raise NumericalFailure(f"no sign change for root {k} of P_{n}")
            if f_lo == 0 or f_hi == 0:
                root = lo if f_lo == 0 else hi
            else:
                root = mpmath.findroot(P.mp_eval, (lo, hi), solver="anderson")
            roots.append(root)
    return roots


def zonal_parallels(n: int) -> List[float]:
    """Colatitudes theta_{n,j} of the zonal nodal set, increasing."""
    with mpmath.workprec(ROOT_PRECISION):
        return [float(mpmath.acos(root)) for root in _zonal_roots(n)]


@dataclass(frozen=True)
class ZonalCheck:
    n: int
    parallels: Tuple[float, ...]
    max_residual: float
    equator: Optional[bool]


def zonal_nodal_check(n: int) -> ZonalCheck:
    """P_n at each cos theta_{n,j} (256-bit), and P_n(0) = 0 exactly for odd n."""
    P = legendre(n)
    with mpmath.workprec(ROOT_PRECISION):
        roots = _zonal_roots(n)
        residual = max(abs(P.mp_eval(root)) for root in roots)
        parallels = [float(mpmath.acos(root)) for root in roots]
    return ZonalCheck(
        n=n,
        parallels=tuple(parallels),
        max_residual=float(residual),
        equator=P(0) == 0 if n % 2 == 1 else None,
    )


def orthogonality(m: int, n: int) -> Fraction:
    """int_{-1}^{1} P_m P_n dx, exactly."""
    return (legendre(m) * legendre(n)).integrate(-1, 1)


@dataclass(frozen=True)
class LaurentPoly2:
    """P(z1, z2) = z^shifts * sum_n c_n z^n on the torus."""
    terms: Dict[Tuple[int, int], complex] = field(repr=False)
    shifts: Tuple[int, int] = (0, 0)

    @property
    def shifted_terms(self) -> Dict[Tuple[int, int], complex]:
        a1, a2 = self.shifts
        return {(n1 + a1, n2 + a2): c for (n1, n2), c in self.terms.items()}

    def valuation(self, axis: int) -> int:
        return min(n[axis] for n in self.shifted_terms)

    def is_polynomial(self) -> bool:
        return self.valuation(0) >= 0 and self.valuation(1) >= 0

    def coprime_to_axes(self) -> bool:
        """Neither z1 nor z2 divides P."""
        return self.valuation(0) == 0 and self.valuation(1) == 0

    def normalized(self) -> "LaurentPoly2":
        return LaurentPoly2(
            terms=dict(self.terms),
            shifts=(
                -min(n[0] for n in self.terms), -min(n[1] for n in self.terms)
            ),
        )

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        """P at points z of shape (k, 2)."""
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        value = np.zeros(len(z), dtype=complex)
        for (n1, n2), c in sorted(self.shifted_terms.items()):
            value += c * z[:, 0] ** n1 * z[:, 1] ** n2
        return value

    def on_torus(self, x: np.ndarray) -> np.ndarray:
        """P(e(x1), e(x2)) e(-<a, x>), which recovers the eigenfunction."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = np.exp(2j * np.pi * x)
        return self.evaluate(z) * np.exp(-2j * np.pi * (x @ np.asarray(self.shifts)))

    def document(self) -> LaurentDocument:
        return LaurentDocument(
            shifts=self.shifts,
            terms=[
                LaurentTerm(n1=n1, n2=n2, re=float(c.real), im=float(c.imag))
                for (n1, n2), c in sorted(self.shifted_terms.items())
            ],
        )


def to_laurent(phi: Eigenfunction) -> LaurentPoly2:
    """Frequencies become exponents; negative exponents are shifted to 0."""
    if phi.d != 2:
        raise InputInvalidError(f"Laurent polynomials need d=2, got d={phi.d}")
    terms = {
        (int(xi[0]), int(xi[1])): complex(a)
        for xi, a in zip(phi.freqs, phi.coeffs) if a != 0
    }
    if not terms:
        raise DegenerateInput("eigenfunction has no nonzero coefficient")
    shifts = (
        max(0, -min(n[0] for n in terms)), max(0, -min(n[1] for n in terms))
    )
    return LaurentPoly2(terms=terms, shifts=shifts)


def laurent_consistency(
    laurent: LaurentPoly2,
    phi: Eigenfunction,
    count: int = 100,
    seed: int = 42
) -> float:
    x = np.random.default_rng(seed).random((count, 2))
    return float(np.max(np.abs(laurent.on_torus(x) - evaluate(phi, x))))


def abc_bound(m: int, genus: int, s: int) -> int:
    """m (m - 1) / 2 * (2 genus - 2 + s)."""
    if m < 2 or genus < 0 or s < 0:
        raise InputInvalidError(
            f"need m >= 2, genus >= 0, s >= 0; got ({m}, {genus}, {s})"
        )
    return m * (m - 1) // 2 * (2 * genus - 2 + s)


def frequency_box_check(
    phi: Eigenfunction,
    frame: ShiftFrame,
    genus: int,
    s: int,
    c_s: float
) -> FrequencyBoxReport:
    """max ||xi - xi0||_inf against abc_bound(r - 1, genus, s) / c_s.

    genus, s and c_s describe the curve and are taken as given.
    """
    if not c_s > 0:
        raise InputInvalidError(f"c_S must be positive, got {c_s}")
    support = phi.freqs[np.abs(phi.coeffs) > 0]
    xi0 = np.asarray(frame.xi0)
    if not np.any(np.all(support == xi0, axis=1)):
        raise InputInvalidError(f"xi0={frame.xi0} is not in the support")
    r = len(support)
    offsets = np.abs(support - xi0).max(axis=1)
    report = FrequencyBoxReport(r=r, max_offset=int(offsets.max()))
    if r < 3:
        report.note = "the abc bound applies from r >= 3 frequencies"
        return report
    report.bound = abc_bound(r - 1, genus, s) / c_s
    report.passed = bool(report.max_offset <= report.bound)
    report.note = "box bound holds" if report.passed else "box bound fails"
    return report


def is_closed_geodesic_segment(
    samples: np.ndarray,
    tol: float = 1e-6,
    max_denominator: int = 50
) -> GeodesicVerdict:
    """Total least squares line through consecutive samples on T^2.

    Accepted when the residual is below ``tol`` and the slope is within
    ``tol`` of a fraction p/q with q <= max_denominator.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 2 or len(samples) < 3:
        raise InputInvalidError("need at least 3 samples in T^2")
    points = np.unwrap(samples, period=1.0, axis=0)
    centered = points - points.mean(axis=0)
    if np.max(np.linalg.norm(centered, axis=1)) < 1e-14:
        raise DegenerateInput("samples coincide")
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    direction, normal = vt[0], vt[1]
    residual = float(np.max(np.abs(centered @ normal)))
    if residual >= tol:
        return GeodesicVerdict(closed=False, residual=residual)

    steep = abs(direction[1]) > abs(direction[0])
    slope = direction[0] / direction[1] if steep else direction[1] / direction[0]
    ratio = Fraction(slope).limit_denominator(max_denominator)
    if abs(float(ratio) - slope) >= tol:
        return GeodesicVerdict(closed=False, residual=residual)
    p, q = ratio.numerator, ratio.denominator
    vector = (p, q) if steep else (q, p)
    return GeodesicVerdict(closed=True, direction=vector, residual=residual)

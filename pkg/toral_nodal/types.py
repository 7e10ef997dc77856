from typing import Dict, List, Optional, Tuple, Type, Union

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field, field_validator
from pydantic.dataclasses import dataclass as pydantic_dataclass

from toral_nodal.constants import (
    BUMP_FILL, D_MULTIPLIER, DEFAULT_DELTA2, DEFAULT_GRID, DEFAULT_SEED,
    DOMAIN_RADIUS, NODAL_GRID, TAU
)
from toral_nodal.utils import OutputFormat, angle_between, reflect, unit

PydanticModel = Type[BaseModel]

Vector = Union[List[float], Tuple[float, ...]]


def tangent_frame(center: np.ndarray) -> np.ndarray:
    """Orthonormal basis (as columns) of the hyperplane orthogonal to center."""
    return scipy.linalg.null_space(np.atleast_2d(center))


@pydantic_dataclass(frozen=True)
class Cap:
    """
        spherical cap of directions within ``angle`` of ``center``

        cap = Cap.around([0, 0, 1], 0.2)
        cap.contains([0, 0.1, 1])
    """
    center: Tuple[float, ...]
    angle: float

    @field_validator("center")
    @classmethod
    def _unit_center(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        norm = float(np.linalg.norm(value))
        if len(value) < 2 or abs(norm - 1.0) > 1e-12:
            raise ValueError(f"cap center must be a unit vector, |c| = {norm}")
        return tuple(float(v) for v in value)

    @field_validator("angle")
    @classmethod
    def _angle_range(cls, value: float) -> float:
        if not 0.0 < value <= np.pi:
            raise ValueError(f"cap angle must lie in (0, pi], got {value}")
        return float(value)

    @classmethod
    def around(cls, center: Vector, angle: float) -> "Cap":
        return cls(center=tuple(unit(center)), angle=min(angle, np.pi))

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.center)

    @property
    def dimension(self) -> int:
        return len(self.center)

    def contains(self, y, tol: float = 0.0):
        y = unit(y)
        inside = angle_between(y, self.vector) <= self.angle + tol
        return bool(inside) if np.ndim(inside) == 0 else inside

    def contains_cap(self, other: "Cap", tol: float = 0.0) -> bool:
        gap = float(angle_between(self.vector, other.vector))
        return gap + other.angle <= self.angle + tol

    def reflect(self, u: Vector) -> "Cap":
        return Cap.around(reflect(u, self.vector), self.angle)

    def sample(
        self,
        n_radial: int,
        n_angular: int = 16,
        seed: int = DEFAULT_SEED
    ) -> np.ndarray:
        """Deterministic rings of directions, including center and rim."""
        frame = tangent_frame(self.vector)
        k = frame.shape[1]
        if k == 1:
            directions = np.array([[1.0], [-1.0]])
        elif k == 2:
            phases = 2 * np.pi * np.arange(n_angular) / n_angular
            directions = np.stack([np.cos(phases), np.sin(phases)], axis=1)
        else:
            rng = np.random.default_rng(seed)
            directions = unit(rng.standard_normal((n_angular, k)))
        radii = self.angle * np.arange(1, n_radial + 1) / n_radial
        tangent = directions @ frame.T
        rings = (
            np.cos(radii)[:, None, None] * self.vector
            + np.sin(radii)[:, None, None] * tangent[None, :, :]
        )
        return np.vstack([self.vector[None, :], rings.reshape(-1, k + 1)])

    def probe(self, count: int, seed: int = DEFAULT_SEED) -> np.ndarray:
        """Probe directions covering the cap, ``count`` of them."""
        frame = tangent_frame(self.vector)
        k = frame.shape[1]
        rng = np.random.default_rng(seed)
        if k == 1:
            radii = np.linspace(-self.angle, self.angle, count)
            tangent = np.outer(np.sign(radii), frame[:, 0])
            radii = np.abs(radii)
        else:
            directions = unit(rng.standard_normal((count, k)))
            radii = self.angle * rng.random(count) ** (1.0 / k)
            tangent = directions @ frame.T
        return (
            np.cos(radii)[:, None] * self.vector
            + np.sin(radii)[:, None] * tangent
        )


class CoefficientEntry(BaseModel):
    xi: List[int]
    re: float
    im: float


class EigenfunctionDocument(BaseModel):
    d: int
    r2: int
    real: bool = False
    coeffs: List[CoefficientEntry]


class ConstantsDocument(BaseModel):
    c: Dict[int, str]
    delta: Dict[int, str]


class ShellStats(BaseModel):
    d: int
    r2: int
    count: int
    min_distance2: Optional[int] = None
    diameter2: Optional[int] = None


class ShellDocument(BaseModel):
    d: int
    r2: int
    points: List[List[int]]
    clusters: Optional[List[List[int]]] = None
    rho: Optional[float] = None
    constants: Optional[ConstantsDocument] = None
    hypothesis_holds: Optional[bool] = None
    stats: Optional[ShellStats] = None


class CapViolation(BaseModel):
    center_index: int
    points: List[int]
    rank: int
    reason: str


class JarnikReport(BaseModel):
    d: int
    r2: int
    cap_radius: float
    caps_scanned: int
    violations: List[CapViolation] = []


class PatchNode(BaseModel):
    t: float
    xhat: List[float]
    x1: float
    z_re: List[float]
    z_im: List[float]
    w: float


class PatchDocument(BaseModel):
    v: List[float]
    tau: float
    axis: int
    nodes: List[PatchNode]


class ClusterNode(BaseModel):
    frequencies: List[List[int]]
    rho: float
    leaf_constant: Optional[float] = None
    leaf_delta: Optional[float] = None
    forced: bool = False
    children: List["ClusterNode"] = []


class OffDiagonalEntry(BaseModel):
    xi: List[int]
    xi_prime: List[int]
    weight: float
    j_abs: float


class CertificateDocument(BaseModel):
    diagonal_sum: float
    offdiag_bound: float
    tail_penalty: float
    constant: float
    verdict: float
    mean_square: Optional[float] = None
    refinement_error: Optional[float] = None
    d_cutoff: float
    cluster_tree: ClusterNode
    ledger: List[OffDiagonalEntry] = []


class CapStep(BaseModel):
    center: List[float]
    angle: float
    epsilon: float
    growth: float = 0.0
    covered: bool


class CapFlowReport(BaseModel):
    delta0: float
    delta1: float
    epsilon_d: float
    steps: List[CapStep]
    full_sphere: bool
    step_bound: int


class LaurentTerm(BaseModel):
    n1: int
    n2: int
    re: float
    im: float


class LaurentDocument(BaseModel):
    shifts: Tuple[int, int]
    terms: List[LaurentTerm]
    consistency: Optional[float] = None
    box: Optional["FrequencyBoxReport"] = None


class FrequencyBoxReport(BaseModel):
    r: int
    max_offset: int
    bound: Optional[float] = None
    passed: Optional[bool] = None
    note: str = ""


class GeodesicVerdict(BaseModel):
    closed: bool
    direction: Optional[Tuple[int, int]] = None
    residual: float


class ExperimentConfig(BaseModel):
    """
        base config for every command

        class ShellConfig(ExperimentConfig):
            d: int = 2
            r2: int
    """
    model_config = ConfigDict(extra="forbid")

    seed: int = DEFAULT_SEED
    output: Optional[str] = None
    camel: bool = False

    @field_validator("seed")
    @classmethod
    def _seed(cls, value: int) -> int:
        if value < 0:
            raise ValueError(f"seed must be non negative, got {value}")
        return value


class ShellConfig(ExperimentConfig):
    d: int = Field(2, ge=2)
    r2: int = Field(..., ge=1)


class ClustersConfig(ShellConfig):
    rho: float = Field(..., gt=0)
    delta2: str = str(DEFAULT_DELTA2)


class JarnikConfig(ShellConfig):
    cap_radius: Optional[float] = Field(None, gt=0)
    cap_factor: float = Field(0.5, gt=0)


class NodalConfig(ExperimentConfig):
    grid: int = Field(NODAL_GRID, ge=4)
    phi: Optional[str] = None
    geodesic: Optional[Tuple[int, int]] = None
    offset: float = 0.0
    multiple: int = Field(1, ge=1)
    r2: int = Field(25, ge=1)
    svg: Optional[str] = None


class RestrictConfig(ExperimentConfig):
    r2: int = Field(1105, ge=1)
    samples: int = Field(50, ge=1)
    radius: float = Field(0.2, gt=0)
    arc: float = Field(1.0, gt=0)
    nodes: int = Field(200, ge=8)


class MeanSquareConfig(ExperimentConfig):
    d: int = Field(2, ge=2, le=3)
    r2: int = Field(25, ge=1)
    phi: Optional[str] = None
    tau: float = Field(TAU, gt=0)
    delta: float = Field(DOMAIN_RADIUS, gt=0)
    d_multiplier: float = Field(D_MULTIPLIER, gt=0)
    grid: Tuple[int, int] = DEFAULT_GRID
    rho: Optional[float] = Field(None, gt=0)
    delta2: str = str(DEFAULT_DELTA2)
    fill: float = Field(BUMP_FILL, gt=0, le=1)
    format: OutputFormat = OutputFormat.JSON


class OscDecayConfig(ExperimentConfig):
    r2: int = Field(5525, ge=1)
    tau: float = Field(0.1, gt=0)
    flat: bool = False
    flat_tau: float = Field(1e-4, gt=0)
    pairs: int = Field(12, ge=3)
    grid: Tuple[int, int] = (20, 20)


class CapFlowConfig(ExperimentConfig):
    d: int = Field(2, ge=2)
    delta1: float = Field(0.4, gt=0)
    delta0: Optional[float] = Field(None, gt=0)
    theta0: float = Field(0.5, gt=0)
    max_steps: int = Field(1000, ge=1)


class LegendreConfig(ExperimentConfig):
    pairs: int = Field(40, ge=2)
    parallels: Optional[int] = Field(None, ge=1)


class LaurentConfig(ExperimentConfig):
    phi: Optional[str] = None
    r2: int = Field(25, ge=1)
    genus: int = Field(0, ge=0)
    s: int = Field(3, ge=0)
    c_s: float = Field(1.0, gt=0)


ClusterNode.model_rebuild()
LaurentDocument.model_rebuild()

"""Nodal lines of eigenfunctions on T^2 by marching squares.

The grid has (N + 1)^2 nodes i/N, both ends included; the x = 1 and y = 1
rows are copies of x = 0 and y = 0.
"""
import csv
import io
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from toral_nodal.constants import NODAL_GRID, SVG_TEMPLATE
from toral_nodal.eigenfun import Eigenfunction, evaluate
from toral_nodal.utils import InputInvalidError

logger = logging.getLogger(__name__)

EdgeKey = Tuple[str, int, int]

# corners 0:(i, j) 1:(i+1, j) 2:(i+1, j+1) 3:(i, j+1)
# edges   0: c0-c1  1: c1-c2  2: c3-c2  3: c0-c3
SEGMENT_TABLE: Dict[int, Tuple[Tuple[int, int], ...]] = {
    1: ((3, 0),), 2: ((0, 1),), 3: ((3, 1),), 4: ((1, 2),),
    6: ((0, 2),), 7: ((3, 2),), 8: ((2, 3),), 9: ((0, 2),),
    11: ((1, 2),), 12: ((1, 3),), 13: ((0, 1),), 14: ((3, 0),),
}

# saddle cases by the sign of the cell mean
SADDLE_TABLE: Dict[Tuple[int, bool], Tuple[Tuple[int, int], ...]] = {
    (5, True): ((0, 1), (2, 3)),
    (5, False): ((3, 0), (1, 2)),
    (10, True): ((3, 0), (1, 2)),
    (10, False): ((0, 1), (2, 3)),
}


def nodal_grid(phi: Eigenfunction, n: int = NODAL_GRID) -> np.ndarray:
    """Re phi at (i/n, j/n), shape (n + 1, n + 1), indexed [i, j]."""
    if phi.d != 2:
        raise InputInvalidError(f"nodal grids need d=2, got d={phi.d}")
    if n < 2:
        raise InputInvalidError(f"grid size must be >= 2, got {n}")
    axis = np.arange(n + 1) / n
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    points = np.stack([xx.ravel(), yy.ravel()], axis=-1)
    values = np.real(evaluate(phi, points)).reshape(n + 1, n + 1)
    values[-1] = values[0]
    values[:, -1] = values[:, 0]
    return values


@dataclass(frozen=True)
class Contour:
    points: Dict[EdgeKey, Tuple[float, float]] = field(repr=False)
    segments: Tuple[Tuple[EdgeKey, EdgeKey], ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.segments)


def _cell_edges(i: int, j: int) -> Tuple[EdgeKey, ...]:
    return (("h", i, j), ("v", i + 1, j), ("h", i, j + 1), ("v", i, j))


def _edge_point(values: np.ndarray, key: EdgeKey, step: float) -> Tuple[float, float]:
    kind, i, j = key
    i2, j2 = (i + 1, j) if kind == "h" else (i, j + 1)
    v1, v2 = values[i, j], values[i2, j2]
    s = -v1 / (v2 - v1)
    return (step * (i + s * (i2 - i)), step * (j + s * (j2 - j)))


def marching_squares(values: np.ndarray) -> Contour:
    """Zero contour of a grid sampled on [0, 1]^2, linear on each edge."""
    values = np.asarray(values, dtype=float)
    step = 1.0 / (values.shape[0] - 1)
    negative = values < 0
    case = (
        negative[:-1, :-1] * 1 + negative[1:, :-1] * 2
        + negative[1:, 1:] * 4 + negative[:-1, 1:] * 8
    )
    points: Dict[EdgeKey, Tuple[float, float]] = {}
    segments: List[Tuple[EdgeKey, EdgeKey]] = []
    for i, j in np.argwhere((case != 0) & (case != 15)):
        i, j = int(i), int(j)
        index = int(case[i, j])
        if index in (5, 10):
            mean = values[i:i + 2, j:j + 2].mean()
            pairs = SADDLE_TABLE[(index, bool(mean < 0))]
        else:
            pairs = SEGMENT_TABLE[index]
        edges = _cell_edges(i, j)
        for a, b in pairs:
            for key in (edges[a], edges[b]):
                if key not in points:
                    points[key] = _edge_point(values, key, step)
            segments.append((edges[a], edges[b]))
    return Contour(points=points, segments=tuple(segments))


def polylines(contour: Contour) -> List[np.ndarray]:
    """Chain segments sharing a grid edge into open or closed polylines."""
    neighbours: Dict[EdgeKey, List[EdgeKey]] = defaultdict(list)
    for a, b in contour.segments:
        neighbours[a].append(b)
        neighbours[b].append(a)
    visited = set()
    lines = []

    def walk(start: EdgeKey) -> List[EdgeKey]:
        chain = [start]
        visited.add(start)
        current = start
        while True:
            following = [k for k in neighbours[current] if k not in visited]
            if not following:
                if len(chain) > 2 and start in neighbours[current]:
                    chain.append(start)
                return chain
            current = following[0]
            visited.add(current)
            chain.append(current)

    ends = sorted(k for k, v in neighbours.items() if len(v) == 1)
    for key in ends + sorted(neighbours):
        if key in visited:
            continue
        chain = walk(key)
        lines.append(np.array([contour.points[k] for k in chain]))
    return lines


@dataclass(frozen=True)
class NodalSet:
    lines: Tuple[np.ndarray, ...] = field(repr=False)
    step: float
    gradient_bound: float

    @property
    def vertices(self) -> np.ndarray:
        if not self.lines:
            return np.empty((0, 2))
        return np.vstack(self.lines)

    def vertex_tolerance(self) -> float:
        return 10 * self.step * self.gradient_bound

    def csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["polyline", "vertex", "x", "y"])
        for p, line in enumerate(self.lines):
            for k, (x, y) in enumerate(line):
                writer.writerow([p, k, f"{x:.9f}", f"{y:.9f}"])
        return buffer.getvalue()


def gradient_bound(phi: Eigenfunction) -> float:
    """2 pi sum |a_xi| |xi| >= sup |grad phi|."""
    return float(
        2 * np.pi * np.sum(np.abs(phi.coeffs) * np.linalg.norm(phi.freqs, axis=1))
    )


def nodal_set(phi: Eigenfunction, n: int = NODAL_GRID) -> NodalSet:
    values = nodal_grid(phi, n)
    lines = polylines(marching_squares(values))
    logger.info(f"nodal set on a {n}x{n} grid: {len(lines)} polylines")
    return NodalSet(
        lines=tuple(lines), step=1.0 / n, gradient_bound=gradient_bound(phi)
    )


def render_svg(
    lines: Sequence[np.ndarray],
    title: str = "nodal set",
    size: int = 512
) -> str:
    paths = []
    for line in lines:
        coords = " L ".join(f"{x:.6f} {y:.6f}" for x, y in line)
        paths.append(f'    <path d="M {coords}"/>')
    return SVG_TEMPLATE.format(
        size=size, title=title, stroke=f"{1.0 / size:.6f}",
        paths="\n".join(paths),
    )

import numpy as np
import pytest

from toral_nodal.eigenfun import (
    evaluate, make_geodesic_vanisher, random_eigenfunction
)
from toral_nodal.nodal import (
    gradient_bound, marching_squares, nodal_grid, nodal_set, polylines,
    render_svg
)
from toral_nodal.utils import InputInvalidError

SEED = 42


def test_vertical_lines() -> None:
    phi = make_geodesic_vanisher((1, 0), 0.013, 1)
    nodal = nodal_set(phi, 64)
    assert len(nodal.lines) == 2
    x = nodal.vertices[:, 0]
    offsets = np.minimum(np.abs(x - 0.013), np.abs(x - 0.513))
    assert np.all(offsets < 1e-5)
    for line in nodal.lines:
        assert len(line) == 65
        assert {line[0][1], line[-1][1]} == {0.0, 1.0}


@pytest.mark.parametrize(
    "phi",
    [
        make_geodesic_vanisher((1, 1), 0.1, 1),
        make_geodesic_vanisher((2, -1), 0.37, 2),
        random_eigenfunction(2, 25, SEED, real=True),
        random_eigenfunction(2, 65, SEED + 1, real=True),
    ]
)
def test_vertices_lie_near_the_zero_set(phi) -> None:
    nodal = nodal_set(phi, 128)
    assert len(nodal.lines) > 0
    values = np.abs(evaluate(phi, nodal.vertices))
    assert np.all(values <= nodal.vertex_tolerance())
    assert nodal.step == 1 / 128
    assert nodal.gradient_bound == gradient_bound(phi)


def test_grid_repeats_at_the_far_edges() -> None:
    phi = random_eigenfunction(2, 25, SEED, real=True)
    values = nodal_grid(phi, 32)
    assert values.shape == (33, 33)
    assert np.array_equal(values[0], values[-1])
    assert np.array_equal(values[:, 0], values[:, -1])


def test_nodal_grid_rejects() -> None:
    with pytest.raises(InputInvalidError):
        nodal_grid(random_eigenfunction(3, 9, SEED, real=True), 16)
    with pytest.raises(InputInvalidError):
        nodal_grid(random_eigenfunction(2, 25, SEED, real=True), 1)


def test_closed_contour() -> None:
    axis = np.linspace(0.0, 1.0, 41)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    values = (xx - 0.5) ** 2 + (yy - 0.5) ** 2 - 0.09
    lines = polylines(marching_squares(values))
    assert len(lines) == 1
    loop = lines[0]
    assert np.array_equal(loop[0], loop[-1])
    radii = np.linalg.norm(loop - 0.5, axis=1)
    assert np.all(np.abs(radii - 0.3) < 0.01)


@pytest.mark.parametrize(
    "values",
    [[[-1.0, 1.0], [1.0, -1.0]], [[-1.0, 0.5], [0.5, -1.0]], [[1.0, -1.0], [-1.0, 1.0]]]
)
def test_saddle_cells(values: list) -> None:
    contour = marching_squares(np.array(values))
    assert len(contour) == 2
    assert len(contour.points) == 4


def test_csv() -> None:
    nodal = nodal_set(make_geodesic_vanisher((1, 0), 0.013, 1), 16)
    lines = nodal.csv().splitlines()
    assert lines[0] == "polyline,vertex,x,y"
    assert len(lines) == 1 + 2 * 17
    assert lines[1].startswith("0,0,0.01")


def test_svg() -> None:
    nodal = nodal_set(make_geodesic_vanisher((1, 1), 0.1, 1), 32)
    svg = render_svg(nodal.lines, title="diagonal")
    assert svg.startswith("<svg")
    assert "<title>diagonal</title>" in svg
    assert svg.count("<path") == len(nodal.lines)

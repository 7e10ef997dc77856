import numpy as np
import pytest

from toral_nodal.surface import (
    AnalyticGraph, BumpSpec, build_patch, gauss_legendre, stationary_residuals
)
from toral_nodal.utils import (
    InputInvalidError, PreconditionViolated, cauchy_riemann_residual, unit
)

TAU = 0.05
V3 = unit([-0.6, -0.8, -0.1])
V2 = unit([-0.96, -0.28])


@pytest.fixture(scope="module")
def paraboloid_patch():
    S = AnalyticGraph.parse("(x1**2 + x2**2) / 2", 3)
    return build_patch(S, V3, TAU)


def test_gauss_legendre() -> None:
    nodes, weights = gauss_legendre(8, 0.0, 2.0)
    assert weights.sum() == pytest.approx(2.0)
    assert weights @ nodes ** 5 == pytest.approx(2.0 ** 6 / 6)


def test_bump() -> None:
    bump = BumpSpec.default(TAU, (0.1,), 0.05, fill=1.0)
    assert bump.t_center == pytest.approx(1.5 * TAU)
    assert bump(np.array([1.5 * TAU]), np.array([[0.1]])) == pytest.approx([1.0])
    assert bump(np.array([1.5 * TAU]), np.array([[0.16]])) == pytest.approx([0.0])
    assert bump(np.array([1.99 * TAU]), np.array([[0.1]]))[0] < 1e-3
    shrunk = bump.shrunk()
    assert shrunk.x_radius == pytest.approx(0.025)


@pytest.mark.parametrize(
    "bump",
    [
        BumpSpec(t_center=0.075, t_radius=0.03, x_center=(0.0,), x_radius=0.1),
        BumpSpec(t_center=0.075, t_radius=0.02, x_center=(0.25,), x_radius=0.1),
        BumpSpec(t_center=0.075, t_radius=0.0, x_center=(), x_radius=0.1),
    ],
)
def test_bump_validation(bump: BumpSpec) -> None:
    with pytest.raises(InputInvalidError):
        bump.validate(TAU, 0.3)


def test_patch_lies_in_the_slab(paraboloid_patch) -> None:
    patch = paraboloid_patch
    assert len(patch) == 24 * 24
    assert patch.imag_defect() <= 1e-8
    assert np.all((patch.t > TAU) & (patch.t < 2 * TAU))
    assert np.all(patch.weights >= 0) and patch.mass > 0
    assert patch.Z.shape == (len(patch), 3)


def test_patch_nodes_are_on_the_complexified_surface(paraboloid_patch) -> None:
    patch = paraboloid_patch
    z = patch.Z[:, :2]
    np.testing.assert_allclose(
        patch.Z[:, 2], patch.surface.value(z), rtol=0, atol=1e-14
    )
    np.testing.assert_allclose(
        z.imag, np.outer(patch.t, patch.v[:2]), atol=1e-12
    )


@pytest.mark.parametrize(
    "text",
    ["(x1**2 + x2**2) / 2", "(x1**2 - x2**2) / 2", "exp(x1) + x2**2 / 2 - x1"]
)
def test_patch_nodes_are_holomorphic(text: str) -> None:
    S = AnalyticGraph.parse(text, 3)
    patch = build_patch(S, V3, TAU, grid_sizes=(12, 12))
    assert patch.imag_defect() <= 1e-8
    picks = np.random.default_rng(42).choice(len(patch), size=50, replace=False)
    for z in patch.Z[picks, :2]:
        residual = cauchy_riemann_residual(
            lambda w: complex(S.value(w)), z, step=1e-5
        )
        assert residual < 1e-6


def test_patch_avoids_the_stationary_locus(paraboloid_patch) -> None:
    patch = paraboloid_patch
    residuals = stationary_residuals(patch.surface, patch.v, patch.Z)
    assert residuals.shape == (len(patch), 2)
    assert np.all(np.abs(residuals[:, 1]) > 1e-3)


def test_refined_patch_is_cached(paraboloid_patch) -> None:
    patch = paraboloid_patch
    refined = patch.refined()
    assert refined.orders == (48, 48)
    assert patch.refined() is refined
    assert patch.at_orders(patch.orders) is patch
    assert refined.mass == pytest.approx(patch.mass, rel=1e-2)


def test_document(paraboloid_patch) -> None:
    doc = paraboloid_patch.document()
    assert len(doc.nodes) == len(paraboloid_patch)
    assert doc.tau == TAU
    assert doc.nodes[0].z_im[0] == pytest.approx(doc.nodes[0].t * V3[0])


def test_plane_curve_tangents() -> None:
    # x stays at w_d / omega and G = (x, x^2 / 2 - t^2 omega^2 / 2)
    S = AnalyticGraph.parse("x1**2 / 2", 2)
    patch = build_patch(S, V2, TAU, grid_sizes=(16, 16))
    omega, w_d = V2
    np.testing.assert_allclose(patch.x[:, 0], w_d / omega, atol=1e-12)
    np.testing.assert_allclose(patch.tangents[:, 0, 0], 0.0, atol=1e-10)
    np.testing.assert_allclose(
        patch.tangents[:, 0, 1], -patch.t * omega ** 2, atol=1e-10
    )
    assert len(patch) == 16


def test_asymptotic_direction_is_rejected() -> None:
    S = AnalyticGraph.parse("(x1**2 - x2**2) / 2", 3)
    with pytest.raises(PreconditionViolated):
        build_patch(S, unit([1.0, 1.0, 0.1]), TAU)


def test_flat_control_needs_allow_degenerate() -> None:
    S = AnalyticGraph.parse("x1 / 2", 2)
    v = unit([-2.0, -1.0])
    with pytest.raises(PreconditionViolated):
        build_patch(S, v, 1e-3)
    patch = build_patch(S, v, 1e-3, allow_degenerate=True)
    assert patch.degenerate
    assert np.ptp(patch.G, axis=0) == pytest.approx([0.0, 0.0], abs=1e-12)

import math

import numpy as np
import pytest

from toral_nodal.eigenfun import (
    Eigenfunction, ShiftFrame, make_cylinder, random_eigenfunction,
    shifted_value, short_sum_with_tail
)
from toral_nodal.restriction import (
    base_case_bound, choose_frame, default_params, lower_bound_certificate,
    mean_square
)
from toral_nodal.surface import AnalyticGraph, build_patch
from toral_nodal.types import CertificateDocument
from toral_nodal.utils import InputInvalidError, PreconditionViolated

SEED = 42
TAU = 0.05
CURVE = AnalyticGraph.parse("x1**2 / 2", 2)
PARABOLOID = AnalyticGraph.parse("(x1**2 + x2**2) / 2", 3)

# nodal curve of cos 2 pi 5x + 2 cos 2 pi 5y on T^2, lifted to S0 x S^1
# with the height in the last coordinate; acos stays off its branch cut
# while |Im x1| < acosh(2) / (10 pi)
CYLINDER = AnalyticGraph.parse("acos(-cos(10*pi*x1) / 2) / (10*pi)", 3)
CYLINDER_TAU = 0.015


@pytest.fixture(scope="module")
def frame_25() -> ShiftFrame:
    return ShiftFrame.for_point((5, 0))


@pytest.fixture(scope="module")
def patch_25(frame_25):
    return build_patch(CURVE, frame_25.v0, TAU)


def test_single_frequency_mean_square_is_the_mass(patch_25, frame_25) -> None:
    phi = Eigenfunction.from_mapping(2, 25, {(5, 0): 1.0})
    assert mean_square(patch_25, phi, frame_25) == pytest.approx(
        patch_25.mass, rel=1e-12
    )


def test_single_frequency_certificate_is_exact(patch_25, frame_25) -> None:
    phi = Eigenfunction.from_mapping(2, 25, {(5, 0): 1j})
    certificate = lower_bound_certificate(patch_25, phi, frame_25)
    assert len(certificate.leaves) == 1
    assert certificate.constant == pytest.approx(patch_25.mass)
    assert certificate.verdict == pytest.approx(patch_25.mass, rel=1e-12)
    assert certificate.mean_square == pytest.approx(patch_25.mass, rel=1e-12)
    assert certificate.tail_penalty == 0.0
    assert certificate.sound


def test_mean_square_rejects_dimension_mismatch(patch_25, frame_25) -> None:
    phi = random_eigenfunction(3, 25, SEED)
    with pytest.raises(InputInvalidError):
        mean_square(patch_25, phi, frame_25)


@pytest.mark.parametrize("a_prime", [0.5, -0.3j, 1.0 + 1.0j])
def test_base_case_bound_is_below_the_integral(
    patch_25, frame_25, a_prime: complex
) -> None:
    result = base_case_bound(patch_25, frame_25, (5, 0), (4, 3), 1.0, a_prime)
    assert 0 < result.bound <= result.integral
    assert result.delta is not None


def test_base_case_bound_with_one_amplitude(patch_25, frame_25) -> None:
    result = base_case_bound(patch_25, frame_25, (5, 0), (4, 3), 1.0, 0.0)
    assert result.constant == pytest.approx(patch_25.mass)
    assert result.delta is None
    assert result.bound <= result.integral


def test_base_case_bound_needs_two_frequencies(patch_25, frame_25) -> None:
    with pytest.raises(InputInvalidError):
        base_case_bound(patch_25, frame_25, (5, 0), (5, 0), 1.0, 1.0)


def test_default_params() -> None:
    phi = random_eigenfunction(2, 25, SEED)
    params = default_params(phi)
    assert params.rho == pytest.approx(5 ** 0.25)
    assert params.max_dim == 4


SOUNDNESS_CASES = [
    (CURVE, 2, 25),
    (CURVE, 2, 65),
    (CURVE, 2, 325),
    (CURVE, 2, 5525),
    (PARABOLOID, 3, 25),
]


def dominated(phi: Eigenfunction, xi0, small: float = 1e-3) -> Eigenfunction:
    """phi scaled down to ``small`` everywhere except a unit coefficient at xi0."""
    mapping = {xi: small * a for xi, a in phi.mapping.items()}
    mapping[tuple(int(v) for v in xi0)] = 1.0
    return Eigenfunction.from_mapping(phi.d, phi.r2, mapping)


def _check_sound(certificate, phi: Eigenfunction) -> None:
    assert certificate.sound
    if certificate.verdict > 0:
        assert certificate.mean_square >= certificate.verdict - 1e-6
    assert certificate.diagonal_sum > 0
    assert certificate.offdiag_bound >= certificate.tail_penalty >= 0
    sizes = sorted(len(leaf) for leaf in certificate.leaves)
    assert sum(sizes) <= len(phi.freqs)
    assert max(sizes) <= 2


@pytest.mark.parametrize("S, d, r2", SOUNDNESS_CASES)
def test_certificate_is_sound(S: AnalyticGraph, d: int, r2: int) -> None:
    positive = 0
    for seed in range(SEED, SEED + 3):
        phi = random_eigenfunction(d, r2, seed)
        frame = choose_frame(S, phi)
        patch = build_patch(S, frame.v0, TAU)
        _check_sound(lower_bound_certificate(patch, phi, frame), phi)

        heavy = dominated(phi, frame.xi0)
        certificate = lower_bound_certificate(patch, heavy, frame)
        _check_sound(certificate, heavy)
        positive += certificate.verdict > 0
    assert positive >= 1


def test_certificate_with_a_tail(patch_25, frame_25) -> None:
    phi = dominated(random_eigenfunction(2, 25, SEED), (5, 0))
    certificate = lower_bound_certificate(patch_25, phi, frame_25, D=1.5)
    assert len(certificate.leaves) == 3
    assert certificate.tail_penalty > 0
    assert certificate.verdict > 0
    assert certificate.sound
    assert certificate.mean_square >= certificate.verdict - 1e-6
    assert certificate.verdict < certificate.constant * certificate.diagonal_sum


def test_choose_frame_without_a_normal_direction() -> None:
    phi = Eigenfunction.from_mapping(2, 25, {(3, 4): 1.0})
    with pytest.raises(PreconditionViolated):
        choose_frame(CURVE, phi)


def test_certificate_document_and_report(patch_25, frame_25) -> None:
    phi = Eigenfunction.from_mapping(
        2, 25, {(5, 0): 1.0, (4, 3): 0.5, (3, 4): 0.25}
    )
    certificate = lower_bound_certificate(patch_25, phi, frame_25)
    document = certificate.document()
    assert isinstance(document, CertificateDocument)
    assert document.verdict == certificate.verdict
    assert document.d_cutoff == certificate.cutoff
    assert len(document.ledger) == len(certificate.ledger)
    assert len(document.cluster_tree.frequencies) == 3
    report = certificate.report()
    assert report.startswith("leaves")
    assert "verdict" in report
    assert report.endswith("\n")


@pytest.mark.parametrize("n", [0, 1, 2, 3, 4, 5])
def test_cylinder_vanishes_on_its_patch(n: int) -> None:
    phi0 = Eigenfunction.from_mapping(
        2, 25,
        {(5, 0): 0.5, (-5, 0): 0.5, (0, 5): 1.0, (0, -5): 1.0},
        real=True,
    )
    phi = make_cylinder(phi0, n).permuted([0, 2, 1])
    frame = ShiftFrame.for_point((5, n, 0))
    patch = build_patch(CYLINDER, frame.v0, CYLINDER_TAU)
    assert mean_square(patch, phi, frame) < 1e-8

    rng = np.random.default_rng(SEED)
    picks = rng.choice(len(patch), size=100, replace=False)
    Z = patch.Z[picks]
    short, tail = short_sum_with_tail(phi, frame, Z, CYLINDER_TAU, D=2.0)
    full = shifted_value(phi, frame, Z)
    assert np.all(np.abs(full - short) <= tail + 1e-12)
    assert math.isclose(tail, math.sqrt(len(phi.freqs)) * math.exp(
        -2 * math.pi * CYLINDER_TAU * 2.0
    ))

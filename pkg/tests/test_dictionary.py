import numpy as np
import pytest

from hybridloc.channel import ScenarioTruth, ff_steering, nf_steering
from hybridloc.dictionary import (
    AtomSignals,
    angle_lattice,
    build_atom_channels,
    build_atom_signals,
    build_dictionary,
    sample_ff_grid,
    sample_nf_grid,
)
from hybridloc.geometry import Region, RisConfig, SphericalPoint, classify_region

from .helpers import crandn


def test_single_element_has_no_near_field_grid():
    assert sample_nf_grid(RisConfig(1, 1), 0.25, 0.25, 10, 10) == []


def test_broadside_column(ris10):
    # even lattice counts have no exact broadside cell, so use a 1x1 lattice
    grid = sample_nf_grid(ris10, 0.25, 0.25, 1, 1)
    ranges = [p.range for p in grid]
    assert len(ranges) == 19
    assert ranges[0] == 0.25 and ranges[-1] == pytest.approx(4.75)
    assert all(p.polar == pytest.approx(np.pi / 2) and p.azimuth == pytest.approx(0.0) for p in grid)


def test_every_nf_point_is_near_field(hybrid10, ris10):
    for r, t, f in hybrid10.locations[: hybrid10.near_count]:
        assert classify_region(SphericalPoint(r, t, f), ris10) is Region.NEAR_FIELD


def test_nf_grid_matches_brute_force(ris10):
    grid = sample_nf_grid(ris10, 0.25, 0.25, 10, 10)
    polar, azimuth = angle_lattice(10, 10)
    count = 0
    for t in polar:
        for f in azimuth:
            for r in 0.25 + 0.25 * np.arange(40):
                count += classify_region(SphericalPoint(r, t, f), ris10) is Region.NEAR_FIELD
    assert len(grid) == count


def test_ff_grid():
    assert sample_ff_grid(1, 1) == [(pytest.approx(np.pi / 2), pytest.approx(0.0))]
    pairs = sample_ff_grid(10, 10)
    assert len(pairs) == 100
    polar, azimuth = angle_lattice(10, 10)
    assert {round(t, 12) for t, _ in pairs} == {round(t, 12) for t in polar}
    assert {round(f, 12) for _, f in pairs} == {round(f, 12) for f in azimuth}
    np.testing.assert_allclose(np.diff(polar), np.pi / 10)
    np.testing.assert_allclose(np.diff(azimuth), np.pi / 10)


def test_nf_and_ff_share_lattice(hybrid10):
    polar, azimuth = angle_lattice(10, 10)
    nf = hybrid10.locations[: hybrid10.near_count]
    assert np.all(np.min(np.abs(nf[:, 1:2] - polar), axis=1) < 1e-12)
    assert np.all(np.min(np.abs(nf[:, 2:3] - azimuth), axis=1) < 1e-12)


def test_angle_lattice_validation():
    with pytest.raises(ValueError):
        angle_lattice(0, 3)


def test_dictionary_columns(hybrid10, ris10):
    d = hybrid10
    assert d.size == d.near_count + 100 and d.far_count == 100
    np.testing.assert_allclose(np.abs(d.atoms), 1, atol=1e-12)
    for i in (0, 17, d.near_count - 1):
        np.testing.assert_array_equal(d.atoms[:, i], nf_steering(d.locations[i], ris10))
    for i in (d.near_count, d.size - 1):
        r, t, f = d.locations[i]
        assert np.isnan(r)
        np.testing.assert_array_equal(d.atoms[:, i], ff_steering(t, f, ris10))
    assert d.region(0) is Region.NEAR_FIELD and d.region(d.size - 1) is Region.FAR_FIELD
    assert isinstance(d.location(0), SphericalPoint) and len(d.location(d.size - 1)) == 2


def test_no_duplicated_far_field_atoms(hybrid10):
    F = hybrid10.atoms[:, hybrid10.near_count :] / 10
    gram = np.abs(F.conj().T @ F)
    np.fill_diagonal(gram, 0)
    assert gram.max() < 1 - 1e-6


def test_representative_range(hybrid10, ris10):
    from hybridloc.geometry import nf_boundary_range

    d = hybrid10
    np.testing.assert_array_equal(d.representative_range[: d.near_count], d.locations[: d.near_count, 0])
    t, f = d.locations[d.near_count, 1:]
    assert d.representative_range[d.near_count] == pytest.approx(nf_boundary_range(t, f, ris10))


def test_models(ris4):
    far = build_dictionary(ris4, "far", n_polar=4, n_azimuth=4)
    near = build_dictionary(ris4, "near", n_polar=4, n_azimuth=4, r_max=2.0)
    assert far.near_count == 0 and far.size == 16
    assert near.far_count == 0 and near.size == 16 * 8
    with pytest.raises(ValueError):
        build_dictionary(ris4, "spherical")
    with pytest.raises(ValueError):
        build_atom_channels([], [], ris4)


def test_dictionary_immutable(hybrid10):
    with pytest.raises(ValueError):
        hybrid10.atoms[0, 0] = 0


def test_atom_signals_identities(rng):
    F = crandn(rng, 3, 4)
    np.testing.assert_allclose(build_atom_signals(np.ones((1, 3)), np.ones(3), F, 1.0), F.sum(axis=0, keepdims=True))
    B = np.exp(1j * rng.uniform(0, 6, (2, 3)))
    assert not np.any(build_atom_signals(B, crandn(rng, 3), F, 0.0))


def test_atom_signals_hand_values():
    B = np.array([[1, 1j], [-1, 1]])
    h_a = np.array([2, 1j])
    F = np.array([[1, 1j], [1, -1]])
    s = 0.5
    # entry (m, i) = s * sum_n B[m, n] h_a[n] F[n, i]
    expected = 0.5 * np.array(
        [[1 * 2 * 1 + 1j * 1j * 1, 1 * 2 * 1j + 1j * 1j * -1], [-1 * 2 * 1 + 1 * 1j * 1, -1 * 2 * 1j + 1 * 1j * -1]]
    )
    np.testing.assert_allclose(build_atom_signals(B, h_a, F, s), expected)


def test_atom_signals_dimension_mismatch(rng):
    with pytest.raises(ValueError):
        build_atom_signals(np.ones((2, 3)), np.ones(4), np.ones((3, 5)), 1.0)


def test_incremental_matches_batch(hybrid10, rng):
    h_a = crandn(rng, 100)
    sig = AtomSignals(hybrid10, h_a, 0.7 - 0.2j)
    B = np.exp(1j * rng.uniform(0, 6, (4, 100)))
    for b in B:
        sig.append(b)
    assert sig.cycles == 4
    np.testing.assert_allclose(sig.matrix, build_atom_signals(B, h_a, hybrid10, 0.7 - 0.2j), rtol=1e-12)


def test_dictionary_consistency(hybrid10, ris10, rng):
    i = 321
    p = SphericalPoint(*hybrid10.locations[i])
    h_a = crandn(rng, 100)
    truth = ScenarioTruth([p], [], [0.4 - 0.3j], np.zeros((1, 0)), h_a[None, :])
    B = np.exp(1j * rng.uniform(0, 6, (5, 100)))
    g = np.array([truth.observe(b, ris10)[0] for b in B])
    Lam = build_atom_signals(B, h_a, hybrid10, 1.0)
    np.testing.assert_allclose(g, (0.4 - 0.3j) * Lam[:, i], rtol=1e-12, atol=1e-12)

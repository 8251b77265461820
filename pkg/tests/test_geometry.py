import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybridloc.geometry import (
    NF_PHASE_THRESHOLD,
    Region,
    RisConfig,
    SphericalPoint,
    classify_region,
    distance_to_element,
    element_distances,
    max_phase_error,
    nf_boundary_range,
    ris_element_positions,
    spherical_to_cartesian,
)

polar_st = st.floats(0.01, np.pi - 0.01)
azimuth_st = st.floats(-np.pi / 2 + 0.01, np.pi / 2 - 0.01)


def test_single_element_panel_at_origin():
    assert ris_element_positions(RisConfig(1, 1)) == [(0.0, 0.0)]


def test_two_element_panel_is_symmetric():
    d = 0.04
    assert ris_element_positions(RisConfig(2, 1, d, 0.06)) == [(-d / 2, 0.0), (d / 2, 0.0)]


def test_ten_by_ten_extreme_coordinate(ris10):
    coords = np.array(ris_element_positions(ris10))
    assert np.max(np.abs(coords)) == pytest.approx(4.5 * 0.03)
    assert coords.shape == (100, 2)
    np.testing.assert_allclose(coords.mean(axis=0), 0, atol=1e-15)


def test_row_major_order():
    cfg = RisConfig(2, 3, 1.0, 1.0)
    c = cfg.element_coords
    # index r * cols + c: y follows the row, z the column
    assert tuple(c[1]) == (-0.5, 0.0) and tuple(c[3]) == (0.5, -1.0)


def test_element_coords_read_only(ris10):
    with pytest.raises(ValueError):
        ris10.element_coords[0, 0] = 1.0


@pytest.mark.parametrize("kwargs", [dict(rows=0), dict(spacing=0.0), dict(wavelength=-1.0)])
def test_ris_config_validation(kwargs):
    with pytest.raises(ValueError):
        RisConfig(**kwargs)


def test_from_frequency_half_wavelength():
    cfg = RisConfig.from_frequency(10, 10, 5e9)
    assert cfg.wavelength == pytest.approx(0.0599585, rel=1e-6)
    assert cfg.spacing == pytest.approx(cfg.wavelength / 2)


@pytest.mark.parametrize(
    "p, xyz",
    [
        ((1.0, np.pi / 2, np.pi / 2 - 1e-12), (0.0, 1.0, 0.0)),
        ((1.0, 1e-12, 0.3), (0.0, 0.0, 1.0)),
        ((2.0, np.pi / 2, np.pi / 4), (np.sqrt(2), np.sqrt(2), 0.0)),
        ((3.0, np.pi / 2, 0.0), (3.0, 0.0, 0.0)),
    ],
)
def test_spherical_to_cartesian(p, xyz):
    np.testing.assert_allclose(spherical_to_cartesian(np.array(p)), xyz, atol=1e-11)


@pytest.mark.parametrize("bad", [(0.0, 1.0, 0.0), (1.0, 0.0, 0.0), (1.0, np.pi, 0.0), (1.0, 1.0, np.pi / 2)])
def test_spherical_point_rejects_invalid(bad):
    with pytest.raises(ValueError):
        SphericalPoint(*bad)


def test_distance_to_centre_element_is_range():
    cfg = RisConfig(1, 1)
    assert distance_to_element(SphericalPoint(2.5, np.pi / 2, 1.0), 0, cfg) == pytest.approx(2.5)


def test_symmetric_elements_equidistant_on_normal():
    cfg = RisConfig(2, 1, 0.05, 0.06)
    p = SphericalPoint(3.0, np.pi / 2, 0.0)
    assert distance_to_element(p, 0, cfg) == pytest.approx(distance_to_element(p, 1, cfg), abs=1e-15)


def test_distance_hand_value():
    cfg = RisConfig(1, 1)
    p = SphericalPoint(3.0, np.pi / 2, np.pi / 3)
    x, y, z = 3 * np.cos(np.pi / 3), 3 * np.sin(np.pi / 3), 0.0
    expected = np.sqrt(x**2 + (y - 0.1) ** 2 + (z - 0.05) ** 2)
    # move the single element by shifting the point instead
    xyz = spherical_to_cartesian(p)
    assert np.linalg.norm(xyz - np.array([0, 0.1, 0.05])) == pytest.approx(expected)
    cfg2 = RisConfig(3, 3, 0.1, 0.06)  # element (r=2, c=1) sits at y=0.1, z=0
    assert distance_to_element(p, 7, cfg2) == pytest.approx(np.sqrt(x**2 + (y - 0.1) ** 2))


def test_distance_index_out_of_range(ris4):
    with pytest.raises(IndexError):
        distance_to_element(SphericalPoint(1, 1, 0), 16, ris4)


def test_single_element_phase_error_zero():
    cfg = RisConfig(1, 1)
    assert max_phase_error(SphericalPoint(0.7, 1.0, 0.2), cfg) == pytest.approx(0.0, abs=1e-12)
    assert classify_region(SphericalPoint(0.01, 1.0, 0.2), cfg) is Region.FAR_FIELD


def test_phase_error_vanishes_far_away(ris10):
    assert abs(max_phase_error(SphericalPoint(1e5, 1.0, 0.3), ris10)) < 1e-3


def test_broadside_boundary_close_to_reference(ris10):
    # reference boundary is about 4.9 m
    assert max_phase_error(SphericalPoint(4.9, np.pi / 2, 0.0), ris10) == pytest.approx(NF_PHASE_THRESHOLD, rel=0.02)
    assert nf_boundary_range(np.pi / 2, 0.0, ris10) == pytest.approx(4.9, abs=0.1)


def test_classification_either_side_of_boundary(ris10):
    assert classify_region(SphericalPoint(4.0, np.pi / 2, 0.0), ris10) is Region.NEAR_FIELD
    assert classify_region(SphericalPoint(6.0, np.pi / 2, 0.0), ris10) is Region.FAR_FIELD


def test_boundary_tie_goes_to_far_field(ris10):
    r = nf_boundary_range(np.pi / 2, 0.0, ris10)
    p = SphericalPoint(r, np.pi / 2, 0.0)
    assert abs(max_phase_error(p, ris10) - NF_PHASE_THRESHOLD) < 1e-9
    # just inside and just outside
    assert classify_region(SphericalPoint(r * (1 - 1e-6), np.pi / 2, 0.0), ris10) is Region.NEAR_FIELD
    assert classify_region(SphericalPoint(r * (1 + 1e-6), np.pi / 2, 0.0), ris10) is Region.FAR_FIELD


def test_vectorized_matches_scalar(ris4, rng):
    pts = np.column_stack([rng.uniform(0.3, 5, 20), rng.uniform(0.1, 3, 20), rng.uniform(-1.5, 1.5, 20)])
    vec = max_phase_error(pts, ris4)
    for p, v in zip(pts, vec):
        assert max_phase_error(SphericalPoint(*p), ris4) == pytest.approx(v, abs=1e-12)
    d = element_distances(pts, ris4)
    assert d.shape == (20, 16)
    assert d[3, 5] == pytest.approx(distance_to_element(SphericalPoint(*pts[3]), 5, ris4))


@given(polar_st, azimuth_st, st.floats(0.2, 20.0), st.floats(1.01, 3.0))
def test_phase_error_non_increasing_along_ray(polar, azimuth, r, factor):
    cfg = RisConfig(6, 6, 0.03, 0.06)
    aperture = np.max(np.hypot(*cfg.element_coords.T))
    r = max(r, aperture * 1.001)
    near = max_phase_error(np.array([r, polar, azimuth]), cfg)
    far = max_phase_error(np.array([r * factor, polar, azimuth]), cfg)
    assert far <= near + 1e-12


@given(polar_st, azimuth_st, st.floats(0.2, 8.0), st.sampled_from([2.0, 3.0, 0.5]))
def test_classification_scale_consistent(polar, azimuth, r, scale):
    a = RisConfig(5, 5, 0.03, 0.06)
    b = RisConfig(5, 5, 0.03 * scale, 0.06 * scale)
    ea = max_phase_error(np.array([r, polar, azimuth]), a)
    eb = max_phase_error(np.array([r * scale, polar, azimuth]), b)
    assert ea == pytest.approx(eb, abs=1e-9)
    if abs(ea - NF_PHASE_THRESHOLD) > 1e-6:
        assert classify_region(SphericalPoint(r, polar, azimuth), a) is classify_region(
            SphericalPoint(r * scale, polar, azimuth), b
        )


@given(polar_st, azimuth_st, st.floats(0.05, 30.0), st.integers(0, 15))
def test_triangle_inequality(polar, azimuth, r, n):
    cfg = RisConfig(4, 4, 0.03, 0.06)
    p = SphericalPoint(r, polar, azimuth)
    yz = np.hypot(*cfg.element_coords[n])
    assert distance_to_element(p, n, cfg) >= abs(r - yz) - 1e-12


def test_boundary_zero_without_near_field():
    assert nf_boundary_range(1.0, 0.2, RisConfig(1, 1)) == 0.0

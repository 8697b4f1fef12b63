import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from capa import PlanarRect, SpdGrid, UserSource, UsageError, occupation_ratio, spd_element_centers, user_position
from capa.geometry import spd_grid_for_aperture

LAM = 0.0107


@pytest.mark.parametrize(
    "r, phi, theta, expected",
    [
        (1, math.pi / 2, math.pi / 2, [0, 1, 0]),
        (10, math.pi / 3, math.pi / 6, [2.5, 4.330127018922193, 8.660254037844387]),
        (2, 0, math.pi / 2, [2, 0, 0]),
    ],
)
def test_user_position(r, phi, theta, expected):
    np.testing.assert_allclose(user_position(UserSource(r, phi, theta)), expected, atol=1e-12)


@given(
    r=st.floats(1e-3, 1e4),
    phi=st.floats(0, math.pi),
    theta=st.floats(0, math.pi),
)
def test_position_norm_is_r(r, phi, theta):
    assert np.linalg.norm(user_position(UserSource(r, phi, theta))) == pytest.approx(r, rel=1e-12)


def test_user_rejects_bad_radius():
    with pytest.raises(UsageError):
        UserSource(0.0, 0.0, 0.0)


def test_default_tx_area_is_isotropic():
    assert UserSource(1, 0, 1).aperture_area(LAM) == pytest.approx(LAM**2 / (4 * math.pi))


def test_single_element_center():
    np.testing.assert_array_equal(spd_element_centers(SpdGrid(1, 1, 0.3, 0.1)), [[0, 0, 0]])


def test_row_of_three():
    c = spd_element_centers(SpdGrid(3, 1, 0.5, 0.5))
    assert sorted(c[:, 0]) == [-0.5, 0.0, 0.5]
    assert np.all(c[:, 1:] == 0)


def test_three_by_three_extent():
    g = SpdGrid(3, 3, LAM / 2, LAM / 4)
    c = spd_element_centers(g)
    assert len(c) == 9
    assert np.max(np.abs(c[:, 0])) == pytest.approx(0.00535, abs=1e-15)
    # bounding box spans Mx*d
    assert g.lx == pytest.approx(3 * LAM / 2)


@given(mx=st.integers(0, 6), mz=st.integers(0, 6), d=st.floats(1e-3, 1.0))
def test_centers_symmetric_under_negation(mx, mz, d):
    c = spd_element_centers(SpdGrid(2 * mx + 1, 2 * mz + 1, d, d / 2))
    key = lambda a: sorted(map(tuple, np.round(a, 12)))
    assert key(c) == key(-c + 0.0)


@pytest.mark.parametrize("mx, mz", [(2, 3), (3, 4), (0, 1), (-1, 1)])
def test_even_or_nonpositive_counts_rejected(mx, mz):
    with pytest.raises(UsageError):
        SpdGrid(mx, mz, 0.1, 0.05)


def test_element_larger_than_spacing_rejected():
    with pytest.raises(UsageError):
        SpdGrid(3, 3, 0.1, 0.11)


def test_centers_wrong_variant():
    with pytest.raises(UsageError):
        spd_element_centers(PlanarRect(1, 1))
    with pytest.raises(UsageError):
        occupation_ratio(PlanarRect(1, 1))


@pytest.mark.parametrize(
    "side, expected",
    [(LAM / 2, 1.0), (LAM / math.sqrt(4 * math.pi), 1 / math.pi), (LAM / 4, 0.25)],
)
def test_occupation_ratio(side, expected):
    assert occupation_ratio(SpdGrid(5, 5, LAM / 2, side)) == pytest.approx(expected, rel=1e-12)


@given(d=st.floats(1e-4, 10.0))
def test_fully_tiled_ratio_is_exactly_one(d):
    assert occupation_ratio(SpdGrid(3, 3, d, d)) == 1.0


def test_grid_for_aperture_uses_odd_count():
    g = spd_grid_for_aperture(0.5, LAM / 2, LAM / 4)
    assert g.mx % 2 == 1 and g.mx == g.mz
    assert abs(g.lx - 0.5) <= LAM / 2


def test_planar_area():
    assert PlanarRect(2, 3).area == 6


@given(phi=st.floats(0, math.pi), theta=st.floats(0, math.pi))
def test_direction_cosines_unit(phi, theta):
    u = UserSource(1.0, phi, theta)
    assert u.Phi**2 + u.Psi**2 + u.Theta**2 == pytest.approx(1.0, abs=1e-12)


def test_azimuth_out_of_range_rejected():
    with pytest.raises(UsageError):
        UserSource(1.0, 4.0, 0.5)

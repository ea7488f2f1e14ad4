import numpy as np
import pytest
import sympy as sp
from numpy.testing import assert_allclose

from spoints.errors import MalformedInputError
from spoints.potentials import (RadialProfile, bump, gaussian, load_potential, square_well,
                                support_ball, table, with_coupling, zero_potential)


def _sympy_derivatives(expr, r, points, order):
    return np.array([[float(sp.diff(expr, r, k).subs(r, x)) for x in points] for k in range(order + 1)])


def test_gaussian_derivatives_match_symbolic():
    r = sp.symbols("r")
    pts = np.array([0.0, 0.3, 1.1, 2.0])
    expected = _sympy_derivatives(-3 * sp.exp(-(r / 1.5) ** 2), r, pts, 5)
    got = gaussian(-3.0, 1.5).profile.derivatives(pts, 5)
    assert_allclose(got, expected, rtol=1e-11, atol=1e-12)


def test_bump_derivatives_match_symbolic():
    r = sp.symbols("r")
    pts = np.array([0.0, 0.2, 0.55, 0.9])
    expected = _sympy_derivatives(2 * sp.exp(1 - 1 / (1 - r**2)), r, pts, 4)
    assert_allclose(bump(2.0).profile.derivatives(pts, 4), expected, rtol=1e-10, atol=1e-12)


def test_gaussian_support_and_taper():
    p = gaussian(-8.0)
    R = p.support_radius
    assert_allclose(R, np.sqrt(np.log(8e12)))
    assert p.profile(np.array([R * 1.0001]))[0] == 0.0
    # the taper keeps the profile monotone in magnitude
    r = np.linspace(0.9 * R, R, 200)
    assert np.all(np.diff(np.abs(p.profile(r))) <= 1e-30)


def test_profiles_vanish_outside_support():
    for p in (gaussian(-2.0), bump(-2.0, 0.7), square_well(-1.0, 1.3)):
        r = np.array([1.0001, 2.0, 10.0]) * p.support_radius
        assert np.all(p.profile(r) == 0)


def test_odd_derivatives_change_sign():
    prof = gaussian(-1.0).profile
    d = prof.derivatives(np.array([0.4, -0.4]), 3)
    assert_allclose(d[1, 0], -d[1, 1])
    assert_allclose(d[2, 0], d[2, 1])


def test_coupling_scales_values():
    p = gaussian(-1.0)
    x = np.array([[0.2, 0.1, 0.0]])
    assert_allclose(with_coupling(p, 2.5)(x), 2.5 * p(x))
    with pytest.raises(MalformedInputError):
        with_coupling(p, -1.0)


def test_square_well_is_flagged_rough():
    assert not square_well(-1.0).is_smooth
    assert gaussian(-1.0).is_smooth


def test_table_reproduces_samples():
    r = np.linspace(0, 2, 21)
    v = -(1 - (r / 2) ** 2) ** 3
    p = table(r, v)
    assert_allclose(p.profile(r[:-1]), v[:-1], atol=1e-12)


@pytest.mark.parametrize("r, v", [([0, 1], [1, 0]), ([0, 2, 1], [1, 1, 0]),
                                  ([0.1, 1, 2], [1, 1, 0]), ([0, 1, 2], [1, 1, 1])])
def test_table_validation(r, v):
    with pytest.raises(MalformedInputError):
        table(np.array(r, float), np.array(v, float))


def test_unknown_shape_rejected():
    with pytest.raises(MalformedInputError):
        RadialProfile("cosine")


def test_support_ball_of_two_components():
    from spoints.potentials import PotentialField
    a = gaussian(-1.0, 0.2, center=(1.0, 0, 0)).components[0]
    b = bump(-1.0, 0.5, center=(-2.0, 0, 0)).components[0]
    c, R = support_ball(PotentialField((a, b)))
    Ra = a[0].support_radius
    # farthest points: x = 1 + Ra and x = -2.5
    assert_allclose(R, 0.5 * (1 + Ra + 2.5))
    assert_allclose(c, [0.5 * (1 + Ra - 2.5), 0, 0], atol=1e-12)


def test_load_potential_blocks(tmp_path):
    f = tmp_path / "pot.txt"
    f.write_text("shape = gaussian\ndepth = -2  # deep\n[component]\nshape = bump\n"
                 "depth = -1\nradius = 0.5\ncenter = 1, 0, 0\n")
    p = load_potential(f)
    assert len(p.components) == 2 and not p.is_radial
    assert_allclose(p(np.array([1.0, 0, 0])), -2 * np.exp(-1) - 1)


def test_load_potential_table_csv(tmp_path):
    f = tmp_path / "q.csv"
    f.write_text("# profile\nr,q\n0,-1\n0.5,-0.5\n1,0\n")
    p = load_potential(f)
    assert p.is_radial and p.support_radius == 1.0


def test_load_potential_rejects_bad_keys(tmp_path):
    f = tmp_path / "pot.txt"
    f.write_text("shape = gaussian\ncolour = red\n")
    with pytest.raises(MalformedInputError):
        load_potential(f)


def test_zero_potential_is_zero():
    assert np.all(zero_potential(2.0)(np.zeros((4, 3))) == 0)


def test_depth4_truncation_radius():
    assert_allclose(gaussian(-4.0).support_radius, np.sqrt(np.log(4e12)))
    assert_allclose(gaussian(-4.0).support_radius, 5.39, atol=5e-3)

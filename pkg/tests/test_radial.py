import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import brentq

from spoints import radial
from spoints.errors import ConventionViolatedError, MalformedInputError
from spoints.potentials import bump, gaussian, square_well, with_coupling, zero_potential

from oracles import fd_bound_state_count, gaussian_q, rk4_regular

# frozen from the RK4 shooting oracle below (test_critical_coupling_oracle)
ALPHA_C_GAUSS = 2.6840046509


@pytest.mark.parametrize("l", [0, 1, 2])
def test_regular_solution_against_rk4(l):
    p = gaussian(-8.0)
    R = p.support_radius
    phi, dphi = radial.integrate_regular(p, l)(np.array([R]))
    ref = rk4_regular(gaussian_q(-8.0), l, R)
    assert_allclose([phi[0], dphi[0]], ref, rtol=1e-7)


def test_square_well_closed_form():
    V0, a = 5.0, 1.0
    p = square_well(-V0, a)
    k = np.sqrt(V0)
    A, B = radial.asymptotic_slope(p)
    assert_allclose(A, np.cos(k * a), rtol=1e-9)
    assert_allclose(B, np.sin(k * a) / k - a * np.cos(k * a), rtol=1e-9)
    r = np.array([0.3, 0.7])
    assert_allclose(radial.integrate_regular(p, 0)(r)[0], np.sin(k * r) / k, rtol=1e-9)


@pytest.mark.parametrize("V0", [1.0, 3.0, 10.0, 30.0, 100.0])
def test_square_well_counts(V0):
    expected = int(np.floor(np.sqrt(V0) / np.pi + 0.5))
    assert radial.count_bound_states(square_well(-V0), 0) == expected


def test_square_well_critical_coupling():
    alpha = radial.first_critical_coupling(square_well(-1.0))
    assert_allclose(alpha, (np.pi / 2) ** 2, rtol=1e-12)


def test_critical_coupling_oracle():
    def slope(alpha):
        R = gaussian(-alpha).support_radius
        u, du = rk4_regular(gaussian_q(-alpha), 0, R, steps=8000)
        return du
    oracle = brentq(slope, 2.0, 3.0, xtol=1e-12)
    assert_allclose(oracle, ALPHA_C_GAUSS, rtol=1e-8)
    assert_allclose(radial.first_critical_coupling(gaussian(-1.0)), ALPHA_C_GAUSS, rtol=1e-9)


@pytest.mark.parametrize("depth", [-4.0, -8.0, -16.0, -20.0, -30.0])
def test_counts_against_fd_spectrum(depth):
    p = gaussian(depth)
    counts = radial.channel_counts(p, 2).counts
    assert counts == tuple(fd_bound_state_count(gaussian_q(depth), l) for l in range(3))


def test_frozen_counts():
    assert radial.channel_counts(gaussian(-16.0), 2).counts == (1, 1, 0)
    assert radial.channel_counts(gaussian(-30.0), 2).counts == (2, 1, 1)
    assert radial.channel_counts(bump(-4.0), 2).counts == (0, 0, 0)


def test_phi_depth8():
    phi = radial.radial_phi(gaussian(-8.0))
    assert_allclose(phi.A, -0.60099, atol=5e-5)
    assert_allclose(phi.B, 0.81255, atol=5e-5)
    zeros = phi.zeros()
    assert len(zeros) == 1
    assert_allclose(zeros[0], 1.39846, atol=1e-5)
    assert_allclose(phi(np.array([1e3]))[0], 1.0 + phi.B / (1e3 * phi.A), rtol=1e-12)


def test_phi_free():
    phi = radial.radial_phi(zero_potential(1.0))
    assert_allclose(phi(np.linspace(0.01, 3, 7)), 1.0, rtol=1e-10)
    assert phi.zeros() == ()


def test_phi_at_resonance_raises():
    p = with_coupling(square_well(-1.0), (np.pi / 2) ** 2)
    with pytest.raises(ConventionViolatedError):
        radial.radial_phi(p)


def test_leibniz_derivatives_against_finite_differences():
    p = gaussian(-8.0)
    r = np.array([0.5, 1.2, 2.0])
    d = radial.phi_derivatives(p, 1, r, 4)
    h = 1e-3
    f = lambda x: radial.phi_derivatives(p, 1, x, 1)[1]
    assert_allclose(d[2], (f(r + h) - f(r - h)) / (2 * h), rtol=1e-5)
    g = lambda x: radial.phi_derivatives(p, 1, x, 3)[3]
    assert_allclose(d[4], (g(r + h) - g(r - h)) / (2 * h), rtol=1e-4, atol=1e-6)


def test_kram_free_determinant():
    r = np.array([0.5, 1.0, 2.0])
    assert_allclose(radial.kram_det(zero_potential(), 0, 1, r), r**2, rtol=1e-9)
    # Δ^l_l is φ_l itself
    assert_allclose(radial.kram_det(zero_potential(), 2, 2, r), r**3, rtol=1e-9)


def test_kram_rejects_bad_orders():
    with pytest.raises(MalformedInputError):
        radial.kram_det(gaussian(-1.0), 2, 1, np.array([1.0]))


@pytest.mark.parametrize("depth", [-16.0, -30.0])
def test_sum_rule_holds(depth):
    p = gaussian(depth)
    for l in range(3):
        for m in range(l + 1):
            rep = radial.verify_sum_rule(p, m, l)
            assert rep.passed, rep.as_dict()


def test_second_order_spheres_depth16():
    rep = radial.find_s_spheres(gaussian(-16.0), 2)
    assert len(rep.radii) == 1
    assert_allclose(rep.radii[0], 2.8783, atol=1e-3)
    assert rep.factors[0][1] == 1
    # the product vanishes there
    r = np.array([rep.radii[0]])
    assert abs(radial.jet_det_product(gaussian(-16.0), 2, r)[0]) < 1e-8


def test_zero_count_simple():
    r = np.linspace(0.1, 10, 500)
    zc = radial.zero_count(r, np.sin(r), func=np.sin)
    assert zc.count == 3
    assert_allclose(zc.roots, [np.pi, 2 * np.pi, 3 * np.pi], atol=1e-12)


def test_zero_count_flags_tangency():
    r = np.linspace(0, 4, 400)
    f = lambda x: (x - 2.0) ** 2
    zc = radial.zero_count(r, f(r), func=f)
    assert zc.count == 0
    assert len(zc.tangential) == 1


def test_psi_identity_and_tail():
    p = gaussian(-8.0)
    assert radial.psi_residual(p) <= 1e-6
    psi = radial.solve_psi_radial(p)
    phi = psi.phi
    t1, c0 = psi.tail
    assert_allclose(t1, 3 * phi.B / phi.A)
    r = np.array([1.5, 2.0]) * p.support_radius
    assert_allclose(psi(r), r**2 + t1 * r + c0 / r, rtol=1e-12)


def test_radial_csv(tmp_path):
    f = tmp_path / "radial.csv"
    radial.write_radial_csv(f, gaussian(-8.0), np.linspace(0.1, 4, 30))
    header = f.read_text().splitlines()[0]
    assert header.startswith("# r phi_0")
    assert np.loadtxt(f).shape == (30, 1 + 3 + 1 + 3 + 1)


def test_square_well_kappa2_reference_values():
    p = square_well(-4.0, 1.0)
    r = np.array([0.25, 0.5, 1.0])
    assert_allclose(radial.integrate_regular(p, 0)(r)[0], np.sin(2 * r) / 2, rtol=1e-9)
    A, _ = radial.asymptotic_slope(p)
    assert_allclose(A, np.cos(2.0), rtol=1e-9)
    assert radial.count_bound_states(p, 0) == 1
    zero = 1 - np.tan(2.0) / 2
    assert_allclose(zero, 2.0925, atol=1e-4)
    assert_allclose(radial.radial_phi(p).zeros(), [zero], rtol=1e-10)
    assert_allclose(radial.find_s_spheres(p, 1).radii, [zero], rtol=1e-10)
    assert radial.verify_sum_rule(p, 0, 0).z_measured == 1

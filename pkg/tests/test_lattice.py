import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import tplquad

from spoints import _lattice


def _damped_punctured_sum(sig):
    M = int(7 * sig)
    a = np.arange(-M, M + 1, dtype=float)
    X, Y = np.meshgrid(a, a, indexing="ij")
    tot = 0.0
    for z in a:
        r = np.sqrt(X**2 + Y**2 + z * z)
        r[r == 0] = np.inf
        tot += np.sum(np.exp(-(r**2) / sig**2) / r)
    return tot - 2 * np.pi * sig**2   # minus ∫ e^{-|s|²/σ²}/|s| ds


def test_c0_against_damped_lattice_sum():
    # a smooth cutoff is needed: with a sharp cube the limit depends on the shape
    s6, s8 = _damped_punctured_sum(6.0), _damped_punctured_sum(8.0)
    extrapolated = (64 * s8 - 36 * s6) / 28   # remove the σ⁻² term
    assert_allclose(extrapolated, -_lattice.LATTICE_C0, atol=1e-3)


def test_c0_frozen_value():
    assert_allclose(_lattice.LATTICE_C0, 2.8372974794806, rtol=1e-12)
    assert_allclose(_lattice.LATTICE_C2, 0.0444327131197, rtol=1e-10)


def test_cell_mean_quadrature():
    val, _ = tplquad(lambda z, y, x: 1.0 / np.sqrt(x * x + y * y + z * z),
                     0, 0.5, 0, 0.5, 0, 0.5, epsabs=1e-11, epsrel=1e-11)
    assert_allclose(8 * val, _lattice.CELL_MEAN, rtol=1e-9)


def test_ball_mean_closed_form():
    rb = (3 / (4 * np.pi)) ** (1 / 3)
    assert_allclose(_lattice.BALL_MEAN, 2 * np.pi * rb**2)


def test_epstein_rejects_other_arguments():
    with pytest.raises(ValueError):
        _lattice.epstein_zeta(1.0)


def test_e0_at_node_is_c0():
    assert_allclose(_lattice.e0_regular(np.zeros((1, 3))), _lattice.LATTICE_C0, rtol=1e-6)


def test_second_moment_tensor_at_node():
    T = _lattice.e2_tensor(np.zeros(3))[0]
    assert_allclose(T, 2 * _lattice.LATTICE_C2 * np.eye(3), atol=1e-9)


def test_second_moment_table_matches_direct_sum(rng):
    d = rng.uniform(-0.5, 0.5, size=(6, 3))
    direct = -_lattice.second_moment_sum(d)
    # tricubic table: about 1e-4 absolute on entries of order 0.1
    assert_allclose(_lattice.e2_tensor(d), direct, atol=2e-4)


def test_gradient_table_matches_direct_sum(rng):
    d = rng.uniform(-0.5, 0.5, size=(6, 3))
    full = _lattice.e1_regular(d) + d / np.linalg.norm(d, axis=1)[:, None]
    assert_allclose(full, _lattice.distance_sum_gradient(d), atol=2e-4)


def test_second_moment_symmetry():
    d = np.array([[0.3, 0.1, 0.2]])
    T = _lattice.e2_tensor(d)[0]
    assert_allclose(T, T.T)
    # reflecting δ in a coordinate flips the sign of the mixed entries with that axis
    Tr = _lattice.e2_tensor(d * np.array([-1, 1, 1]))[0]
    assert_allclose(Tr[0, 1], -T[0, 1], atol=1e-6)
    assert_allclose(Tr[1, 2], T[1, 2], atol=1e-6)


def test_distance_gradient_odd_and_zero_at_node(rng):
    assert_allclose(_lattice.distance_sum_gradient(np.zeros((1, 3))), 0.0, atol=1e-12)
    d = rng.uniform(-0.4, 0.4, size=(4, 3))
    assert_allclose(_lattice.distance_sum_gradient(-d), -_lattice.distance_sum_gradient(d), atol=1e-12)


def _damped_second_moment(d, sig):
    # Σ_n v vᵀ e^{-|v|²/σ²}/|v| with v = n - δ, minus its continuum integral
    M = int(6 * sig)
    a = np.arange(-M, M + 1, dtype=float)
    X, Y = np.meshgrid(a, a, indexing="ij")
    tot = np.zeros((3, 3))
    for z in a:
        v = np.stack([X - d[0], Y - d[1], np.full_like(X, z - d[2])])
        r2 = np.sum(v**2, axis=0)
        w = np.exp(-r2 / sig**2) / np.sqrt(r2)
        tot += np.einsum("ixy,jxy,xy->ij", v, v, w)
    return tot - np.eye(3) * (4 * np.pi / 3) * sig**4 / 2


@pytest.mark.slow
def test_second_moment_brute_force():
    d = np.array([0.3, 0.1, 0.2])
    brute = _damped_second_moment(d, 12.0)
    assert_allclose(brute, _lattice.second_moment_sum(d)[0], atol=2e-4)

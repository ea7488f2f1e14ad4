import numpy as np
import pytest
from numpy.testing import assert_allclose

from spoints.harmonics import Polynomial, multi_indices, solid_harmonics


@pytest.mark.parametrize("L", range(7))
def test_dimension_and_harmonicity(L):
    basis = solid_harmonics(L)
    assert len(basis) == (L + 1) ** 2
    assert all(not m.laplacian().coeffs for m in basis.members)


def test_members_linearly_independent(rng):
    basis = solid_harmonics(4)
    x = rng.normal(size=(60, 3))
    M = np.stack([m(x) for m in basis.members], axis=1)
    assert np.linalg.matrix_rank(M) == 25


def test_degree_grading():
    degs = solid_harmonics(3).degrees()
    assert degs == sorted(degs)
    assert [degs.count(l) for l in range(4)] == [1, 3, 5, 7]


def test_polynomial_evaluation_and_derivative():
    p = Polynomial.from_dict({(2, 1, 0): 3, (0, 0, 1): -1})
    assert_allclose(p(np.array([2.0, 0.5, 1.0])), 3 * 4 * 0.5 - 1)
    dp = p.derivative((1, 0, 0))
    assert dp.as_dict() == {(1, 1, 0): 6}


def test_multi_indices_count():
    assert len(multi_indices(2)) == 10
    assert len(multi_indices(4)) == 35


def test_degree_limit():
    with pytest.raises(ValueError):
        solid_harmonics(7)


from hypothesis import given, settings
from hypothesis import strategies as st


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-5, 5), min_size=16, max_size=16))
def test_combinations_stay_harmonic(coefs):
    total = Polynomial.from_dict({})
    for c, m in zip(coefs, solid_harmonics(3).members):
        total = total + m.scale(c)
    assert not total.laplacian().coeffs


@settings(max_examples=40, deadline=None)
@given(st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3)),
       st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 2)))
def test_derivatives_commute(e, j):
    p = Polynomial.from_dict({e: 1, (1, 2, 0): -2})
    a = p.derivative(j).derivative((1, 0, 0))
    b = p.derivative((1, 0, 0)).derivative(j)
    assert a.as_dict() == b.as_dict()

"""
Lattice-sum constants for the 1/|x| kernel on a simple cubic lattice.

For smooth compactly supported ``f`` and spacing ``h``::

    ∫ f(s)/|s| ds = h³ Σ'_j f(s_j)/|s_j| + C0 h² f(0) + C2 h⁴ Δf(0) + O(h⁶)

where the primed sum skips ``s_j = 0``. ``C0 = -Z(1/2)`` and
``C2 = -Z(-1/2)/6`` with ``Z`` the Epstein zeta function of the unit cubic
lattice. For a target offset ``δ`` (in lattice units) from the nearest node,
the leading correction becomes ``h² f(x) E0(δ)`` with ``E0 = -φ`` and ``φ``
the Ewald potential of a unit point-charge lattice in a neutralising
background. The next terms are ``h³ ∇f(x)·∇W(δ)`` with ``W = Σ_n |n - δ|``
and ``(h⁴/2) H(x):T(δ)`` with ``T = -Σ_n (n - δ)(n - δ)ᵀ/|n - δ|``, both
zeta-regularised and evaluated by Ewald splitting. ``T(0) = 2 C2 I``.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np
from scipy.ndimage import map_coordinates
from scipy.special import erfc

__all__ = ["epstein_zeta", "LATTICE_C0", "LATTICE_C2", "CELL_MEAN", "BALL_MEAN",
           "ewald_potential", "e0_regular", "distance_sum_gradient", "e1_regular",
           "second_moment_sum", "e2_tensor"]

_SQRT_PI = np.sqrt(np.pi)


def _shell_vectors(nmax):
    a = np.arange(-nmax, nmax + 1)
    n = np.array(list(itertools.product(a, a, a)), dtype=float)
    return n[np.any(n != 0, axis=1)]


def epstein_zeta(s: float, nmax: int = 6) -> float:
    """Analytically continued ``Σ'_n |n|^(-2s)`` over the unit cubic lattice.

    Uses the self-dual theta-function splitting; only ``s`` in {1/2, -1/2}
    are needed here and both incomplete gamma functions are in closed form.
    """
    n2 = np.sum(_shell_vectors(nmax) ** 2, axis=1)
    x = np.pi * n2
    if s == 0.5:
        # Γ(1/2, x) x^(-1/2) + Γ(1, x) x^(-1)
        terms = _SQRT_PI * erfc(np.sqrt(x)) / np.sqrt(x) + np.exp(-x) / x
        return float(-2.0 - 1.0 + terms.sum())
    if s == -0.5:
        # π^(1/2) Γ(-1/2) Z = 2 - 1/2 + Σ' [Γ(-1/2, x) x^(1/2) + Γ(2, x) x^(-2)]
        gamma_m12 = 2.0 * np.exp(-x) / np.sqrt(x) - 2.0 * _SQRT_PI * erfc(np.sqrt(x))
        terms = gamma_m12 * np.sqrt(x) + (1.0 + x) * np.exp(-x) / x**2
        return float(-(1.5 + terms.sum()) / (2.0 * np.pi))
    raise ValueError("only s = ±1/2 are implemented")


LATTICE_C0 = -epstein_zeta(0.5)          # 2.8372974794806...
LATTICE_C2 = -epstein_zeta(-0.5) / 6.0   # 0.0444327...
# mean of 1/|s| over the unit cube centered at the origin (frozen; see tests)
CELL_MEAN = 2.380077364
# same for the ball of unit volume: 2π r_b², r_b = (3/4π)^(1/3)
BALL_MEAN = 2.0 * np.pi * (3.0 / (4.0 * np.pi)) ** (2.0 / 3.0)


def ewald_potential(delta, beta=np.sqrt(np.pi), nreal=3, nrecip=3):
    """Periodic potential of unit charges on the cubic lattice plus a uniform
    neutralising background, normalised to zero cell average."""
    delta = np.atleast_2d(np.asarray(delta, dtype=float))
    a = np.arange(-nreal, nreal + 1)
    images = np.array(list(itertools.product(a, a, a)), dtype=float)
    out = np.zeros(len(delta))
    for img in images:
        r = np.linalg.norm(delta - img, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            out += np.where(r > 0, erfc(beta * r) / r, np.inf)
    m = _shell_vectors(nrecip)
    m2 = np.sum(m**2, axis=1)
    coef = np.exp(-np.pi**2 * m2 / beta**2) / (np.pi * m2)
    out += np.cos(2.0 * np.pi * delta @ m.T) @ coef
    return out - np.pi / beta**2


_NEAR = np.array(list(itertools.product((-1, 0, 1), repeat=3)), dtype=float)
_NEAR_NONZERO = _NEAR[np.any(_NEAR != 0, axis=1)]
_TABLE_MAX = 0.75
_TABLE_N = 25


@lru_cache(maxsize=1)
def _smooth_table():
    # φ minus the 27 nearest image singularities: smooth on the whole cell
    t = np.linspace(0.0, _TABLE_MAX, _TABLE_N)
    g = np.stack(np.meshgrid(t, t, t, indexing="ij"), axis=-1).reshape(-1, 3)
    phi = ewald_potential(g + 1e-300)
    near = np.zeros(len(g))
    for img in _NEAR:
        r = np.linalg.norm(g - img, axis=1)
        near += np.where(r > 0, 1.0 / np.where(r > 0, r, 1.0), 0.0)
    smooth = phi - near
    # at δ = 0 both φ and the image sum are singular; use the known limit
    smooth[0] = -LATTICE_C0 - np.sum(1.0 / np.linalg.norm(_NEAR_NONZERO, axis=1))
    return smooth.reshape(_TABLE_N, _TABLE_N, _TABLE_N)


def e0_regular(delta):
    """``E0(δ) + 1/|δ|``: smooth quadrature correction for an off-node target.

    ``delta`` has shape (M, 3) with components in [-1/2, 1/2]; the value at
    ``δ = 0`` is ``LATTICE_C0``.
    """
    d = np.abs(np.atleast_2d(np.asarray(delta, dtype=float)))
    coords = (d / _TABLE_MAX * (_TABLE_N - 1)).T
    smooth = map_coordinates(_smooth_table(), coords, order=3, mode="mirror")
    images = np.zeros(len(d))
    for img in _NEAR_NONZERO:
        images += 1.0 / np.linalg.norm(d - img, axis=1)
    return -smooth - images


def distance_sum_gradient(delta, nmax=3):
    """Gradient of the regularised lattice sum ``W(δ) = Σ_n |n - δ|``."""
    delta = np.atleast_2d(np.asarray(delta, dtype=float))
    a = np.arange(-nmax, nmax + 1)
    out = np.zeros_like(delta)
    for img in itertools.product(a, a, a):
        v = delta - np.asarray(img, dtype=float)
        r = np.linalg.norm(v, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            out += np.where(r[:, None] > 0, (erfc(_SQRT_PI * r) / r)[:, None] * v, 0.0)
    m = _shell_vectors(nmax)
    m2 = np.sum(m**2, axis=1)
    coef = (1.0 + np.pi * m2) * np.exp(-np.pi * m2) / (np.pi**2 * m2**2)
    out += np.sin(2.0 * np.pi * delta @ m.T) @ (coef[:, None] * m)
    return out


_GRAD_N = 31


@lru_cache(maxsize=1)
def _gradient_table():
    t = np.linspace(-_TABLE_MAX, _TABLE_MAX, _GRAD_N)
    g = np.stack(np.meshgrid(t, t, t, indexing="ij"), axis=-1).reshape(-1, 3)
    smooth = distance_sum_gradient(g)
    for img in _NEAR:
        v = g - img
        r = np.linalg.norm(v, axis=1)
        smooth -= np.where(r[:, None] > 0, v / np.where(r > 0, r, 1.0)[:, None], 0.0)
    return smooth.reshape(_GRAD_N, _GRAD_N, _GRAD_N, 3)


def e1_regular(delta):
    """``∇W(δ) - δ/|δ|``: smooth first-order quadrature correction (vector)."""
    d = np.atleast_2d(np.asarray(delta, dtype=float))
    coords = ((d + _TABLE_MAX) / (2 * _TABLE_MAX) * (_GRAD_N - 1)).T
    table = _gradient_table()
    out = np.stack([map_coordinates(table[..., k], coords, order=3, mode="nearest")
                    for k in range(3)], axis=1)
    for img in _NEAR_NONZERO:
        v = d - img
        out += v / np.linalg.norm(v, axis=1)[:, None]
    return out


def second_moment_sum(delta, nmax=3):
    """Regularised ``Σ_n (n - δ)(n - δ)ᵀ / |n - δ|``; shape (M, 3, 3)."""
    delta = np.atleast_2d(np.asarray(delta, dtype=float))
    a = np.arange(-nmax, nmax + 1)
    out = np.zeros((len(delta), 3, 3))
    for img in itertools.product(a, a, a):
        v = np.asarray(img, dtype=float) - delta
        r = np.linalg.norm(v, axis=1)
        w = np.where(r > 0, erfc(_SQRT_PI * r) / np.where(r > 0, r, 1.0), 0.0)
        out += w[:, None, None] * v[:, :, None] * v[:, None, :]
    out -= np.eye(3) / (4.0 * np.pi)
    m = _shell_vectors(nmax)
    m2 = np.sum(m**2, axis=1)
    e = np.exp(-np.pi * m2)
    iso = 0.5 * (1 + np.pi * m2) * e / (np.pi**3 * m2**2)
    aniso = (2 + 2 * np.pi * m2 + np.pi**2 * m2**2) * e / (np.pi**3 * m2**3)
    c = np.cos(2.0 * np.pi * delta @ m.T)
    out += (c @ iso)[:, None, None] * np.eye(3)
    out -= np.einsum("pk,k,ki,kj->pij", c, aniso, m, m)
    return out


def _near_second_moments(d, images):
    out = np.zeros((len(d), 3, 3))
    for img in images:
        v = img - d
        r = np.linalg.norm(v, axis=1)
        w = np.where(r > 0, 1.0 / np.where(r > 0, r, 1.0), 0.0)
        out += w[:, None, None] * v[:, :, None] * v[:, None, :]
    return out


@lru_cache(maxsize=1)
def _moment_table():
    t = np.linspace(-_TABLE_MAX, _TABLE_MAX, _GRAD_N)
    g = np.stack(np.meshgrid(t, t, t, indexing="ij"), axis=-1).reshape(-1, 3)
    smooth = second_moment_sum(g) - _near_second_moments(g, _NEAR)
    return smooth.reshape(_GRAD_N, _GRAD_N, _GRAD_N, 3, 3)


def e2_tensor(delta):
    """``T(δ) = -Σ_n (n - δ)(n - δ)ᵀ/|n - δ|`` (regularised); shape (M, 3, 3)."""
    d = np.atleast_2d(np.asarray(delta, dtype=float))
    coords = ((d + _TABLE_MAX) / (2 * _TABLE_MAX) * (_GRAD_N - 1)).T
    table = _moment_table()
    out = np.empty((len(d), 3, 3))
    for i in range(3):
        for j in range(i, 3):
            out[:, i, j] = map_coordinates(table[..., i, j], coords, order=3, mode="nearest")
            out[:, j, i] = out[:, i, j]
    return -(out + _near_second_moments(d, _NEAR))

"""Reference computations that share no code with the package."""

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal


def fd_bound_state_count(q, l, r_box=40.0, n=20000):
    """Negative eigenvalues of ``-u'' + (l(l+1)/r² + q) u`` with Dirichlet walls.

    Second-order finite differences on ``(0, r_box)``; ``q`` is a callable of r.
    """
    dr = r_box / (n + 1)
    r = dr * np.arange(1, n + 1)
    diag = 2.0 / dr**2 + l * (l + 1) / r**2 + q(r)
    off = np.full(n - 1, -1.0 / dr**2)
    ev = eigvalsh_tridiagonal(diag, off, select="v", select_range=(-np.inf, 0.0))
    return len(ev)


def rk4_regular(q, l, r_end, steps=20000, r0=1e-2):
    """Classical RK4 for ``u'' = (l(l+1)/r² + q) u`` from ``u ~ r^(l+1)``.

    Starts from the two-term series ``r^(l+1) (1 + q(0) r²/(4l + 6))``.
    """
    def f(r, y):
        return np.array([y[1], (l * (l + 1) / r**2 + q(r)) * y[0]])

    q0 = float(q(np.array(0.0)))
    c = q0 / (4 * l + 6)
    h = (r_end - r0) / steps
    r = r0
    y = np.array([r0 ** (l + 1) * (1 + c * r0**2), (l + 1) * r0**l + (l + 3) * c * r0 ** (l + 2)])
    for _ in range(steps):
        k1 = f(r, y)
        k2 = f(r + h / 2, y + h / 2 * k1)
        k3 = f(r + h / 2, y + h / 2 * k2)
        k4 = f(r + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        r += h
    return y


def born_s_wave(q, k, r_max, n=200001):
    """First Born approximation ``δ_0 ≈ -(1/k) ∫ q(r) sin²(kr) dr``."""
    r = np.linspace(0.0, r_max, n)
    return -np.trapezoid(q(r) * np.sin(k * r) ** 2, r) / k


def gaussian_q(depth, width=1.0):
    return lambda r: depth * np.exp(-((np.asarray(r, dtype=float) / width) ** 2))


def bump_q(depth, radius=1.0):
    def q(r):
        s = np.asarray(r, dtype=float) / radius
        out = np.zeros_like(s)
        inside = s < 1
        out[inside] = depth * np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
        return out
    return q

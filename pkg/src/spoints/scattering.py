"""
Partial-wave phase shifts and Levinson checks for radial potentials.

The regular solution of

    u'' = (l(l+1)/r² + q(r) - k²) u,       u ~ r^(l+1) at r = 0,

is integrated with Numerov's method simultaneously for a whole grid of
wavenumbers. Beyond the support it equals ``C (ĵ_l(kr) cos δ - n̂_l(kr) sin δ)``
with the Riccati-Bessel functions ``ĵ_l = x j_l(x)``, ``n̂_l = x y_l(x)``;
comparing two radii outside the support gives

    tan δ_l = (u1 ĵ2 - u2 ĵ1) / (u1 n̂2 - u2 n̂1).

Levinson's theorem ``δ_l(0+) - δ_l(∞) = π N_l`` is checked by pinning the
continuous branch at a large ``k_max`` (where ``δ_l`` is small) and following
it down to ``k = 10⁻³/R``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import spherical_jn, spherical_yn

from .errors import MalformedInputError, NumericalFailure
from .potentials import PotentialField
from .radial import count_bound_states

__all__ = [
    "PhaseCurve",
    "LevinsonReport",
    "spherical_bessel",
    "phase_shift",
    "phase_curve",
    "levinson_check",
    "default_k_max",
]

SCHEMA = "spoints.levinson/1"
HIGH_K_TOL = 0.02
K_MIN_FACTOR = 1e-3
MAX_L = 8


def spherical_bessel(l: int, x):
    """Regular and irregular spherical Bessel functions ``(j_l(x), y_l(x))``.

    Examples
    --------
    >>> float(spherical_bessel(0, 1.0)[0])
    0.8414709848078965
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise MalformedInputError("spherical Bessel functions need x > 0")
    if not 0 <= l <= MAX_L:
        raise MalformedInputError(f"channel l must be between 0 and {MAX_L}")
    return spherical_jn(l, x), spherical_yn(l, x)


def _profile_values(profile, r):
    # average the one-sided limits so jumps sitting on a node cost O(dr²)
    eps = 1e-9 * max(1.0, float(r[-1]))
    return 0.5 * (profile(np.maximum(r - eps, 0.0)) + profile(r + eps))


def _numerov_two_radii(profile, l, ks, r1, r2, dr):
    """Regular solutions at ``r1`` and ``r2`` for every k (Numerov, vectorised)."""
    n1 = int(round(r1 / dr))
    n2 = int(round(r2 / dr))
    r = dr * np.arange(n2 + 1)
    q = _profile_values(profile, r)
    q0 = float(profile(np.array([0.0]))[0])
    ks = np.asarray(ks, dtype=float)
    k2 = ks**2
    ll = l * (l + 1)
    c = dr**2 / 12.0

    def f(i):
        return ll / r[i] ** 2 + q[i] - k2

    def start(i):
        x = r[i]
        return x ** (l + 1) * (1.0 + (q0 - k2) * x**2 / (4 * l + 6))

    u_prev, u = start(1), start(2)
    f_prev, f_cur = f(1), f(2)
    scale = np.zeros_like(ks)   # log of the accumulated rescaling
    out1 = None
    for i in range(2, n2):
        f_next = f(i + 1)
        u_next = (2.0 * u * (1.0 + 5.0 * c * f_cur) - u_prev * (1.0 - c * f_prev)) / (1.0 - c * f_next)
        u_prev, u = u, u_next
        f_prev, f_cur = f_cur, f_next
        big = np.abs(u) > 1e200
        if np.any(big):
            u_prev[big] *= 1e-200
            u[big] *= 1e-200
            scale[big] += 200.0
        if i + 1 == n1:
            out1 = (u.copy(), scale.copy())
    if out1 is None:
        raise NumericalFailure("matching radius not reached")
    u1, s1 = out1
    u1 = u1 * 10.0 ** (s1 - scale)   # bring both to the same scale
    return u1, u, dr * n1, dr * n2


def _riccati(l, x):
    j, y = spherical_jn(l, x), spherical_yn(l, x)
    return x * j, x * y


def _wrap(delta):
    """Map into (-π/2, π/2]."""
    d = np.mod(delta + np.pi / 2, np.pi) - np.pi / 2
    return np.where(d == -np.pi / 2, np.pi / 2, d)


def _phases(p, l, ks, k_max=None):
    profile = p.profile
    R = profile.support_radius
    ks = np.atleast_1d(np.asarray(ks, dtype=float))
    if np.any(ks <= 0):
        raise MalformedInputError("wavenumbers must be positive")
    top = float(ks.max()) if k_max is None else float(k_max)
    n_in = max(2000, int(math.ceil(R * top / 0.1)))
    dr = R / n_in
    r1, r2 = R, 1.25 * R
    u1, u2, r1, r2 = _numerov_two_radii(profile, l, ks, r1, r2, dr)
    j1, n1 = _riccati(l, ks * r1)
    j2, n2 = _riccati(l, ks * r2)
    num = u1 * j2 - u2 * j1
    den = u1 * n2 - u2 * n1
    return _wrap(np.arctan2(num, den))


def phase_shift(p: PotentialField, l: int, k):
    """Phase shift ``δ_l(k)`` reduced to ``(-π/2, π/2]``.

    ``k`` may be a scalar or an array; the result has the same shape.
    """
    if not p.is_radial:
        raise MalformedInputError("phase shifts need a radially symmetric potential")
    if not 0 <= l <= MAX_L:
        raise MalformedInputError(f"channel l must be between 0 and {MAX_L}")
    k_arr = np.asarray(k, dtype=float)
    out = _phases(p, l, k_arr.ravel())
    return float(out[0]) if k_arr.ndim == 0 else out.reshape(k_arr.shape)


def default_k_max(p: PotentialField) -> float:
    """``max(40/R, ∫|q| dr / 0.02)``: far enough out that ``|δ_l(k_max)| < 0.02``
    by the first Born estimate ``|δ_0| <= ∫|q| dr / (2k)`` with a margin of two."""
    profile = p.profile
    R = profile.support_radius
    r = np.linspace(0.0, R, 4001)
    integral = float(np.trapezoid(np.abs(profile(r)), r)) if hasattr(np, "trapezoid") \
        else float(np.trapz(np.abs(profile(r)), r))
    return max(40.0 / R, integral / HIGH_K_TOL)


@dataclass(frozen=True, eq=False)
class PhaseCurve:
    """Continuous branch of ``δ_l`` on an increasing k-grid."""

    l: int
    k: np.ndarray
    delta: np.ndarray
    refinements: int = 0

    @property
    def delta_zero(self):
        """``δ_l(0+)``, read at the smallest k of the grid."""
        return float(self.delta[0])

    @property
    def delta_high(self):
        return float(self.delta[-1])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(f"# channel l={self.l}\n# k delta\n")
            w = csv.writer(fh, delimiter=" ", lineterminator="\n")
            for k, d in zip(self.k, self.delta):
                w.writerow([f"{k:.10e}", f"{d:.12e}"])


def _unwrap_down(raw):
    """Follow the branch from the last entry (kept in (-π/2, π/2]) to the first."""
    out = np.empty_like(raw)
    out[-1] = raw[-1]
    for i in range(len(raw) - 2, -1, -1):
        out[i] = raw[i] + np.pi * np.round((out[i + 1] - raw[i]) / np.pi)
    return out


def phase_curve(p: PotentialField, l: int, k_max=None, n_k: int = 256, max_refine: int = 3) -> PhaseCurve:
    """Phase shift branch on a geometric grid from ``10⁻³/R`` to ``k_max``.

    Where adjacent values differ by more than ``π/4`` the grid is refined
    (geometric midpoints inserted), at most ``max_refine`` times; a jump that
    survives is reported as a numerical failure (resonance too sharp).
    """
    if n_k < 64:
        raise MalformedInputError("phase curves need at least 64 k-points")
    if not p.is_radial:
        raise MalformedInputError("phase shifts need a radially symmetric potential")
    R = p.profile.support_radius
    k_max = default_k_max(p) if k_max is None else float(k_max)
    k = np.geomspace(K_MIN_FACTOR / R, k_max, n_k)
    raw = _phases(p, l, k, k_max)
    for it in range(max_refine + 1):
        delta = _unwrap_down(raw)
        bad = np.nonzero(np.abs(np.diff(delta)) > np.pi / 4)[0]
        if len(bad) == 0:
            return PhaseCurve(l, k, delta, it)
        if it == max_refine:
            break
        new_k = np.sqrt(k[bad] * k[bad + 1])
        new_raw = _phases(p, l, new_k, k_max)
        order = np.argsort(np.concatenate([k, new_k]), kind="stable")
        k = np.concatenate([k, new_k])[order]
        raw = np.concatenate([raw, new_raw])[order]
    raise NumericalFailure(f"phase jump in channel {l} persists after {max_refine} refinements")


@dataclass(frozen=True)
class LevinsonReport:
    """Per-channel Levinson data and the two index estimates."""

    channels: tuple
    total_index: int
    phase_index: int
    k_max: float
    n_k: int

    @property
    def max_defect(self):
        return max((c["defect"] for c in self.channels), default=0.0)

    def as_dict(self):
        return {"schema": SCHEMA, "k_max": self.k_max, "n_k": self.n_k,
                "channels": list(self.channels), "total_index": self.total_index,
                "phase_index": self.phase_index, "tolerance": HIGH_K_TOL * math.pi}

    def to_json(self, path=None):
        text = json.dumps(self.as_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def levinson_check(p: PotentialField, L_max: int = 4, k_max=None, n_k: int = 256,
                   curves=None) -> LevinsonReport:
    """Compare ``δ_l(0+)`` with ``π N_l`` for ``l = 0 ... L_max``.

    ``N_l`` comes from the node count of the zero-energy radial solution.
    Pass a list as ``curves`` to collect the :class:`PhaseCurve` objects.
    """
    k_max = default_k_max(p) if k_max is None else float(k_max)
    rows = []
    total = 0
    phase_index = 0
    for l in range(L_max + 1):
        N = count_bound_states(p, l)
        curve = phase_curve(p, l, k_max, n_k)
        if abs(curve.delta_high) >= HIGH_K_TOL:
            raise NumericalFailure(f"|delta_{l}(k_max)| = {abs(curve.delta_high):.3g}; raise k_max")
        if curves is not None:
            curves.append(curve)
        d0 = curve.delta_zero
        rows.append({"l": l, "N": N, "delta_0": d0, "delta_k_max": curve.delta_high,
                     "defect": abs(d0 - math.pi * N), "n_points": len(curve.k)})
        total += (2 * l + 1) * N
        phase_index += (2 * l + 1) * int(round(d0 / math.pi))
    return LevinsonReport(tuple(rows), total, phase_index, k_max, n_k)

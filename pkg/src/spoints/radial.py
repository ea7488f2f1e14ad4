"""
Radial pipeline for spherically symmetric potentials.

For a radial ``q`` the zero-energy regular solutions ``φ_l`` of

    -φ'' + l(l+1)/r² φ + q φ = 0,      φ_l(r) ~ r^(l+1) as r -> 0,

carry all the information needed here:

* the number ``N_l`` of bound states in channel ``l`` is the number of zeros
  of ``φ_l`` on ``(0, ∞)`` (Sturm oscillation),
* the distorted plane wave is ``Φ(r) = φ_0(r) / (A r)`` where ``φ_0 = A r + B``
  beyond the support,
* the Kram determinants ``Δ^m_l`` (rows ``φ_m ... φ_l``, columns derivative
  orders ``0 ... l-m``) have ``Σ_k (-1)^k N_(m+k)`` zeros,
* the product ``δ_l = Δ^0_l (Δ^1_l)² ... (Δ^l_l)²`` locates the s-spheres of
  order ``m`` with ``l = 2m - 2``.

Beyond the support radius ``R`` every ``φ_l`` is a free solution,
``a r^(l+1) + b r^(-l)``, so values on ``(R, ∞)`` are evaluated in closed form.
Higher derivatives come from differentiating the equation itself (Leibniz rule
on ``φ'' = V φ``), never from numerical differentiation.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

from .errors import ConventionViolatedError, MalformedInputError, NumericalFailure
from .potentials import PotentialField

__all__ = [
    "RadialSolution",
    "ChannelCounts",
    "KramTable",
    "SSphereReport",
    "ZeroCount",
    "SumRuleReport",
    "RadialPhi",
    "RadialPsi",
    "integrate_regular",
    "count_bound_states",
    "channel_counts",
    "radial_phi",
    "asymptotic_slope",
    "critical_coupling",
    "first_critical_coupling",
    "phi_derivatives",
    "kram_det",
    "kram_table",
    "zero_count",
    "verify_sum_rule",
    "jet_det_product",
    "find_s_spheres",
    "solve_psi_radial",
    "psi_residual",
    "write_radial_csv",
]

RTOL = 1e-12
RESONANCE_TOL = 1e-8
TANGENT_TOL = 1e-8
_INNER_SAMPLES = 4000
_OUTER_SAMPLES = 600


def _check_radial(p: PotentialField):
    if not isinstance(p, PotentialField):
        raise MalformedInputError("expected a PotentialField")
    if not p.is_radial:
        raise MalformedInputError("the radial pipeline needs a potential centered at the origin")
    return p.profile


def _start_radius(R):
    return 1e-3 * min(1.0, R)


@dataclass(frozen=True, eq=False)
class RadialSolution:
    """Regular zero-energy solution ``φ_l`` of one partial wave.

    Attributes
    ----------
    l : int
        Channel.
    r, phi, dphi : ndarray
        Samples on a uniform grid ``r0 ... r_max``.
    support : float
        Radius beyond which ``q`` vanishes.
    outer : tuple of float
        ``(a, b)`` with ``φ_l = a r^(l+1) + b r^(-l)`` for ``r >= support``.
    """

    l: int
    r: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    support: float
    outer: tuple
    r0: float
    energy: float = 0.0
    _dense: object = field(default=None, repr=False)

    @property
    def step(self):
        return float(self.r[1] - self.r[0]) if len(self.r) > 1 else 0.0

    def __call__(self, r):
        """``(φ_l(r), φ_l'(r))`` at arbitrary ``r >= r0``."""
        r = np.asarray(r, dtype=float)
        if np.any(r < self.r0 * (1 - 1e-12)):
            raise MalformedInputError(f"r below the series start radius {self.r0:g}")
        phi = np.empty_like(r)
        dphi = np.empty_like(r)
        inner = (r < self.support) & (self._dense is not None)
        if np.any(inner):
            y = self._dense(r[inner])
            phi[inner], dphi[inner] = y[0], y[1]
        ro = r[~inner]
        a, b = self.outer
        l = self.l
        phi[~inner] = a * ro ** (l + 1) + b * ro ** (-l)
        dphi[~inner] = (l + 1) * a * ro**l - l * b * ro ** (-l - 1)
        return phi, dphi


def _series_start(q0, l, r0):
    c = q0 / (4 * l + 6)
    phi = r0 ** (l + 1) * (1 + c * r0**2)
    dphi = (l + 1) * r0**l + (l + 3) * c * r0 ** (l + 2)
    return phi, dphi


@lru_cache(maxsize=256)
def _inner_solution(profile, l):
    R = profile.support_radius
    r0 = _start_radius(R)
    q0 = float(profile.derivatives(np.array([0.0]), 0)[0, 0])
    y0 = _series_start(q0, l, r0)
    ll = l * (l + 1)

    def rhs(r, y):
        return [y[1], (ll / r**2 + profile(r)) * y[0]]

    # a component crossing zero right at R can stall the step control; loosen atol then
    for atol in (1e-14, 1e-11, 1e-8):
        sol = solve_ivp(rhs, (r0, R), y0, method="DOP853", rtol=RTOL, atol=atol * r0 ** (l + 1),
                        dense_output=True)
        if sol.success:
            break
    if not sol.success:
        raise NumericalFailure(f"radial integration failed: {sol.message}")
    uR, dR = sol.y[:, -1]
    # match a r^(l+1) + b r^(-l) at R
    a = (l * uR / R + dR) * R ** (-l) / (2 * l + 1)
    b = ((l + 1) * uR / R - dR) * R ** (l + 1) / (2 * l + 1)
    return sol.sol, float(a), float(b), r0


def integrate_regular(p: PotentialField, l: int, r_max=None, dr=None) -> RadialSolution:
    """Regular solution of the zero-energy radial equation in channel ``l``.

    Parameters
    ----------
    p : PotentialField
        Radially symmetric potential.
    l : int
        Channel, ``l >= 0``.
    r_max : float, optional
        End of the sample grid; default ``3 R``. Must be at least ``3 R``.
    dr : float, optional
        Sample spacing; default ``R / 1000``.

    Returns
    -------
    RadialSolution
    """
    if int(l) != l or l < 0:
        raise MalformedInputError("channel l must be a nonnegative integer")
    l = int(l)
    profile = _check_radial(p)
    R = profile.support_radius
    r_max = 3.0 * R if r_max is None else float(r_max)
    if r_max < 3.0 * R * (1 - 1e-12):
        raise MalformedInputError("r_max must be at least three support radii")
    dense, a, b, r0 = _inner_solution(profile, l)
    dr = R / 1000.0 if dr is None else float(dr)
    n = max(2, int(math.ceil((r_max - r0) / dr)) + 1)
    r = r0 + dr * np.arange(n)
    sol = RadialSolution(l, r, np.empty(0), np.empty(0), R, (a, b), r0, _dense=dense)
    phi, dphi = sol(r)
    return RadialSolution(l, r, phi, dphi, R, (a, b), r0, _dense=dense)


def _solution(p, l):
    profile = _check_radial(p)
    dense, a, b, r0 = _inner_solution(profile, int(l))
    return RadialSolution(int(l), np.empty(0), np.empty(0), np.empty(0), profile.support_radius,
                          (a, b), r0, _dense=dense)


def _resonant(a, b, l, R):
    lead, tail = abs(a) * R ** (l + 1), abs(b) * R ** (-l)
    return lead <= RESONANCE_TOL * (lead + tail)


# -- zero counting ------------------------------------------------------------


@dataclass(frozen=True)
class ZeroCount:
    """Transversal zeros of a sampled curve, plus suspected tangential ones."""

    count: int
    roots: tuple
    tangential: tuple = ()

    def __int__(self):
        return self.count


def zero_count(r, values, func=None, tangent_tol=TANGENT_TOL) -> ZeroCount:
    """Count sign changes of a sampled curve.

    Each sign change between adjacent samples is confirmed (and located) by
    bisection when ``func`` is given, otherwise by linear interpolation.
    Sample-level local minima of ``|f|`` are re-examined with ``func`` to
    catch pairs of zeros that fall between two samples. Zeros where the
    scaled slope is below ``tangent_tol`` are reported as tangential and not
    counted.

    Examples
    --------
    >>> r = np.linspace(1e-3, 10, 2001)
    >>> zero_count(r, np.sin(r)).count
    3
    """
    r = np.asarray(r, dtype=float)
    f = np.asarray(values, dtype=float)
    if len(f) == 0 or not np.any(f):
        return ZeroCount(0, ())
    a = np.abs(f)
    roots, tangential = [], []
    win = 20

    def local_scale(i):
        lo, hi = max(0, i - win), min(len(f) - 1, i + win)
        return np.max(a[lo:hi + 1]), r[hi] - r[lo]

    def locate(lo, hi, flo, fhi):
        if func is None:
            return lo - flo * (hi - lo) / (fhi - flo)
        return brentq(func, lo, hi, xtol=1e-12 * max(1.0, abs(hi)), rtol=1e-15)

    def slope_ok(i, j):
        # slope across the bracket, measured against the local size of f
        scale, span = local_scale(i)
        slope = abs(f[j] - f[i]) / (r[j] - r[i])
        return slope * span / scale > tangent_tol

    s = np.sign(f)
    for i in range(len(f) - 1):
        if s[i] == 0 and i > 0:
            continue
        if s[i] * s[i + 1] < 0 or (s[i + 1] == 0 and i + 2 < len(f) and s[i] * s[i + 2] < 0):
            j = i + 1 if s[i + 1] != 0 else i + 2
            x0 = locate(r[i], r[j], f[i], f[j])
            (roots if slope_ok(i, j) else tangential).append(float(x0))
    # look for hidden sign-change pairs between samples
    for i in range(1, len(f) - 1):
        if a[i] <= a[i - 1] and a[i] <= a[i + 1] and s[i - 1] == s[i] == s[i + 1] != 0:
            if func is not None:
                sg = s[i]
                res = minimize_scalar(lambda x: sg * func(x), bounds=(r[i - 1], r[i + 1]),
                                      method="bounded", options={"xatol": 1e-12 * max(1.0, r[i])})
                if sg * res.fun < 0:
                    x1 = brentq(func, r[i - 1], res.x)
                    x2 = brentq(func, res.x, r[i + 1])
                    roots.extend([float(x1), float(x2)])
                    continue
                if abs(res.fun) <= tangent_tol * local_scale(i)[0]:
                    tangential.append(float(res.x))
            elif a[i] <= tangent_tol * local_scale(i)[0]:
                tangential.append(float(r[i]))
    roots.sort()
    return ZeroCount(len(roots), tuple(roots), tuple(sorted(tangential)))


# -- bound states, Φ and the convention proxy --------------------------------


def count_bound_states(p: PotentialField, l: int) -> int:
    """Number of bound states in channel ``l`` from the zeros of ``φ_l``.

    Zeros inside the support are counted on a dense grid; beyond it
    ``φ_l = a r^(l+1) + b r^(-l)`` has one more zero exactly when
    ``-b/a > R^(2l+1)``.

    Raises
    ------
    ConventionViolatedError
        If the outgoing coefficient ``a`` vanishes (zero-energy resonance or
        bound state).
    """
    sol = _solution(p, l)
    a, b = sol.outer
    R = sol.support
    if _resonant(a, b, sol.l, R):
        raise ConventionViolatedError(
            f"zero-energy resonance in channel {l}: outgoing coefficient a = {a:.3e}",
            {"channel": int(l), "a": a, "b": b})
    r = np.linspace(sol.r0, R, _INNER_SAMPLES)
    zc = zero_count(r, sol(r)[0], func=lambda x: float(sol(np.array([x]))[0][0]))
    n = zc.count
    if -b / a > R ** (2 * sol.l + 1):
        n += 1
    return n


@dataclass(frozen=True)
class ChannelCounts:
    """Bound-state counts ``N_l`` for ``l = 0 ... L_max``."""

    counts: tuple

    def __getitem__(self, l):
        return self.counts[l] if l < len(self.counts) else 0

    @property
    def l_max(self):
        return len(self.counts) - 1

    @property
    def total_multiplicity(self):
        return sum((2 * l + 1) * n for l, n in enumerate(self.counts))

    def as_dict(self):
        return {"N": list(self.counts), "total_multiplicity": self.total_multiplicity}


def channel_counts(p: PotentialField, l_max: int = 4) -> ChannelCounts:
    """``N_l`` for all channels up to ``l_max``."""
    return ChannelCounts(tuple(count_bound_states(p, l) for l in range(l_max + 1)))


def asymptotic_slope(p: PotentialField):
    """``(A, B)`` with ``φ_0(r) = A r + B`` beyond the support (``φ_0 ~ r`` at 0).

    ``A`` is the invertibility proxy: it vanishes exactly at a zero-energy
    s-wave resonance.
    """
    return _solution(p, 0).outer


def critical_coupling(p: PotentialField, bracket, l: int = 0) -> float:
    """Coupling ``α`` in ``bracket`` where the outgoing coefficient of ``φ_l``
    vanishes (a bound state sits exactly at zero energy)."""

    def a_of(alpha):
        return _solution(p.with_coupling(alpha), l).outer[0]

    lo, hi = bracket
    if a_of(lo) * a_of(hi) > 0:
        raise MalformedInputError("bracket does not straddle a critical coupling")
    return float(brentq(a_of, lo, hi, xtol=1e-12, rtol=1e-13))


def first_critical_coupling(p: PotentialField, l: int = 0, alpha_max: float = 1e3) -> float:
    """Smallest coupling at which channel ``l`` acquires a bound state.

    Scans ``α`` geometrically for the first sign change of the outgoing
    coefficient of ``φ_l`` and refines it with Brent's method.
    """
    prev = 1e-3
    prev_a = _solution(p.with_coupling(prev), l).outer[0]
    for alpha in np.geomspace(1e-3, alpha_max, 241)[1:]:
        a = _solution(p.with_coupling(alpha), l).outer[0]
        if a * prev_a < 0:
            return critical_coupling(p, (prev, float(alpha)), l)
        prev, prev_a = float(alpha), a
    raise MalformedInputError(f"no bound state appears in channel {l} for coupling <= {alpha_max:g}")


@dataclass(frozen=True, eq=False)
class RadialPhi:
    """``Φ(r) = φ_0(r) / (A r)``, normalised so that ``Φ -> 1`` at infinity."""

    A: float
    B: float
    support: float
    _sol: RadialSolution = field(repr=False)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        small = r < self._sol.r0
        out[small] = 1.0 / self.A   # φ_0 ~ r at the origin
        rr = r[~small]
        out[~small] = self._sol(rr)[0] / (self.A * rr)
        return out

    def zeros(self):
        """Radii where ``Φ`` changes sign (the m = 1 s-sphere radii)."""
        return find_s_spheres_from_phi(self)


def radial_phi(p: PotentialField) -> RadialPhi:
    """Distorted plane wave ``Φ`` of a radial potential.

    Raises
    ------
    ConventionViolatedError
        If the asymptotic slope ``A`` is below the resonance threshold.
    """
    sol = _solution(p, 0)
    A, B = sol.outer
    if _resonant(A, B, 0, sol.support):
        raise ConventionViolatedError(f"asymptotic slope A = {A:.3e} vanishes (zero-energy resonance)",
                                      {"A": A, "B": B})
    return RadialPhi(A, B, sol.support, sol)


def find_s_spheres_from_phi(phi: RadialPhi):
    sol = phi._sol
    R = sol.support
    r = np.linspace(sol.r0, R, _INNER_SAMPLES)
    zc = zero_count(r, sol(r)[0], func=lambda x: float(sol(np.array([x]))[0][0]))
    roots = list(zc.roots)
    if phi.A != 0 and -phi.B / phi.A > R:
        roots.append(-phi.B / phi.A)
    return tuple(sorted(roots))


# -- Kram determinants --------------------------------------------------------


def phi_derivatives(p: PotentialField, l: int, r, order: int):
    """``φ_l^(k)(r)`` for ``k = 0 ... order``; shape ``(order + 1,) + r.shape``.

    Uses ``φ^(n+2) = Σ_k C(n, k) V^(k) φ^(n-k)`` with ``V = l(l+1)/r² + q``.
    """
    r = np.asarray(r, dtype=float)
    sol = _solution(p, l)
    phi, dphi = sol(r)
    out = np.zeros((order + 1,) + r.shape)
    out[0] = phi
    if order >= 1:
        out[1] = dphi
    if order >= 2:
        nq = order - 2
        qd = p.radial_derivatives(r, nq)
        ll = l * (l + 1)
        V = np.empty((nq + 1,) + r.shape)
        for k in range(nq + 1):
            V[k] = qd[k] + ll * (-1) ** k * math.factorial(k + 1) * r ** (-2.0 - k)
        for n in range(order - 1):
            out[n + 2] = sum(math.comb(n, k) * V[k] * out[n - k] for k in range(n + 1))
    return out


def kram_det(p: PotentialField, m: int, l: int, r):
    """Kram determinant ``Δ^m_l(r)``.

    The matrix has rows ``φ_m ... φ_l`` and columns derivative orders
    ``0 ... l - m``; ``Δ^l_l = φ_l``.

    Examples
    --------
    For ``q ≡ 0``, ``Δ^0_1 = det[[r, 1], [r², 2r]] = r²``.
    """
    if not (0 <= m <= l):
        raise MalformedInputError("need 0 <= m <= l")
    r = np.asarray(r, dtype=float)
    r0 = _solution(p, l).r0
    if np.any(r < r0 * (1 - 1e-12)):
        raise MalformedInputError(f"r below the series start radius {r0:g}")
    k = l - m
    rows = [phi_derivatives(p, j, r, k) for j in range(m, l + 1)]   # each (k+1,) + shape
    mat = np.moveaxis(np.array(rows), (0, 1), (-2, -1))              # shape + (rows, cols)
    return np.linalg.det(mat)


@dataclass(frozen=True, eq=False)
class KramTable:
    m: int
    l: int
    r: np.ndarray
    values: np.ndarray

    @property
    def derivative_order(self):
        return self.l - self.m


def kram_table(p: PotentialField, m: int, l: int, r) -> KramTable:
    r = np.asarray(r, dtype=float)
    return KramTable(m, l, r, kram_det(p, m, l, r))


def _far_radius(p, l_values):
    # beyond this radius the leading r^(j+1) terms dominate every row
    R = p.support_radius
    far = 10.0 * R
    for j in l_values:
        a, b = _solution(p, j).outer
        if a != 0:
            far = max(far, (1e6 * abs(b / a)) ** (1.0 / (2 * j + 1)))
    return min(far, 1e8 * R)


def _sample_grid(p, l_values):
    sol = _solution(p, max(l_values))
    R = sol.support
    inner = np.linspace(sol.r0, R, _INNER_SAMPLES)
    outer = np.geomspace(R, _far_radius(p, l_values), _OUTER_SAMPLES)[1:]
    return np.concatenate([inner, outer])


def _kram_zeros(p, m, l) -> ZeroCount:
    r = _sample_grid(p, range(m, l + 1))
    vals = kram_det(p, m, l, r)
    return zero_count(r, vals, func=lambda x: float(kram_det(p, m, l, np.array([x]))[0]))


@dataclass(frozen=True)
class SumRuleReport:
    m: int
    l: int
    z_measured: int
    z_predicted: int
    counts: tuple
    roots: tuple
    tangential: tuple

    @property
    def passed(self):
        return self.z_measured == self.z_predicted and not self.tangential

    def as_dict(self):
        return {"m": self.m, "l": self.l, "z_measured": self.z_measured,
                "z_predicted": self.z_predicted, "N": list(self.counts),
                "roots": list(self.roots), "tangential": list(self.tangential),
                "passed": self.passed}


def verify_sum_rule(p: PotentialField, m: int, l: int) -> SumRuleReport:
    """Compare the zero count of ``Δ^m_l`` with ``Σ_k (-1)^k N_(m+k)``."""
    counts = tuple(count_bound_states(p, j) for j in range(l + 1))
    predicted = sum((-1) ** k * counts[m + k] for k in range(l - m + 1))
    zc = _kram_zeros(p, m, l)
    return SumRuleReport(m, l, zc.count, predicted, counts, zc.roots, zc.tangential)


def jet_det_product(p: PotentialField, l: int, r):
    """``δ_l(r) = Δ^0_l(r) · Π_(m=1..l) Δ^m_l(r)²``."""
    out = kram_det(p, 0, l, r)
    for m in range(1, l + 1):
        out = out * kram_det(p, m, l, r) ** 2
    return out


@dataclass(frozen=True)
class SSphereReport:
    """s-sphere radii of order ``m`` with the diagnostic that produced them."""

    m: int
    radii: tuple
    diagnostic: str
    factors: tuple = ()

    def as_dict(self):
        return {"m": self.m, "radii": list(self.radii), "diagnostic": self.diagnostic,
                "factors": [list(f) for f in self.factors]}

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def find_s_spheres(p: PotentialField, m: int) -> SSphereReport:
    """Radii of the s-spheres of order ``m`` for a radial potential.

    ``m = 1`` uses the zeros of ``Φ``. For ``m >= 2`` the zeros of
    ``δ_(2m-2)`` are the union of the zeros of its Kram factors; each factor
    is bracketed on its own because the squared factors do not change sign.
    ``factors`` lists ``(radius, m')`` pairs naming the factor ``Δ^m'_l``.
    """
    if m < 1:
        raise MalformedInputError("order m must be >= 1")
    if m == 1:
        radii = radial_phi(p).zeros()
        return SSphereReport(1, tuple(radii), "Phi")
    radial_phi(p)   # convention proxy
    l = 2 * m - 2
    found = []
    for mm in range(l + 1):
        zc = _kram_zeros(p, mm, l)
        found.extend((x, mm) for x in zc.roots)
    found.sort()
    return SSphereReport(m, tuple(x for x, _ in found), f"delta_{l}",
                         tuple((x, mm) for x, mm in found))


# -- Ψ ------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RadialPsi:
    """Radial solution of ``(-Δ + q) Ψ = -6 Φ`` with ``Ψ ~ r²`` at infinity.

    Beyond the support ``Ψ = r² + 3 (B/A) r + c0 / r``; ``tail`` holds
    ``3 B/A`` and ``c0``.
    """

    support: float
    tail: tuple
    shift: float
    phi: RadialPhi
    _dense: object = field(repr=False)

    def v(self, r):
        """``(v, v')`` with ``v = r Ψ``."""
        r = np.asarray(r, dtype=float)
        v = np.empty_like(r)
        dv = np.empty_like(r)
        inner = (r < self.support) & (self._dense is not None)
        if np.any(inner):
            y = self._dense(r[inner])
            v[inner], dv[inner] = y[2] + self.shift * y[0], y[3] + self.shift * y[1]
        ro = r[~inner]
        t1, c0 = self.tail
        v[~inner] = ro**3 + t1 * ro**2 + c0
        dv[~inner] = 3 * ro**2 + 2 * t1 * ro
        return v, dv

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.v(r)[0] / r


def solve_psi_radial(p: PotentialField) -> RadialPsi:
    """Solve ``-v'' + q v = -6 r Φ`` for ``v = r Ψ`` with ``v ~ Φ(0) r³`` at 0.

    The homogeneous solution ``φ_0`` is added so that ``v`` has no linear term
    beyond the support. For ``q ≡ 0`` the closed form ``Ψ = r²`` is returned.
    """
    phi = radial_phi(p)
    profile = p.profile
    R = phi.support
    if not np.any(profile(np.linspace(0.0, R, 2001))):
        return RadialPsi(R, (0.0, 0.0), 0.0, phi, None)
    A, B = phi.A, phi.B
    r0 = phi._sol.r0
    q0 = float(profile.derivatives(np.array([0.0]), 0)[0, 0])
    u0, du0 = _series_start(q0, 0, r0)
    v0 = (r0**3 + q0 * r0**5 / 10) / A
    dv0 = (3 * r0**2 + q0 * r0**4 / 2) / A

    def rhs(r, y):
        qr = profile(r)
        return [y[1], qr * y[0], y[3], qr * y[2] + 6.0 * y[0] / A]

    sol = solve_ivp(rhs, (r0, R), [u0, du0, v0, dv0], method="DOP853", rtol=RTOL,
                    atol=1e-15, dense_output=True)
    if not sol.success:
        raise NumericalFailure(f"radial integration failed: {sol.message}")
    uR, duR, vR, dvR = sol.y[:, -1]
    t1 = 3.0 * B / A
    c1 = dvR - 3 * R**2 - 2 * t1 * R
    c0 = vR - R**3 - t1 * R**2 - c1 * R
    shift = -c1 / A
    return RadialPsi(R, (t1, c0 + shift * B), shift, phi, sol.sol)


def psi_residual(p: PotentialField, dr=2.5e-3, r_max=None):
    """Max-norm residual of ``Φ + (1/6)(-Δ + q) Ψ`` on a uniform radial grid.

    ``ΔΨ = v''/r`` is taken with the fourth-order five-point stencil.
    """
    psi = solve_psi_radial(p)
    R = psi.support
    r_max = 3.0 * R if r_max is None else r_max
    r = np.arange(1, int(r_max / dr) + 1) * dr
    v = psi.v(r)[0]
    d2 = (-v[4:] + 16 * v[3:-1] - 30 * v[2:-2] + 16 * v[1:-3] - v[:-4]) / (12 * dr**2)
    rc = r[2:-2]
    lap = d2 / rc
    res = psi.phi(rc) + (-lap + p.profile(rc) * v[2:-2] / rc) / 6.0
    return float(np.max(np.abs(res)))


# -- output -------------------------------------------------------------------


def write_radial_csv(path, p: PotentialField, r, l_max=2):
    """Whitespace-separated columns ``r, φ_0..φ_L, Φ, Δ^m_L (m=0..L), δ_L``."""
    r = np.asarray(r, dtype=float)
    cols = [r]
    names = ["r"]
    for l in range(l_max + 1):
        cols.append(_solution(p, l)(r)[0])
        names.append(f"phi_{l}")
    cols.append(radial_phi(p)(r))
    names.append("Phi")
    for m in range(l_max + 1):
        cols.append(kram_det(p, m, l_max, r))
        names.append(f"Delta^{m}_{l_max}")
    cols.append(jet_det_product(p, l_max, r))
    names.append(f"delta_{l_max}")
    with open(path, "w", newline="") as fh:
        fh.write("# " + " ".join(names) + "\n")
        w = csv.writer(fh, delimiter=" ", lineterminator="\n")
        for row in np.column_stack(cols):
            w.writerow([f"{v:.12e}" for v in row])

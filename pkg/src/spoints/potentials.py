"""
Compactly supported potentials.

A :class:`PotentialField` is a sum of radial profiles, each shifted to its own
center. Three profile shapes are available:

* ``gaussian`` -- ``depth * exp(-(r/width)**2)``, truncated where its magnitude
  drops below ``truncation`` (a smooth taper acts over the last 5% of the
  truncation radius so the profile stays C-infinity),
* ``bump`` -- the standard mollifier ``depth * exp(1 - 1/(1 - (r/width)**2))``,
  supported in ``r < width``,
* ``table`` -- clamped cubic spline through sampled ``(r, value)`` pairs,
* ``well`` -- the square well ``depth`` on ``r < width``. It is not smooth and
  exists for the closed-form checks of the radial and scattering pipelines;
  the volume discretisation refuses it.

Radial derivatives of the analytic shapes are exact; they are computed with
truncated Taylor arithmetic so any order is available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize

from .errors import MalformedInputError

__all__ = [
    "RadialProfile",
    "PotentialField",
    "gaussian",
    "bump",
    "table",
    "square_well",
    "zero_potential",
    "eval_potential",
    "support_ball",
    "with_coupling",
    "load_potential",
]

SHAPES = ("gaussian", "bump", "table", "well")
SMOOTH_SHAPES = ("gaussian", "bump", "table")
TAPER_FRACTION = 0.05


# -- truncated Taylor arithmetic ------------------------------------------
# A series is an array c of shape (K+1, n): f(r + t) = sum_k c[k] t**k.


def _ser_mul(a, b):
    out = np.zeros_like(a)
    for k in range(a.shape[0]):
        out[k] = sum(a[i] * b[k - i] for i in range(k + 1))
    return out


def _ser_exp(a):
    out = np.zeros_like(a)
    out[0] = np.exp(a[0])
    for k in range(1, a.shape[0]):
        out[k] = sum(j * a[j] * out[k - j] for j in range(1, k + 1)) / k
    return out


def _ser_recip(a):
    out = np.zeros_like(a)
    out[0] = 1.0 / a[0]
    for k in range(1, a.shape[0]):
        out[k] = -out[0] * sum(a[j] * out[k - j] for j in range(1, k + 1))
    return out


def _ser_variable(r, order, scale=1.0, shift=0.0):
    """Series of ``(r - shift) / scale``."""
    s = np.zeros((order + 1, r.size))
    s[0] = (r - shift) / scale
    if order >= 1:
        s[1] = 1.0 / scale
    return s


def _to_derivatives(series):
    fact = np.array([math.factorial(k) for k in range(series.shape[0])], dtype=float)
    return series * fact[:, None]


def _smooth_step_series(t):
    """Series of the C-infinity step that is 1 for t <= 0 and 0 for t >= 1."""
    order = t.shape[0] - 1
    out = np.zeros_like(t)
    t0 = t[0]
    out[0][t0 <= 0.0] = 1.0
    mid = (t0 > 0.0) & (t0 < 1.0)
    if np.any(mid):
        tm = t[:, mid]
        one_minus = -tm
        one_minus[0] = 1.0 - tm[0]
        psi_a = _ser_exp(-_ser_recip(one_minus))
        psi_b = _ser_exp(-_ser_recip(tm))
        out[:, mid] = _ser_mul(psi_a, _ser_recip(psi_a + psi_b))
    del order
    return out


# -- profiles ----------------------------------------------------------------


@dataclass(frozen=True)
class RadialProfile:
    """One radially symmetric, compactly supported profile.

    Parameters
    ----------
    shape : {'gaussian', 'bump', 'table', 'well'}
    depth : float
        Value at ``r = 0`` before the coupling is applied (negative for a well).
    width : float
        Gaussian width, or the support radius of a bump or well.
    coupling : float
        Dimensionless multiplier applied on evaluation.
    table_r, table_v : tuple of float
        Samples for ``shape='table'``; ``table_r`` must start at 0, increase
        strictly, and the last value must be 0.
    truncation : float
        Magnitude below which a gaussian is cut off.
    """

    shape: str
    depth: float = 0.0
    width: float = 1.0
    coupling: float = 1.0
    table_r: tuple = ()
    table_v: tuple = ()
    truncation: float = 1e-12

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise MalformedInputError(f"unknown profile shape {self.shape!r}")
        if self.shape != "table" and not self.width > 0:
            raise MalformedInputError("profile width must be positive")
        if self.shape == "table":
            r = np.asarray(self.table_r, dtype=float)
            v = np.asarray(self.table_v, dtype=float)
            if r.ndim != 1 or r.shape != v.shape or r.size < 3:
                raise MalformedInputError("table needs at least 3 matching (r, value) samples")
            if np.any(np.diff(r) <= 0):
                raise MalformedInputError("table radii must be strictly increasing")
            if r[0] != 0.0:
                raise MalformedInputError("table radii must start at r = 0")
            if abs(v[-1]) > 1e-12 * max(1.0, np.abs(v).max()):
                raise MalformedInputError("table must vanish at its last radius")

    @cached_property
    def support_radius(self) -> float:
        if self.shape == "gaussian":
            mag = abs(self.depth)
            if mag <= self.truncation:
                return float(self.width)
            return float(self.width * math.sqrt(math.log(mag / self.truncation)))
        if self.shape in ("bump", "well"):
            return float(self.width)
        return float(self.table_r[-1])

    @cached_property
    def _spline(self):
        r = np.asarray(self.table_r, dtype=float)
        v = np.asarray(self.table_v, dtype=float)
        return CubicSpline(r, v, bc_type=((1, 0.0), (1, 0.0)))

    def derivatives(self, r, order=0):
        """Radial derivatives ``d^k q/dr^k`` for ``k = 0..order``.

        Returns an array of shape ``(order + 1,) + r.shape``; the coupling is
        included. Values beyond the support radius are exactly zero.
        """
        r = np.asarray(r, dtype=float)
        shape = r.shape
        rr = np.abs(r.ravel())
        out = np.zeros((order + 1, rr.size))
        inside = rr < self.support_radius
        scale = self.coupling * self.depth
        if np.any(inside) and scale != 0.0:
            ri = rr[inside]
            if self.shape == "table":
                out[:, inside] = self.coupling * np.stack(
                    [self._spline(ri, nu) if nu <= 3 else np.zeros_like(ri) for nu in range(order + 1)]
                )
            elif self.shape == "gaussian":
                x = _ser_variable(ri, order, scale=self.width)
                ser = _ser_exp(-_ser_mul(x, x))
                R = self.support_radius
                r_in = (1.0 - TAPER_FRACTION) * R
                if np.any(ri > r_in):
                    step = _smooth_step_series(_ser_variable(ri, order, scale=R - r_in, shift=r_in))
                    ser = _ser_mul(ser, step)
                out[:, inside] = scale * _to_derivatives(ser)
            elif self.shape == "well":
                out[0, inside] = scale
            else:
                x = _ser_variable(ri, order, scale=self.width)
                one_minus = -_ser_mul(x, x)
                one_minus[0] += 1.0
                g = -_ser_recip(one_minus)
                g[0] += 1.0
                out[:, inside] = scale * _to_derivatives(_ser_exp(g))
        # odd derivatives flip sign for negative r (profiles are even)
        sign = np.where(r.ravel() < 0, -1.0, 1.0)
        for k in range(1, order + 1, 2):
            out[k] *= sign
        return out.reshape((order + 1,) + shape)

    def __call__(self, r):
        return self.derivatives(r, 0)[0]

    def scaled(self, alpha) -> "RadialProfile":
        return replace(self, coupling=self.coupling * alpha)

    def describe(self) -> dict:
        d = {"shape": self.shape, "depth": self.depth, "width": self.width,
             "coupling": self.coupling, "support_radius": self.support_radius}
        if self.shape == "gaussian":
            d["truncation"] = self.truncation
        if self.shape == "table":
            d["samples"] = len(self.table_r)
        return d


@dataclass(frozen=True)
class PotentialField:
    """Sum of shifted radial profiles, ``q(x) = sum_i q_i(|x - c_i|)``."""

    components: tuple = field(default_factory=tuple)

    def __post_init__(self):
        comps = []
        for prof, center in self.components:
            c = tuple(float(v) for v in center)
            if len(c) != 3:
                raise MalformedInputError("component centers must be 3-vectors")
            comps.append((prof, c))
        object.__setattr__(self, "components", tuple(comps))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for prof, c in self.components:
            out += prof(np.linalg.norm(x - np.asarray(c), axis=-1))
        return out

    @property
    def is_radial(self) -> bool:
        return len(self.components) == 1 and not any(self.components[0][1])

    @property
    def profile(self) -> RadialProfile:
        """The single profile of a radially symmetric field."""
        if not self.is_radial:
            raise MalformedInputError("potential is not radially symmetric about the origin")
        return self.components[0][0]

    @property
    def support_radius(self) -> float:
        return support_ball(self)[1]

    @property
    def is_smooth(self) -> bool:
        return all(prof.shape in SMOOTH_SHAPES for prof, _ in self.components)

    def radial_derivatives(self, r, order=0):
        return self.profile.derivatives(r, order)

    def with_coupling(self, alpha) -> "PotentialField":
        return with_coupling(self, alpha)

    def describe(self) -> dict:
        center, radius = support_ball(self)
        return {
            "components": [dict(p.describe(), center=list(c)) for p, c in self.components],
            "support_center": [float(v) for v in center],
            "support_radius": float(radius),
            "radial": self.is_radial,
        }


def gaussian(depth, width=1.0, center=(0.0, 0.0, 0.0), coupling=1.0, truncation=1e-12):
    prof = RadialProfile("gaussian", depth=float(depth), width=float(width),
                         coupling=float(coupling), truncation=float(truncation))
    return PotentialField(((prof, center),))


def bump(depth, radius=1.0, center=(0.0, 0.0, 0.0), coupling=1.0):
    prof = RadialProfile("bump", depth=float(depth), width=float(radius), coupling=float(coupling))
    return PotentialField(((prof, center),))


def table(r, values, center=(0.0, 0.0, 0.0), coupling=1.0):
    prof = RadialProfile("table", depth=1.0, coupling=float(coupling),
                         table_r=tuple(float(v) for v in r),
                         table_v=tuple(float(v) for v in values))
    return PotentialField(((prof, center),))


def square_well(depth, radius=1.0, coupling=1.0):
    """Square well of ``depth`` on ``r < radius`` (radial pipelines only)."""
    prof = RadialProfile("well", depth=float(depth), width=float(radius), coupling=float(coupling))
    return PotentialField(((prof, (0.0, 0.0, 0.0)),))


def zero_potential(radius=1.0):
    """The free case ``q = 0`` with a nominal support ball of ``radius``."""
    return bump(0.0, radius)


def eval_potential(p: PotentialField, x):
    """Evaluate ``q`` at one point or an array of points (last axis = 3)."""
    return p(x)


def support_ball(p: PotentialField):
    """Smallest ball containing the support balls of all components."""
    if not p.components:
        raise MalformedInputError("potential has no components")
    centers = np.array([c for _, c in p.components], dtype=float)
    radii = np.array([prof.support_radius for prof, _ in p.components])
    if len(radii) == 1:
        return centers[0], float(radii[0])
    dist = np.linalg.norm(centers[:, None] - centers[None], axis=-1) + radii[:, None] + radii[None]
    i, j = np.unravel_index(np.argmax(dist), dist.shape)
    # enclosing ball of the farthest pair
    d = np.linalg.norm(centers[j] - centers[i])
    R = 0.5 * (d + radii[i] + radii[j])
    if d > 0:
        c = centers[i] + (R - radii[i]) * (centers[j] - centers[i]) / d
    else:
        c = centers[i]
    R = max(R, float(np.max(radii)))
    if np.all(np.linalg.norm(centers - c, axis=1) + radii <= R * (1 + 1e-12)):
        return c, float(R)

    def excess(z):
        return np.max(np.linalg.norm(centers - z[:3], axis=1) + radii - z[3])

    cons = [{"type": "ineq", "fun": lambda z, k=k: z[3] - np.linalg.norm(centers[k] - z[:3]) - radii[k]}
            for k in range(len(radii))]
    res = minimize(lambda z: z[3], np.r_[c, R + abs(excess(np.r_[c, R]))], constraints=cons,
                   method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
    z = res.x
    z[3] += max(0.0, excess(z))
    return z[:3], float(z[3])


def with_coupling(p: PotentialField, alpha) -> PotentialField:
    """Return a copy of ``p`` with every component coupling multiplied by ``alpha``."""
    if alpha < 0:
        raise MalformedInputError("coupling must be nonnegative")
    return PotentialField(tuple((prof.scaled(float(alpha)), c) for prof, c in p.components))


# -- file ingestion -----------------------------------------------------------


def _parse_center(text):
    parts = [s for s in text.replace(",", " ").split() if s]
    if len(parts) != 3:
        raise MalformedInputError(f"center needs three coordinates, got {text!r}")
    return tuple(float(s) for s in parts)


def read_table_csv(path):
    """Read a two-column ``r, value`` CSV (``#`` comments and a header allowed)."""
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [s for s in line.replace(",", " ").split() if s]
        try:
            vals = [float(s) for s in parts]
        except ValueError:
            if rows:
                raise MalformedInputError(f"non-numeric row in {path}: {line!r}")
            continue  # header
        if len(vals) != 2:
            raise MalformedInputError(f"table rows need two columns: {line!r}")
        rows.append(vals)
    if not rows:
        raise MalformedInputError(f"no samples in {path}")
    arr = np.array(rows)
    return arr[:, 0], arr[:, 1]


def component_from_mapping(entries: dict, base_dir=None):
    """Build ``(profile, center)`` from parsed ``key=value`` entries."""
    known = {"shape", "depth", "width", "radius", "center", "coupling", "table", "truncation"}
    unknown = set(entries) - known
    if unknown:
        raise MalformedInputError(f"unknown potential keys: {sorted(unknown)}")
    if "shape" not in entries:
        raise MalformedInputError("potential block lacks 'shape'")
    shape = entries["shape"].strip().lower()
    center = _parse_center(entries.get("center", "0 0 0"))
    try:
        coupling = float(entries.get("coupling", 1.0))
        if shape == "table":
            if "table" not in entries:
                raise MalformedInputError("table profile needs 'table = <csv path>'")
            path = Path(entries["table"].strip())
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            r, v = read_table_csv(path)
            prof = table(r, v, coupling=coupling).components[0][0]
        else:
            width = float(entries.get("width", entries.get("radius", 1.0)))
            prof = RadialProfile(shape, depth=float(entries.get("depth", 0.0)), width=width,
                                 coupling=coupling, truncation=float(entries.get("truncation", 1e-12)))
    except ValueError as exc:
        if isinstance(exc, MalformedInputError):
            raise
        raise MalformedInputError(str(exc)) from exc
    return prof, center


def parse_blocks(text):
    """Split ``key = value`` text into blocks separated by ``[component]`` lines."""
    blocks, current = [], {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.lower() == "[component]":
            if current:
                blocks.append(current)
            current = {}
            continue
        if "=" not in line:
            raise MalformedInputError(f"expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        current[key.lower()] = value
    if current:
        blocks.append(current)
    return blocks


def load_potential(path) -> PotentialField:
    """Load a potential from a ``key=value`` file or a two-column table CSV."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        r, v = read_table_csv(path)
        return table(r, v)
    blocks = parse_blocks(path.read_text())
    if not blocks:
        raise MalformedInputError(f"no potential definition in {path}")
    return PotentialField(tuple(component_from_mapping(b, path.parent) for b in blocks))

"""
q-harmonic bases, jet matrices and s-point scans.

A q-harmonic polynomial solves ``(-Δ + q) p = 0`` and grows like a harmonic
polynomial ``p_l`` of degree ``l``; it is the solution of the
Lippmann-Schwinger equation with incident term ``p_l``. Collecting the
derivatives ``D^j p`` (``|j| <= k``) of a basis of these at a point ``a`` gives
the jet matrix. For a point of order ``m`` the jet matrix of the degree
``2m - 2`` basis at order ``k = 2m - 2`` loses rank; order one is detected
through a sign change of the distorted plane wave ``Φ`` instead.

Derivatives are second-order central finite differences of the Nyström
interpolant (:func:`spoints.lse.evaluate_fields`) with step ``h_fd = h/2``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConventionViolatedError, MalformedInputError
from .harmonics import HarmonicBasis, multi_indices, solid_harmonics
from .lse import FieldSolution, KernelOperator, check_convention, evaluate_fields, solve_fields

__all__ = [
    "QHarmonicBasis",
    "JetMatrix",
    "ScanReport",
    "jet_dimension",
    "q_harmonic_basis",
    "jet_matrix",
    "jet_matrices",
    "numerical_rank",
    "scan_spoints",
    "refine_phi_zero",
    "persistent_candidates",
    "DEFAULT_TAU_REL",
]

DEFAULT_TAU_REL = 1e-3
DOMAIN_FACTOR = 4.0   # stencils must stay within this many grid radii of the center
SCHEMA = "spoints.scan/1"

# second-order central difference weights on offsets -2..2, indexed by order
_STENCILS = {
    0: {0: 1.0},
    1: {-1: -0.5, 1: 0.5},
    2: {-1: 1.0, 0: -2.0, 1: 1.0},
    3: {-2: -0.5, -1: 1.0, 1: -1.0, 2: 0.5},
    4: {-2: 1.0, -1: -4.0, 0: 6.0, 1: -4.0, 2: 1.0},
}


def jet_dimension(k: int) -> int:
    """Number of derivatives of order at most ``k`` in three variables."""
    return (k + 1) * (k + 2) * (k + 3) // 6


@dataclass(frozen=True, eq=False)
class QHarmonicBasis:
    """Solutions with the solid harmonics of degree ``<= L`` as incident terms."""

    degree: int
    harmonics: HarmonicBasis
    members: tuple

    def __len__(self):
        return len(self.members)

    @property
    def kernel(self) -> KernelOperator:
        return self.members[0].kernel

    def __call__(self, x):
        """Values of all members at ``x``; shape ``(M, len(self))``."""
        return evaluate_fields(list(self.members), x)


def q_harmonic_basis(K: KernelOperator, L: int) -> QHarmonicBasis:
    """One Lippmann-Schwinger solve per solid harmonic of degree ``<= L``."""
    harmonics = solid_harmonics(L)
    members = solve_fields(K, list(harmonics.members))
    return QHarmonicBasis(L, harmonics, tuple(members))


# -- jets ---------------------------------------------------------------------


def _stencil(k):
    """Offsets (P, 3) and weights (P, d^k) for all derivatives of order <= k."""
    idx = multi_indices(k)
    table = {}
    for col, j in enumerate(idx):
        for ox, wx in _STENCILS[j[0]].items():
            for oy, wy in _STENCILS[j[1]].items():
                for oz, wz in _STENCILS[j[2]].items():
                    table.setdefault((ox, oy, oz), np.zeros(len(idx)))[col] += wx * wy * wz
    offsets = sorted(table)
    return np.array(offsets, dtype=float), np.array([table[o] for o in offsets]), idx


def _check_domain(K, pts):
    g = K.grid
    if np.any(np.linalg.norm(pts - g.center, axis=-1) > DOMAIN_FACTOR * g.radius):
        raise MalformedInputError("finite-difference stencil leaves the computational domain")


def _raw_jets(members, points, k, h_fd, chunk=4096):
    offsets, weights, idx = _stencil(k)
    orders = np.array([sum(j) for j in idx])
    points = np.atleast_2d(np.asarray(points, dtype=float))
    _check_domain(members[0].kernel, points[:, None, :] + 2 * h_fd)
    _check_domain(members[0].kernel, points[:, None, :] - 2 * h_fd)
    out = np.empty((len(points), len(members), len(idx)))
    step = max(1, chunk // len(offsets))
    for s in range(0, len(points), step):
        p = points[s:s + step]
        x = (p[:, None, :] + h_fd * offsets[None]).reshape(-1, 3)
        v = evaluate_fields(list(members), x).reshape(len(p), len(offsets), len(members))
        out[s:s + step] = np.einsum("pom,od->pmd", v, weights) / h_fd**orders
    return out


def _derivative_jets(members, points, k, h_fd, richardson):
    d = _raw_jets(members, points, k, h_fd)
    if richardson:
        d = (4.0 * _raw_jets(members, points, k, h_fd / 2) - d) / 3.0
    return d


def _column_scale(k, length):
    # Taylor-coefficient normalisation D^j u · ℓ^|j| / j!
    return np.array([length ** sum(j) / math.prod(math.factorial(t) for t in j)
                     for j in multi_indices(k)])


def _row_normalised_sv(mats):
    norms = np.linalg.norm(mats, axis=-1, keepdims=True)
    return np.linalg.svd(mats / np.where(norms > 0, norms, 1.0), compute_uv=False)


@dataclass(frozen=True, eq=False)
class JetMatrix:
    """Jets of basis members at ``a``.

    ``matrix[i, c]`` is the derivative ``D^j`` (``j = indices[c]``) of member
    ``i``, scaled by ``ℓ^|j| / j!``. Singular values are those of the
    row-normalised matrix, so the numerical rank ignores row scaling.
    """

    a: np.ndarray
    order: int
    matrix: np.ndarray
    singular_values: np.ndarray
    indices: tuple
    h_fd: float
    length: float

    @property
    def shape(self):
        return self.matrix.shape


def jet_matrices(basis: QHarmonicBasis, points, k: int, h_fd=None, richardson=False,
                 length=1.0):
    """Scaled jets at many points; returns ``(mats, singular_values)``."""
    h_fd = 0.5 * basis.kernel.grid.h if h_fd is None else float(h_fd)
    mats = _derivative_jets(basis.members, points, k, h_fd, richardson) * _column_scale(k, length)
    return mats, _row_normalised_sv(mats)


def jet_matrix(basis: QHarmonicBasis, a, k: int, h_fd=None, richardson=False,
               length=1.0) -> JetMatrix:
    """Jet matrix of ``basis`` at the point ``a`` up to derivative order ``k``.

    Parameters
    ----------
    basis : QHarmonicBasis
    a : array_like, shape (3,)
    k : int
        Highest derivative order, at most 4.
    h_fd : float, optional
        Finite-difference step; default half the grid spacing.
    richardson : bool
        Combine steps ``h_fd`` and ``h_fd/2`` to cancel the leading error.
    length : float
        Length scale ``ℓ`` used to make the columns dimensionless.
    """
    if not 0 <= k <= 4:
        raise MalformedInputError("jet order must be between 0 and 4")
    a = np.asarray(a, dtype=float)
    h = 0.5 * basis.kernel.grid.h if h_fd is None else float(h_fd)
    mats, sv = jet_matrices(basis, a[None], k, h, richardson, length)
    return JetMatrix(a, k, mats[0], sv[0], tuple(multi_indices(k)), h, length)


def numerical_rank(J, tau_rel=DEFAULT_TAU_REL):
    """Number of singular values above ``tau_rel · σ_1``.

    Returns ``(rank, singular_values)``. ``J`` may be a :class:`JetMatrix` or
    a plain array (its rows are normalised first).

    Examples
    --------
    >>> numerical_rank(np.diag([1.0, 1.0, 0.0]))[0]
    2
    """
    if isinstance(J, JetMatrix):
        sv = J.singular_values
    else:
        sv = _row_normalised_sv(np.asarray(J, dtype=float))
    if sv.size == 0 or sv[0] == 0:
        return 0, sv
    return int(np.sum(sv > tau_rel * sv[0])), sv


# -- Φ-zero refinement --------------------------------------------------------


def _phi_solution(K_or_phi):
    if isinstance(K_or_phi, FieldSolution):
        return K_or_phi
    return solve_fields(K_or_phi, [1.0])[0]


def _bisect(phi, a, b, max_iter=40, rel_tol=1e-6):
    """Vectorised bisection of Φ along segments ``a[i] -> b[i]``."""
    fa = evaluate_fields([phi], a)[:, 0]
    fb = evaluate_fields([phi], b)[:, 0]
    if np.any(fa * fb > 0):
        raise MalformedInputError("Φ has the same sign at both ends of a segment")
    target = rel_tol * np.maximum(np.abs(fa), np.abs(fb))
    lo, hi = a.copy(), b.copy()
    done = (np.abs(fa) <= target) | (np.abs(fb) <= target)
    mid = np.where((np.abs(fa) <= np.abs(fb))[:, None], a, b)
    for _ in range(max_iter):
        act = ~done
        if not np.any(act):
            break
        m = 0.5 * (lo[act] + hi[act])
        fm = evaluate_fields([phi], m)[:, 0]
        mid[act] = m
        hit = np.abs(fm) <= target[act]
        left = fa[act] * fm <= 0
        nlo, nhi, nfa = lo[act], hi[act], fa[act]
        nhi[left] = m[left]
        nlo[~left] = m[~left]
        nfa[~left] = fm[~left]
        lo[act], hi[act], fa[act] = nlo, nhi, nfa
        idx = np.nonzero(act)[0]
        done[idx[hit]] = True
    mid[~done] = 0.5 * (lo[~done] + hi[~done])
    return mid, done


def refine_phi_zero(K, segment, max_iter=40):
    """Bisect ``Φ`` on a segment with a sign change.

    ``K`` is a :class:`KernelOperator` or an already solved ``Φ``. Stops when
    ``|Φ| <= 1e-6 · max|Φ(ends)|`` or after ``max_iter`` halvings.
    """
    phi = _phi_solution(K)
    a, b = (np.asarray(s, dtype=float)[None] for s in segment)
    mid, _ = _bisect(phi, a, b, max_iter)
    return mid[0]


# -- scans --------------------------------------------------------------------


@dataclass(eq=False)
class ScanReport:
    """Per-point diagnostic on a scan lattice and the detected candidates."""

    box: tuple
    resolution: int
    order: int
    points: np.ndarray
    diagnostic: np.ndarray
    candidates: list
    tau_rel: float
    radial: bool
    center: tuple
    h_fd: float = 0.0
    conditional: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def cell(self):
        lo, hi = np.asarray(self.box[0]), np.asarray(self.box[1])
        return float(np.max((hi - lo) / (self.resolution - 1)))

    def candidate_points(self):
        return np.array([c["point"] for c in self.candidates]).reshape(-1, 3)

    def candidate_radii(self):
        pts = self.candidate_points()
        return np.linalg.norm(pts - np.asarray(self.center), axis=1)

    def sphere_radii(self, gap=2.0):
        """Cluster candidate radii into shells separated by more than ``gap`` cells."""
        r = np.sort(self.candidate_radii())
        if len(r) == 0:
            return []
        groups = np.split(r, np.nonzero(np.diff(r) > gap * self.cell)[0] + 1)
        return [float(np.median(g)) for g in groups]

    def as_dict(self):
        return {
            "schema": SCHEMA,
            "box": [list(map(float, self.box[0])), list(map(float, self.box[1]))],
            "resolution": self.resolution,
            "order": self.order,
            "diagnostic": "Phi" if self.order == 1 else f"sigma_{(2 * self.order - 1) ** 2}/sigma_1",
            "tau_rel": self.tau_rel,
            "h_fd": self.h_fd,
            "conditional": self.conditional,
            "radial_oracle": "available" if self.radial else "no oracle",
            "n_candidates": len(self.candidates),
            "sphere_radii": self.sphere_radii() if self.radial else None,
            "candidates": [{k: (list(map(float, v)) if k == "point" else v) for k, v in c.items()}
                           for c in self.candidates],
            **self.meta,
        }

    def to_json(self, path=None):
        text = json.dumps(self.as_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def to_csv(self, path):
        """Whitespace-separated ``x y z diagnostic`` rows with a ``#`` header."""
        with open(path, "w", newline="") as fh:
            fh.write(f"# order={self.order} resolution={self.resolution}\n# x y z diagnostic\n")
            w = csv.writer(fh, delimiter=" ", lineterminator="\n")
            for p, d in zip(self.points, self.diagnostic):
                w.writerow([f"{p[0]:.8g}", f"{p[1]:.8g}", f"{p[2]:.8g}", f"{d:.10g}"])


def _scan_lattice(box, resolution):
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    axes = [np.linspace(lo[i], hi[i], resolution) for i in range(3)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)


def _phi_candidates(phi, pts, res, values):
    grid = values.reshape(res, res, res)
    P = pts.reshape(res, res, res, 3)
    a_list, b_list = [], []
    for axis in range(3):
        sl_a = [slice(None)] * 3
        sl_b = [slice(None)] * 3
        sl_a[axis] = slice(0, -1)
        sl_b[axis] = slice(1, None)
        fa, fb = grid[tuple(sl_a)], grid[tuple(sl_b)]
        mask = fa * fb < 0
        a_list.append(P[tuple(sl_a)][mask])
        b_list.append(P[tuple(sl_b)][mask])
    a = np.concatenate(a_list)
    b = np.concatenate(b_list)
    if len(a) == 0:
        return []
    mid, done = _bisect(phi, a, b)
    return [{"point": m, "refined": bool(d)} for m, d in zip(mid, done)]


def _golden(fun, a, b, iters=18):
    """Vectorised golden-section minimisation of ``fun`` on segments ``a -> b``."""
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    lo, hi = np.zeros(len(a)), np.ones(len(a))
    at = lambda t: a + t[:, None] * (b - a)
    c, d = hi - gr * (hi - lo), lo + gr * (hi - lo)
    fc, fd = fun(at(c)), fun(at(d))
    for _ in range(iters):
        left = fc < fd
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        new_c = hi - gr * (hi - lo)
        new_d = lo + gr * (hi - lo)
        # one of the two interior points is reused; evaluate the other
        t_new = np.where(left, new_c, new_d)
        f_new = fun(at(t_new))
        fd, fc = np.where(left, fc, f_new), np.where(left, f_new, fd)
        c, d = np.where(left, new_c, d), np.where(left, c, new_d)
    t = np.where(fc < fd, c, d)
    return at(t), np.minimum(fc, fd)


def _line_minima(values, res, screen):
    """Lattice index triples ``(prev, i, next)`` of local minima along lattice lines."""
    idx = np.arange(res**3).reshape(res, res, res)
    v = values.reshape(res, res, res)
    out = []
    for axis in range(3):
        sl = lambda a, b: tuple(slice(a, b) if k == axis else slice(None) for k in range(3))
        mid, prev, nxt = v[sl(1, -1)], v[sl(0, -2)], v[sl(2, None)]
        mask = (mid <= prev) & (mid <= nxt) & (mid < screen)
        out.append(np.stack([idx[sl(0, -2)][mask], idx[sl(1, -1)][mask], idx[sl(2, None)][mask]], 1))
    return np.concatenate(out) if out else np.empty((0, 3), dtype=int)


def scan_spoints(K: KernelOperator, m: int, box=None, resolution: int = 32,
                 tau_rel=DEFAULT_TAU_REL, h_fd=None, richardson=False, length=1.0,
                 basis=None, screen=0.1) -> ScanReport:
    """Scan a box for s-points of order ``m``.

    ``m = 1``: the diagnostic is ``Φ``; every lattice edge with a sign change
    is bisected to a candidate point. ``m >= 2``: the diagnostic is
    ``σ_((2m-1)²) / σ_1`` of the jet matrix of the degree ``2m - 2`` basis at
    order ``2m - 2``. The ratio vanishes only on the s-point set, which a
    lattice point rarely hits, so every local minimum along a lattice line
    that is below ``screen`` is refined by golden-section search between its
    two neighbours; the refined point is a candidate when its ratio is below
    ``tau_rel``. Results for ``m = 3`` are flagged ``conditional``.

    Parameters
    ----------
    K : KernelOperator
    m : int
        Order, 1 to 3.
    box : pair of points, optional
        Opposite corners; default is the bounding cube of the grid ball.
    resolution : int
        Lattice points per axis.
    """
    if not 1 <= m <= 3:
        raise MalformedInputError("scan order m must be 1, 2 or 3")
    if resolution < 2:
        raise MalformedInputError("scan resolution must be at least 2")
    cc = check_convention(K)
    if not cc.ok:
        raise ConventionViolatedError(f"I + K is numerically singular (sigma_min = {cc.sigma_min:.3e})", cc)
    g = K.grid
    if box is None:
        box = (g.center - g.radius, g.center + g.radius)
    box = (tuple(float(v) for v in box[0]), tuple(float(v) for v in box[1]))
    pts = _scan_lattice(box, resolution)
    radial = K.potential.is_radial
    center = tuple(float(v) for v in g.center) if not radial else (0.0, 0.0, 0.0)
    if m == 1:
        phi = basis.members[0] if basis is not None else solve_fields(K, [1.0])[0]
        values = evaluate_fields([phi], pts)[:, 0]
        cands = _phi_candidates(phi, pts, resolution, values)
        return ScanReport(box, resolution, 1, pts, values, cands, tau_rel, radial, center)
    L = 2 * m - 2
    if basis is None or basis.degree != L:
        basis = q_harmonic_basis(K, L)
    h = 0.5 * g.h if h_fd is None else float(h_fd)
    col = (2 * m - 1) ** 2 - 1

    def ratio_at(x):
        _, sv = jet_matrices(basis, x, L, h, richardson, length)
        return sv[:, col] / sv[:, 0]

    ratio = ratio_at(pts)
    trip = _line_minima(ratio, resolution, max(screen, tau_rel))
    cands = []
    if len(trip):
        xs, rs = _golden(ratio_at, pts[trip[:, 0]], pts[trip[:, 2]])
        cands = [{"point": x, "ratio": float(r), "refined": True}
                 for x, r in zip(xs, rs) if r < tau_rel]
    return ScanReport(box, resolution, m, pts, ratio, cands, tau_rel, radial, center,
                      h_fd=h, conditional=(m >= 3))


def persistent_candidates(coarse: ScanReport, fine: ScanReport, cells: float = 2.0):
    """Candidates of ``coarse`` with a ``fine`` candidate within ``cells`` scan cells."""
    a, b = coarse.candidate_points(), fine.candidate_points()
    if len(a) == 0 or len(b) == 0:
        return []
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1).min(axis=1)
    tol = cells * max(coarse.cell, fine.cell)
    return [c for c, dist in zip(coarse.candidates, d) if dist <= tol]

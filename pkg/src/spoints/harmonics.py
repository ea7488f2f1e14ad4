"""
Harmonic polynomials with exact rational coefficients.

Degrees 0-2 use the classical basis
``1; y1, y2, y3; y1 y2, y2 y3, y1 y3, y1²-y2², y1²+y2²-2 y3²``.
Higher degrees use the harmonic extension of the monomials
``y1^a y2^b y3^c`` with ``c <= 1``: the unique harmonic polynomial whose part
of degree <= 1 in ``y3`` is that monomial.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = ["Polynomial", "HarmonicBasis", "solid_harmonics", "multi_indices"]


def multi_indices(k):
    """All 3-index derivative orders with total order <= k, degree-graded."""
    out = []
    for total in range(k + 1):
        for a in range(total, -1, -1):
            for b in range(total - a, -1, -1):
                out.append((a, b, total - a - b))
    return out


@dataclass(frozen=True)
class Polynomial:
    """Polynomial in three variables stored as ``{(a, b, c): coefficient}``."""

    coeffs: tuple  # sorted ((a, b, c), Fraction) pairs, zeros dropped

    @classmethod
    def from_dict(cls, d):
        items = sorted((tuple(k), Fraction(v)) for k, v in d.items() if v != 0)
        return cls(tuple(items))

    @classmethod
    def constant(cls, value=1):
        return cls.from_dict({(0, 0, 0): value})

    def as_dict(self):
        return dict(self.coeffs)

    @property
    def degree(self):
        return max((sum(k) for k, _ in self.coeffs), default=0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for (a, b, c), v in self.coeffs:
            out += float(v) * x[..., 0] ** a * x[..., 1] ** b * x[..., 2] ** c
        return out

    def derivative(self, index):
        d = {}
        for (a, b, c), v in self.coeffs:
            e = (a, b, c)
            coef = Fraction(v)
            ok = True
            new = list(e)
            for axis, order in enumerate(index):
                for _ in range(order):
                    if new[axis] == 0:
                        ok = False
                        break
                    coef *= new[axis]
                    new[axis] -= 1
                if not ok:
                    break
            if ok:
                d[tuple(new)] = d.get(tuple(new), 0) + coef
        return Polynomial.from_dict(d)

    def laplacian(self):
        d = {}
        for axis in range(3):
            idx = [0, 0, 0]
            idx[axis] = 2
            for k, v in self.derivative(tuple(idx)).coeffs:
                d[k] = d.get(k, 0) + v
        return Polynomial.from_dict(d)

    def __add__(self, other):
        d = self.as_dict()
        for k, v in other.coeffs:
            d[k] = d.get(k, 0) + v
        return Polynomial.from_dict(d)

    def scale(self, s):
        return Polynomial.from_dict({k: v * Fraction(s) for k, v in self.coeffs})

    def __str__(self):
        if not self.coeffs:
            return "0"
        terms = []
        for (a, b, c), v in self.coeffs:
            mono = "*".join(f"y{i + 1}" + (f"^{e}" if e > 1 else "") for i, e in enumerate((a, b, c)) if e)
            terms.append(f"{v}" + (f"*{mono}" if mono else "") if v != 1 or not mono else mono)
        return " + ".join(terms)


_CLASSICAL = [
    [{(0, 0, 0): 1}],
    [{(1, 0, 0): 1}, {(0, 1, 0): 1}, {(0, 0, 1): 1}],
    [{(1, 1, 0): 1}, {(0, 1, 1): 1}, {(1, 0, 1): 1},
     {(2, 0, 0): 1, (0, 2, 0): -1},
     {(2, 0, 0): 1, (0, 2, 0): 1, (0, 0, 2): -2}],
]


def _harmonic_extension(a, b, c):
    # p = Σ_k z^(2k+c) g_k(x, y), g_{k+1} = -Δ_xy g_k / ((2k+c+2)(2k+c+1))
    g = Polynomial.from_dict({(a, b, 0): 1})
    total = {}
    k = 0
    while g.coeffs:
        for (i, j, _), v in g.coeffs:
            key = (i, j, 2 * k + c)
            total[key] = total.get(key, 0) + v
        lap = g.derivative((2, 0, 0)) + g.derivative((0, 2, 0))
        g = lap.scale(Fraction(-1, (2 * k + c + 2) * (2 * k + c + 1)))
        k += 1
    return Polynomial.from_dict(total)


def _degree_members(l):
    if l < len(_CLASSICAL):
        return [Polynomial.from_dict(d) for d in _CLASSICAL[l]]
    out = []
    for c in (0, 1):
        for a in range(l - c, -1, -1):
            out.append(_harmonic_extension(a, l - c - a, c))
    return out


@dataclass(frozen=True)
class HarmonicBasis:
    degree: int
    members: tuple

    def __len__(self):
        return len(self.members)

    def degrees(self):
        return [m.degree for m in self.members]


def solid_harmonics(L: int) -> HarmonicBasis:
    """Degree-graded basis of the ``(L+1)²`` harmonic polynomials of degree <= L."""
    if not 0 <= L <= 6:
        raise ValueError("degree must satisfy 0 <= L <= 6")
    members = []
    for l in range(L + 1):
        members.extend(_degree_members(l))
    return HarmonicBasis(L, tuple(members))

"""Sparse multivariate polynomials over the entries of a matrix variable.

Polynomials are immutable maps ``exponent tuple -> coefficient``.  Two
coefficient backends are supported and never mixed implicitly:

* exact (``fractions.Fraction``), used for identity verification;
* float, used to feed semidefinite programs.

Matrix entries are enumerated column-major, so for a 2x2 matrix the flat
variables ``x1, x2, x3, x4`` are ``X11, X21, X12, X22``.  Monomials are ordered
graded-lexicographically: by total degree, then with ``x1`` dominating ``x2``
and so on (``1, x1, x2, ..., x1^2, x1*x2, ...``).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Iterable, Mapping, Sequence

import numpy as np

Exponent = tuple[int, ...]


@dataclass(frozen=True)
class VarSpace:
    """Variables of an ``m x n`` matrix plus ``extra`` auxiliary scalars."""

    m: int
    n: int
    extra: int = 0

    def __post_init__(self):
        if self.m < 1 or self.n < 1 or self.extra < 0:
            raise ValueError(f"invalid variable space {self}")

    @property
    def total(self) -> int:
        return self.m * self.n + self.extra

    def entry(self, i: int, j: int) -> int:
        """Flat index of the 0-based matrix entry ``(i, j)``."""
        if not (0 <= i < self.m and 0 <= j < self.n):
            raise IndexError(f"entry ({i}, {j}) outside a {self.m}x{self.n} matrix")
        return j * self.m + i

    def doubled(self) -> VarSpace:
        """Space holding two copies of every variable: ``(x, y)``."""
        return VarSpace(self.m, self.n, self.extra + self.total)

    def zero_exponent(self) -> Exponent:
        return (0,) * self.total


def exponent_key(a: Exponent):
    """Sort key realising the graded-lex order used everywhere."""
    return (sum(a), tuple(-e for e in a))


@lru_cache(maxsize=None)
def _basis(total: int, d: int) -> tuple[Exponent, ...]:
    out = []
    for deg in range(d + 1):
        for combo in itertools.combinations_with_replacement(range(total), deg):
            a = [0] * total
            for i in combo:
                a[i] += 1
            out.append(tuple(a))
    return tuple(out)


def monomial_basis(space: VarSpace | int, d: int) -> list[Exponent]:
    """All exponents of degree <= d in graded-lex order.

    The length is ``binomial(total + d, d)``.
    """
    if d < 0:
        raise ValueError("degree must be nonnegative")
    total = space if isinstance(space, int) else space.total
    return list(_basis(total, d))


def _to_exact(c) -> Fraction:
    if isinstance(c, bool):
        raise TypeError("bool is not a coefficient")
    if isinstance(c, (int, Fraction)) or isinstance(c, Rational):
        return Fraction(c)
    raise TypeError(f"backend mismatch: {type(c).__name__} coefficient in exact polynomial")


def _to_float(c) -> float:
    if isinstance(c, bool):
        raise TypeError("bool is not a coefficient")
    if isinstance(c, (int, float, np.integer, np.floating)):
        return float(c)
    raise TypeError(f"backend mismatch: {type(c).__name__} coefficient in float polynomial")


class Polynomial:
    """Immutable sparse polynomial over a :class:`VarSpace`."""

    __slots__ = ("space", "terms", "exact")

    def __init__(self, space: VarSpace, terms: Mapping[Exponent, object] | None = None,
                 exact: bool = True):
        conv = _to_exact if exact else _to_float
        clean = {}
        for a, c in (terms or {}).items():
            a = tuple(int(e) for e in a)
            if len(a) != space.total:
                raise ValueError(f"exponent {a} has length {len(a)}, expected {space.total}")
            if any(e < 0 for e in a):
                raise ValueError(f"negative exponent in {a}")
            c = conv(c)
            if c != 0:
                clean[a] = c
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "terms", clean)
        object.__setattr__(self, "exact", exact)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    @classmethod
    def _raw(cls, space, terms, exact):
        # terms already cleaned and converted
        obj = object.__new__(cls)
        object.__setattr__(obj, "space", space)
        object.__setattr__(obj, "terms", terms)
        object.__setattr__(obj, "exact", exact)
        return obj

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, space: VarSpace, c=1, exact: bool = True) -> Polynomial:
        return cls(space, {space.zero_exponent(): c}, exact)

    @classmethod
    def zero(cls, space: VarSpace, exact: bool = True) -> Polynomial:
        return cls._raw(space, {}, exact)

    @classmethod
    def variable(cls, space: VarSpace, index: int, exact: bool = True) -> Polynomial:
        if not 0 <= index < space.total:
            raise IndexError(f"variable {index} outside space of {space.total} variables")
        a = [0] * space.total
        a[index] = 1
        return cls(space, {tuple(a): 1}, exact)

    @classmethod
    def entry(cls, space: VarSpace, i: int, j: int, exact: bool = True) -> Polynomial:
        return cls.variable(space, space.entry(i, j), exact)

    @classmethod
    def matrix(cls, space: VarSpace, exact: bool = True, offset: int = 0) -> list[list[Polynomial]]:
        """The ``m x n`` matrix of entry variables, optionally shifted by ``offset``."""
        return [[cls.variable(space, offset + space.entry(i, j), exact)
                 for j in range(space.n)] for i in range(space.m)]

    # -- basic queries ------------------------------------------------------

    @property
    def degree(self) -> int:
        """Total degree; the zero polynomial has degree -1."""
        return max((sum(a) for a in self.terms), default=-1)

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, a: Exponent):
        return self.terms.get(tuple(a), Fraction(0) if self.exact else 0.0)

    def sorted_terms(self) -> list[tuple[Exponent, object]]:
        return sorted(self.terms.items(), key=lambda t: exponent_key(t[0]))

    def constant_term(self):
        return self.coefficient(self.space.zero_exponent())

    # -- backend handling ---------------------------------------------------

    def to_float(self) -> Polynomial:
        if not self.exact:
            return self
        return Polynomial._raw(self.space, {a: float(c) for a, c in self.terms.items()}, False)

    def _coerce(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            if other.space != self.space:
                raise ValueError(f"variable space mismatch: {self.space} vs {other.space}")
            if other.exact != self.exact:
                raise TypeError("backend mismatch between exact and float polynomials")
            return other
        return Polynomial.constant(self.space, other, self.exact)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other) -> Polynomial:
        other = self._coerce(other)
        out = dict(self.terms)
        for a, c in other.terms.items():
            s = out.get(a, 0) + c
            if s == 0:
                out.pop(a, None)
            else:
                out[a] = s
        return Polynomial._raw(self.space, out, self.exact)

    __radd__ = __add__

    def __neg__(self) -> Polynomial:
        return Polynomial._raw(self.space, {a: -c for a, c in self.terms.items()}, self.exact)

    def __sub__(self, other) -> Polynomial:
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> Polynomial:
        return self._coerce(other) - self

    def scale(self, c) -> Polynomial:
        c = _to_exact(c) if self.exact else _to_float(c)
        if c == 0:
            return Polynomial.zero(self.space, self.exact)
        return Polynomial._raw(self.space, {a: c * v for a, v in self.terms.items()}, self.exact)

    def __mul__(self, other) -> Polynomial:
        if not isinstance(other, Polynomial):
            return self.scale(other)
        other = self._coerce(other)
        out: dict[Exponent, object] = {}
        for a, c in self.terms.items():
            for b, d in other.terms.items():
                e = tuple(x + y for x, y in zip(a, b))
                out[e] = out.get(e, 0) + c * d
        return Polynomial._raw(self.space, {a: c for a, c in out.items() if c != 0}, self.exact)

    def __rmul__(self, other) -> Polynomial:
        return self.scale(other)

    def __truediv__(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            raise TypeError("polynomial division is not supported")
        if self.exact:
            return self.scale(1 / _to_exact(other))
        return self.scale(1.0 / _to_float(other))

    def __pow__(self, k: int) -> Polynomial:
        if not isinstance(k, int) or k < 0:
            raise ValueError("exponent must be a nonnegative integer")
        result = Polynomial.constant(self.space, 1, self.exact)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, Polynomial):
            return (self.space == other.space and self.exact == other.exact
                    and self.terms == other.terms)
        if isinstance(other, (int, float, Fraction)):
            try:
                return self == self._coerce(other)
            except TypeError:
                return False
        return NotImplemented

    def __hash__(self):
        return hash((self.space, self.exact, frozenset(self.terms.items())))

    # -- evaluation and composition -----------------------------------------

    def evaluate(self, point: Sequence) -> object:
        """Direct term evaluation; exact for an exact polynomial at a rational point."""
        if len(point) != self.space.total:
            raise ValueError(f"point has length {len(point)}, expected {self.space.total}")
        if self.exact:
            pt = [_to_exact(v) if not isinstance(v, float) else v for v in point]
            total = Fraction(0)
        else:
            pt = [float(v) for v in point]
            total = 0.0
        for a, c in self.terms.items():
            term = c
            for v, e in zip(pt, a):
                if e:
                    term = term * v ** e
            total += term
        return total

    __call__ = evaluate

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        """Vectorised float evaluation at the rows of ``points``."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.space.total:
            raise ValueError("point dimension mismatch")
        if not self.terms:
            return np.zeros(points.shape[0])
        exps = np.array(list(self.terms.keys()), dtype=int)
        coefs = np.array([float(c) for c in self.terms.values()])
        mons = np.prod(points[:, None, :] ** exps[None, :, :], axis=2)
        return mons @ coefs

    def substitute(self, assignment: Mapping[int, Polynomial],
                   target: VarSpace | None = None) -> Polynomial:
        """Replace variable ``i`` by ``assignment[i]``.

        If ``target`` differs from the current space, every variable that
        occurs in the polynomial must be assigned.  Otherwise unassigned
        variables stay as they are.
        """
        images = list(assignment.values())
        if target is None:
            target = images[0].space if images else self.space
        for img in images:
            if img.space != target:
                raise ValueError("all images must share one target variable space")
            if img.exact != self.exact:
                raise TypeError("backend mismatch in substitution")
        used = {i for a in self.terms for i, e in enumerate(a) if e}
        missing = used - set(assignment)
        if missing and target != self.space:
            raise ValueError(f"incomplete assignment: variables {sorted(missing)} unassigned")
        full = {}
        for i in used:
            full[i] = assignment[i] if i in assignment else Polynomial.variable(target, i, self.exact)
        powers: dict[tuple[int, int], Polynomial] = {}

        def power(i, e):
            key = (i, e)
            if key not in powers:
                powers[key] = full[i] ** e
            return powers[key]

        out = Polynomial.zero(target, self.exact)
        for a, c in self.terms.items():
            term = Polynomial.constant(target, c, self.exact)
            for i, e in enumerate(a):
                if e:
                    term = term * power(i, e)
            out = out + term
        return out

    def embed(self, target: VarSpace, offset: int = 0) -> Polynomial:
        """Re-index into a larger space, shifting variable ``i`` to ``i + offset``."""
        if offset + self.space.total > target.total:
            raise ValueError("target space too small for embedding")
        out = {}
        for a, c in self.terms.items():
            b = [0] * target.total
            b[offset:offset + len(a)] = a
            out[tuple(b)] = c
        return Polynomial._raw(target, out, self.exact)

    # -- calculus -----------------------------------------------------------

    def diff(self, i: int) -> Polynomial:
        out = {}
        for a, c in self.terms.items():
            if a[i]:
                b = list(a)
                b[i] -= 1
                out[tuple(b)] = c * a[i]
        return Polynomial._raw(self.space, out, self.exact)

    # -- text ---------------------------------------------------------------

    def to_text(self) -> str:
        """Canonical text ``c*x1^2*x4 + ...`` with terms in graded-lex order."""
        if not self.terms:
            return "0"
        parts = []
        for a, c in self.sorted_terms():
            mon = "*".join(f"x{i + 1}" if e == 1 else f"x{i + 1}^{e}"
                           for i, e in enumerate(a) if e)
            neg = c < 0
            mag = -c if neg else c
            cs = _format_coef(mag)
            if mon and mag == 1:
                body = mon
            elif mon:
                body = f"{cs}*{mon}"
            else:
                body = cs
            if not parts:
                parts.append(("-" if neg else "") + body)
            else:
                parts.append((" - " if neg else " + ") + body)
        return "".join(parts)

    def __repr__(self):
        backend = "QQ" if self.exact else "RR"
        return f"Polynomial[{backend}]({self.to_text()})"


def _format_coef(c) -> str:
    if isinstance(c, Fraction):
        return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
    return repr(float(c))


# -- free functions on polynomials ------------------------------------------

PolyVector = list  # list[Polynomial] over one shared VarSpace


def gradient(p: Polynomial) -> list[Polynomial]:
    return [p.diff(i) for i in range(p.space.total)]


def hessian(p: Polynomial) -> list[list[Polynomial]]:
    g = gradient(p)
    n = p.space.total
    rows = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            h = g[i].diff(j)
            rows[i][j] = h
            rows[j][i] = h
    return rows


def hessian_form(p: Polynomial) -> Polynomial:
    """The polynomial ``<z, H(x) z>`` in the doubled space ``(x, z)``."""
    n = p.space.total
    big = p.space.doubled()
    h = hessian(p)
    z = [Polynomial.variable(big, n + i, p.exact) for i in range(n)]
    out = Polynomial.zero(big, p.exact)
    for i in range(n):
        for j in range(n):
            if not h[i][j].is_zero():
                out = out + h[i][j].embed(big) * z[i] * z[j]
    return out


def bregman(p: Polynomial) -> Polynomial:
    """``D_p(x, y) = p(x) - p(y) - <grad p(y), x - y>`` in the doubled space."""
    n = p.space.total
    big = p.space.doubled()
    px = p.embed(big, 0)
    py = p.embed(big, n)
    out = px - py
    for i, gi in enumerate(gradient(p)):
        if gi.is_zero():
            continue
        xi = Polynomial.variable(big, i, p.exact)
        yi = Polynomial.variable(big, n + i, p.exact)
        out = out - gi.embed(big, n) * (xi - yi)
    return out


def frob2(mat: Sequence[Sequence[Polynomial]]) -> Polynomial:
    entries = [e for row in mat for e in row]
    out = entries[0] * entries[0]
    for e in entries[1:]:
        out = out + e * e
    return out


def determinant(mat: Sequence[Sequence]) -> object:
    """Laplace expansion along the first column; works for any ring elements."""
    k = len(mat)
    if k == 0:
        return 1
    if any(len(row) != k for row in mat):
        raise ValueError("determinant of a non-square matrix")
    if k == 1:
        return mat[0][0]
    if k == 2:
        return mat[0][0] * mat[1][1] - mat[1][0] * mat[0][1]
    total = None
    for i in range(k):
        minor = [row[1:] for r, row in enumerate(mat) if r != i]
        term = mat[i][0] * determinant(minor)
        if i % 2:
            term = -term
        total = term if total is None else total + term
    return total


def coefficients_vector(p: Polynomial, index: Mapping[Exponent, int], size: int) -> np.ndarray:
    """Dense float coefficient vector of ``p`` against a monomial index."""
    out = np.zeros(size)
    for a, c in p.terms.items():
        try:
            out[index[a]] = float(c)
        except KeyError:
            raise ValueError(f"monomial {a} outside the supplied basis") from None
    return out


def n_monomials(total: int, d: int) -> int:
    return math.comb(total + d, d)


def sum_polys(polys: Iterable[Polynomial], space: VarSpace, exact: bool = True) -> Polynomial:
    out = Polynomial.zero(space, exact)
    for p in polys:
        out = out + p
    return out

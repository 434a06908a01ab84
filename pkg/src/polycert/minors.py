"""The minors map ``p: R^{m x n} -> R^N``.

``p`` lists every ``s x s`` minor for ``s = 1..min(m, n)``.  The constant
minor of order zero is not included.  Within one order the minors are sorted
lexicographically on ``(cols, rows)``, which puts the order-one minors in
column-major entry order: for a 2x2 matrix ``p(X) = (X11, X21, X12, X22, det X)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .poly_core import Polynomial, VarSpace, determinant


@dataclass(frozen=True)
class MinorIndex:
    """0-based row and column subsets of one minor."""

    rows: tuple[int, ...]
    cols: tuple[int, ...]

    @property
    def order(self) -> int:
        return len(self.rows)

    def label(self) -> str:
        if self.order == 1:
            return f"X{self.rows[0] + 1}{self.cols[0] + 1}"
        r = "".join(str(i + 1) for i in self.rows)
        c = "".join(str(j + 1) for j in self.cols)
        return f"M[{r};{c}]"


@dataclass(frozen=True)
class MinorsMap:
    m: int
    n: int
    indices: tuple[MinorIndex, ...]

    @property
    def N(self) -> int:
        return len(self.indices)

    @property
    def space(self) -> VarSpace:
        return VarSpace(self.m, self.n)

    @property
    def max_order(self) -> int:
        return max(ix.order for ix in self.indices)

    def orders(self) -> list[int]:
        return [ix.order for ix in self.indices]


def minors_count(m: int, n: int, max_order: int | None = None) -> int:
    top = min(m, n) if max_order is None else min(m, n, max_order)
    return sum(math.comb(m, s) * math.comb(n, s) for s in range(1, top + 1))


def build_minors_map(m: int, n: int, max_order: int | None = None) -> MinorsMap:
    """All minors of order ``1..min(m, n)`` (or up to ``max_order``).

    ``max_order=1`` keeps only the entries, which turns the polyconvex
    envelope machinery into a convex envelope.
    """
    if m < 1 or n < 1:
        raise ValueError("matrix dimensions must be positive")
    top = min(m, n) if max_order is None else min(m, n, max_order)
    if top < 1:
        raise ValueError("max_order must be at least 1")
    indices = []
    for s in range(1, top + 1):
        block = [MinorIndex(rows, cols)
                 for rows in itertools.combinations(range(m), s)
                 for cols in itertools.combinations(range(n), s)]
        block.sort(key=lambda ix: (ix.cols, ix.rows))
        indices.extend(block)
    return MinorsMap(m, n, tuple(indices))


def _submatrix(mat, ix: MinorIndex):
    return [[mat[i][j] for j in ix.cols] for i in ix.rows]


def minors_symbolic(mmap: MinorsMap, exact: bool = True, space: VarSpace | None = None,
                    offset: int = 0) -> list[Polynomial]:
    """Minor polynomials, entry ``i`` being a form of degree ``order(i)``.

    ``space``/``offset`` place the matrix variables inside a larger space, e.g.
    the ``Y`` half of a doubled ``(X, Y)`` space.
    """
    space = space or mmap.space
    base = VarSpace(mmap.m, mmap.n)
    X = [[Polynomial.variable(space, offset + base.entry(i, j), exact)
          for j in range(mmap.n)] for i in range(mmap.m)]
    return [determinant(_submatrix(X, ix)) for ix in mmap.indices]


def minors_eval(mmap: MinorsMap, X) -> np.ndarray | list[Fraction]:
    """Numeric minors in map order.

    Float input gives a float array; integer/Fraction input is evaluated
    exactly and returned as a list of Fractions.
    """
    exact = _is_exact(X)
    if exact:
        mat = [[Fraction(v) for v in row] for row in X]
        shape = (len(mat), len(mat[0]) if mat else 0)
    else:
        mat = np.asarray(X, dtype=float)
        shape = mat.shape
    if shape != (mmap.m, mmap.n):
        raise ValueError(f"matrix shape {shape} does not match {mmap.m}x{mmap.n}")
    if exact:
        return [Fraction(determinant(_submatrix(mat, ix))) for ix in mmap.indices]
    return np.array([float(determinant(_submatrix(mat.tolist(), ix))) for ix in mmap.indices])


def _is_exact(X) -> bool:
    if isinstance(X, np.ndarray):
        return X.dtype == object and all(isinstance(v, (int, Fraction)) for v in X.ravel())
    flat = [v for row in X for v in row]
    return all(isinstance(v, (int, Fraction)) and not isinstance(v, bool) for v in flat)


def flatten(X: Sequence[Sequence]) -> list:
    """Column-major flattening matching the variable order."""
    rows = len(X)
    cols = len(X[0])
    return [X[i][j] for j in range(cols) for i in range(rows)]


def unflatten(x: Sequence, m: int, n: int) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(n, m).T

"""Small numeric and exact linear-algebra helpers."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.linalg
from sympy import QQ
from sympy.polys.matrices import DomainMatrix


def simplest_rational(x: float, tol: float, max_den: int = 10 ** 4) -> Fraction:
    """First continued-fraction convergent of ``x`` within ``tol``.

    Falls back to the best approximant with denominator at most ``max_den``.
    """
    x = float(x)
    if not np.isfinite(x):
        raise ValueError("cannot rationalize a non-finite value")
    h0, h1, k0, k1 = 0, 1, 1, 0
    rest = Fraction(x)
    while True:
        a = rest.numerator // rest.denominator
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        if k1 > max_den:
            return Fraction(x).limit_denominator(max_den)
        conv = Fraction(h1, k1)
        if abs(float(conv) - x) <= tol or rest == a:
            return conv
        rest = 1 / (rest - a)


def pivoted_echelon(M: np.ndarray, rank: int | None = None,
                    tol: float = 1e-8) -> tuple[np.ndarray, list[int]]:
    """Row basis of ``M`` that is the identity on a well-conditioned column subset.

    Columns are chosen by QR with column pivoting; the result ``E`` spans the
    row space of ``M`` and satisfies ``E[:, pivots] = I``.  Pivots are sorted.
    """
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return np.zeros((0, M.shape[1])), []
    _, R, perm = scipy.linalg.qr(M, pivoting=True, mode="economic")
    if rank is None:
        d = np.abs(np.diag(R))
        rank = int(np.sum(d > tol * max(d[0], 1e-300))) if d.size else 0
    pivots = sorted(int(c) for c in perm[:rank])
    E = np.linalg.lstsq(M[:, pivots], M, rcond=None)[0] if rank else np.zeros((0, M.shape[1]))
    return E, pivots


def range_basis(Q: np.ndarray, tol_rel: float = 1e-7) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis of the numerical range of a symmetric matrix and its eigenvalues."""
    w, V = np.linalg.eigh(0.5 * (Q + Q.T))
    top = max(w.max() if w.size else 0.0, 1.0)
    keep = w > tol_rel * top
    return V[:, keep], w[keep]


def to_domain(rows: Sequence[Sequence[Fraction]], ncols: int | None = None) -> DomainMatrix:
    ncols = len(rows[0]) if ncols is None else ncols
    return DomainMatrix([[QQ(int(v.numerator), int(v.denominator)) for v in row] for row in rows],
                        (len(rows), ncols), QQ)


def from_domain_vector(v: DomainMatrix) -> list[Fraction]:
    return [Fraction(int(x.numerator), int(x.denominator)) for x in v.to_Matrix()]


def min_norm_correction(A: DomainMatrix, residual: DomainMatrix) -> DomainMatrix:
    """Exact minimum-norm ``d`` with ``A d = residual`` on the row space of ``A``.

    Only the independent rows of ``A`` are used; whether the remaining rows are
    satisfied is left for the caller to verify.
    """
    _, row_pivots = A.transpose().rref()
    if not row_pivots:
        return DomainMatrix.zeros((A.shape[1], 1), QQ)
    sel = list(row_pivots)
    Ab = A.extract(sel, list(range(A.shape[1])))
    rb = residual.extract(sel, [0])
    y = (Ab * Ab.transpose()).lu_solve(rb)
    return Ab.transpose() * y

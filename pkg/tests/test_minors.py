from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from polycert.minors import (build_minors_map, flatten, minors_count, minors_eval,
                             minors_symbolic, unflatten)
from polycert.poly_core import Polynomial, VarSpace

import oracles


@pytest.mark.parametrize("m,n,N", [(2, 2, 5), (3, 3, 19), (1, 4, 4), (2, 3, 9)])
def test_minors_count(m, n, N):
    mm = build_minors_map(m, n)
    assert mm.N == N == minors_count(m, n)


def test_two_by_two_labels():
    mm = build_minors_map(2, 2)
    assert [ix.label() for ix in mm.indices] == ["X11", "X21", "X12", "X22", "M[12;12]"]


def test_max_order_keeps_entries_only():
    assert build_minors_map(3, 3, max_order=1).N == 9


def test_symbolic_det_entry():
    S = VarSpace(2, 2)
    p = minors_symbolic(build_minors_map(2, 2))
    x = [Polynomial.variable(S, i) for i in range(4)]
    assert p[4] == x[0] * x[3] - x[1] * x[2]
    assert all(q.degree == 1 and len(q.terms) == 1 for q in p[:4])


def test_symbolic_degrees_equal_orders():
    mm = build_minors_map(3, 3)
    assert [q.degree for q in minors_symbolic(mm)] == mm.orders()


def test_three_by_three_det_at_identity():
    p = minors_symbolic(build_minors_map(3, 3))
    assert p[-1].evaluate(flatten(np.eye(3, dtype=int).tolist())) == 1


@pytest.mark.parametrize("X,expected", [
    ([[1, 0], [0, 1]], [1, 0, 0, 1, 1]),
    ([[0, 0], [0, 0]], [0, 0, 0, 0, 0]),
    ([[0, 0], [1, 2]], [0, 1, 0, 2, 0]),
])
def test_minors_eval_examples(X, expected):
    assert minors_eval(build_minors_map(2, 2), X) == [Fraction(v) for v in expected]


def test_shape_mismatch():
    with pytest.raises(ValueError):
        minors_eval(build_minors_map(2, 2), np.zeros((3, 2)))


def test_eval_matches_symbolic_exactly():
    rng = np.random.default_rng(0)
    for m, n in [(2, 2), (2, 3), (3, 3)]:
        mm = build_minors_map(m, n)
        p = minors_symbolic(mm)
        for _ in range(50):
            X = [[Fraction(int(v), 5) for v in row] for row in rng.integers(-9, 9, (m, n))]
            assert minors_eval(mm, X) == [q.evaluate(flatten(X)) for q in p]


def test_last_entry_is_lu_determinant():
    rng = np.random.default_rng(1)
    mm = build_minors_map(3, 3)
    for _ in range(50):
        X = rng.standard_normal((3, 3))
        lu, piv = scipy.linalg.lu_factor(X)
        sign = (-1) ** np.sum(piv != np.arange(3))
        assert abs(minors_eval(mm, X)[-1] - sign * np.prod(np.diag(lu))) < 1e-10


def test_float_eval_matches_numpy_oracle():
    rng = np.random.default_rng(2)
    for m, n in [(2, 2), (2, 3), (3, 2), (3, 3)]:
        mm = build_minors_map(m, n)
        X = rng.standard_normal((m, n))
        assert np.allclose(minors_eval(mm, X), oracles.all_minors(X), atol=1e-12)


@given(st.integers(1, 4), st.integers(1, 4))
def test_count_is_symmetric(m, n):
    assert minors_count(m, n) == minors_count(n, m) == build_minors_map(n, m).N


def test_flatten_roundtrip():
    X = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(unflatten(flatten(X.tolist()), 2, 3), X)
    assert flatten([[1, 3], [2, 4]]) == [1, 2, 3, 4]

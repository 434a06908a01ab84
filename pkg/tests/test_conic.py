from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import special_ortho_group

from polycert.conic import (ProgramBuilder, SolverSettings, Status, n_tri, numeric_rank,
                            psd_check, solve, sym_to_tri, tri_to_sym)
from polycert.envelope import PseudoMomentVector, moment_matrix
from polycert.poly_core import VarSpace

import oracles

BACKENDS = ["clarabel", "cvxopt", "auto"]


def univariate_gram(coeffs):
    """Gram feasibility for sum_k coeffs[k] x^k in the basis (1, x, ..., x^d)."""
    d = (len(coeffs) - 1) // 2
    b = ProgramBuilder()
    Q = b.add_psd_variable(d + 1)
    for k, c in enumerate(coeffs):
        row = {}
        for i in range(d + 1):
            j = k - i
            if 0 <= j <= d:
                row[int(Q[i, j])] = row.get(int(Q[i, j]), 0.0) + 1.0
        b.add_equality(row, c)
    return b, Q


@pytest.mark.parametrize("backend", BACKENDS)
def test_trivial_scalar_block(backend):
    b = ProgramBuilder()
    t = b.add_vars(1, "t")
    b.add_lmi(1, [{int(t[0]): 1.0}])
    b.set_objective({int(t[0]): 1.0})
    sol = solve(b.build(), SolverSettings(backend=backend))
    assert sol.status == Status.OPTIMAL
    assert abs(sol.x[0]) < 1e-7


@pytest.mark.parametrize("backend", BACKENDS)
def test_unique_gram_is_identity(backend):
    # x1^2 + x2^2 in the basis (x1, x2)
    b = ProgramBuilder()
    Q = b.add_psd_variable(2)
    b.add_equality({int(Q[0, 0]): 1.0}, 1.0)
    b.add_equality({int(Q[1, 1]): 1.0}, 1.0)
    b.add_equality({int(Q[0, 1]): 2.0}, 0.0)
    sol = solve(b.build(), SolverSettings(backend=backend))
    assert sol.status == Status.OPTIMAL
    assert np.allclose(sol.x[Q], np.eye(2), atol=1e-7)


@pytest.mark.parametrize("backend", ["clarabel", "cvxopt"])
def test_non_sos_quartic_is_infeasible(backend):
    # x^4 - x^2 is negative on (0, 1)
    assert min(t ** 4 - t ** 2 for t in np.linspace(0.1, 0.9, 9)) < 0
    b, _ = univariate_gram([0.0, 0.0, -1.0, 0.0, 1.0])
    sol = solve(b.build(), SolverSettings(backend=backend))
    assert sol.status == Status.INFEASIBLE


@pytest.mark.parametrize("backend", BACKENDS)
def test_largest_eigenvalue(backend):
    rng = np.random.default_rng(4)
    A = rng.standard_normal((4, 4))
    A = A + A.T
    b = ProgramBuilder()
    t = int(b.add_vars(1, "t")[0])
    pairs = [(i, j) for j in range(4) for i in range(j + 1)]
    entries = [{t: 1.0} if i == j else {} for i, j in pairs]
    const = np.array([-A[i, j] for i, j in pairs])
    b.add_lmi(4, entries, const)
    b.set_objective({t: 1.0})
    sol = solve(b.build(), SolverSettings(backend=backend))
    assert sol.status == Status.OPTIMAL
    assert abs(sol.objective - np.linalg.eigvalsh(A)[-1]) < 1e-6
    assert abs(sol.objective - sol.dual_objective) <= 1e-5 * (1 + abs(sol.objective))


@pytest.mark.parametrize("backend", BACKENDS)
def test_inequalities_and_max_sense(backend):
    # max x + y  s.t.  x <= 1, y <= 2, [[1, x], [x, 1]] >= 0
    b = ProgramBuilder()
    x, y = (int(v) for v in b.add_vars(2))
    b.add_inequality({x: 1.0}, 1.0)
    b.add_inequality({y: 1.0}, 2.0)
    b.add_lmi(2, [{}, {x: 1.0}, {}], np.array([1.0, 0.0, 1.0]))
    b.set_objective({x: 1.0, y: 1.0}, sense="max")
    sol = solve(b.build(), SolverSettings(backend=backend))
    assert sol.status == Status.OPTIMAL
    assert abs(sol.objective - 3.0) < 1e-6
    assert abs(sol.dual_objective - 3.0) < 1e-5


def test_backends_agree_on_gram_program():
    b, Q = univariate_gram([1.0, 0.0, -1.0, 0.0, 1.0])  # x^4 - x^2 + 1
    b.set_objective({int(Q[0, 0]): 1.0})
    vals = [solve(b.build(), SolverSettings(backend=be)).objective for be in ("clarabel", "cvxopt")]
    assert abs(vals[0] - vals[1]) < 1e-6


def test_dump_is_one_based_triplets():
    b = ProgramBuilder()
    x = int(b.add_vars(1)[0])
    b.add_equality({x: 2.0}, 4.0)
    b.add_lmi(1, [{x: 1.0}])
    b.set_objective({x: 1.0})
    text = b.build().dump()
    lines = text.splitlines()
    assert lines[0].startswith("# cone program: 1 variables, 1 equalities")
    assert "1 1 2.0" in lines and "rhs 1 4.0" in lines and "block 1 1" in lines
    assert "1 1 1 1.0" in lines


def test_env_overrides_tolerance(monkeypatch):
    monkeypatch.setenv("POLYCERT_SOLVER_TOL", "1e-7")
    assert SolverSettings.from_env().feas_tol == 1e-7
    assert SolverSettings.from_env(feas_tol=1e-8).feas_tol == 1e-8


def test_bad_settings():
    with pytest.raises(ValueError):
        SolverSettings(feas_tol=0)
    with pytest.raises(ValueError):
        SolverSettings(backend="mosek")


# -- PSD and rank helpers ----------------------------------------------------------------------

def test_psd_check_examples():
    assert psd_check(np.eye(3)).is_psd
    assert psd_check(np.eye(3)).lambda_min == pytest.approx(1.0)
    neg = psd_check(np.diag([1.0, -1.0]))
    assert not neg.is_psd and neg.lambda_min == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        psd_check(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_psd_check_on_hessian_block_at_zero_coefficient():
    c = 0.0
    B = np.array([[4 - 8 * c, 0, 0, -8 * c - 14],
                  [0, 12, 4 * c + 10, 0],
                  [0, 4 * c + 10, 12, 0],
                  [-8 * c - 14, 0, 0, 28 - 2 * c]])
    assert B[0, 0] * B[3, 3] - B[0, 3] ** 2 == -84
    assert not psd_check(B).is_psd


def test_numeric_rank_examples():
    assert numeric_rank(np.eye(5)) == 5
    v = np.arange(1.0, 5.0)
    assert numeric_rank(np.outer(v, v)) == 1
    assert numeric_rank(np.zeros((3, 3))) == 0


def test_rank_of_four_atom_moment_matrix():
    atoms = [(W, 0.25) for W in oracles.WELLS_QUAD]
    y = PseudoMomentVector.from_atoms(VarSpace(2, 2), 2, atoms)
    assert numeric_rank(moment_matrix(y).matrix) == 4


@given(st.integers(1, 5), st.integers(0, 2 ** 16))
def test_rank_invariant_under_rotation(size, seed):
    rng = np.random.default_rng(seed)
    r = rng.integers(0, size + 1)
    F = rng.standard_normal((size, r))
    M = F @ F.T
    R = special_ortho_group.rvs(size, random_state=seed) if size > 1 else np.eye(1)
    assert numeric_rank(R @ M @ R.T) == numeric_rank(M)


@given(st.integers(1, 6).flatmap(lambda n: arrays(np.float64, (n_tri(n),),
                                                  elements=st.floats(-1e3, 1e3))))
def test_tri_sym_roundtrip(v):
    n = int((np.sqrt(8 * len(v) + 1) - 1) / 2)
    M = tri_to_sym(v, n)
    assert np.array_equal(M, M.T)
    assert np.array_equal(sym_to_tri(M), v)

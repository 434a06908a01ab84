"""Solver-agnostic semidefinite programs and the interior-point adapter.

A :class:`ConeProgram` has free scalar variables ``x``, linear equalities
``A x = b`` and PSD blocks whose entries are affine in ``x``::

    F_k(x) = F_k0 + sum_i x_i F_ki  >= 0.

A PSD matrix *variable* is the special case where each upper-triangle entry
is its own free variable with coefficient one.  Block entries are stored for
the upper triangle in column-major order ``(0,0), (0,1), (1,1), (0,2), ...``
as plain matrix entries; inner products therefore weigh off-diagonal entries
by two.

Dual multipliers follow the Lagrangian ``c^T x -/+ lam^T (A x - b) -/+ <Z, F(x)>``
so that at an optimum ``c = A^T lam + F*(Z)`` for minimisation and
``c = A^T lam - F*(Z)`` for maximisation.  Only this module names a backend.
"""

from __future__ import annotations

import io
import os
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np
import scipy.sparse as sp

SQRT2 = np.sqrt(2.0)


class Status(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    INACCURATE = "Inaccurate"
    FAILED = "Failed"


def triu_pairs(n: int) -> list[tuple[int, int]]:
    """Upper-triangle ``(i, j)`` pairs, column-major."""
    return [(i, j) for j in range(n) for i in range(j + 1)]


def n_tri(n: int) -> int:
    return n * (n + 1) // 2


@dataclass(frozen=True)
class PsdBlock:
    size: int
    coeffs: sp.csr_matrix  # (n_tri(size), n_vars): x -> upper-triangle entries
    const: np.ndarray      # (n_tri(size),)
    label: str = ""

    def matrix(self, x: np.ndarray) -> np.ndarray:
        return tri_to_sym(self.coeffs @ x + self.const, self.size)


def tri_to_sym(v: np.ndarray, n: int) -> np.ndarray:
    M = np.zeros((n, n))
    iu = np.triu_indices(n)
    # np.triu_indices is row-major; remap to our column-major layout
    order = _colmajor_order(n)
    M[iu[0][order], iu[1][order]] = v
    return M + np.triu(M, 1).T


def sym_to_tri(M: np.ndarray) -> np.ndarray:
    n = M.shape[0]
    return np.array([M[i, j] for i, j in triu_pairs(n)])


_ORDER_CACHE: dict[int, np.ndarray] = {}


def _colmajor_order(n: int) -> np.ndarray:
    """Permutation taking row-major triu positions to column-major ones."""
    if n not in _ORDER_CACHE:
        iu = np.triu_indices(n)
        pos = {(int(i), int(j)): k for k, (i, j) in enumerate(zip(*iu))}
        _ORDER_CACHE[n] = np.array([pos[p] for p in triu_pairs(n)], dtype=int)
    return _ORDER_CACHE[n]


@dataclass(frozen=True)
class ConeProgram:
    n_vars: int
    objective: np.ndarray
    eq_matrix: sp.csr_matrix
    eq_rhs: np.ndarray
    psd_blocks: tuple[PsdBlock, ...]
    sense: str = "min"
    var_labels: tuple[str, ...] = ()
    obj_offset: float = 0.0
    # optional componentwise constraint ineq_matrix @ x <= ineq_rhs
    ineq_matrix: sp.csr_matrix | None = None
    ineq_rhs: np.ndarray | None = None

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        if self.objective.shape != (self.n_vars,):
            raise ValueError("objective length does not match variable count")
        if self.eq_matrix.shape[1] != self.n_vars:
            raise ValueError("equality matrix references undeclared variables")
        if self.ineq_matrix is None:
            object.__setattr__(self, "ineq_matrix", sp.csr_matrix((0, self.n_vars)))
            object.__setattr__(self, "ineq_rhs", np.zeros(0))
        if self.ineq_matrix.shape != (len(self.ineq_rhs), self.n_vars):
            raise ValueError("inequality matrix has inconsistent shape")
        for b in self.psd_blocks:
            if b.coeffs.shape != (n_tri(b.size), self.n_vars):
                raise ValueError(f"PSD block {b.label!r} has inconsistent shape")

    @property
    def n_equalities(self) -> int:
        return self.eq_matrix.shape[0]

    @property
    def n_inequalities(self) -> int:
        return self.ineq_matrix.shape[0]

    @property
    def block_sizes(self) -> list[int]:
        return [b.size for b in self.psd_blocks]

    def dump(self) -> str:
        """Plain-text sparse-triplet dump, 1-based indices.

        Sections: ``objective`` lines ``j c_j``; ``equalities`` lines ``i j a_ij``
        followed by ``rhs i b_i``; ``inequalities`` (rows of ``G x <= h``) in the
        same layout; one ``block k size`` header per PSD block with
        lines ``r s j coef`` (``j = 0`` for the constant term).
        """
        out = io.StringIO()
        out.write(f"# cone program: {self.n_vars} variables, {self.n_equalities} equalities, "
                  f"PSD blocks {self.block_sizes}, sense {self.sense}\n")
        out.write("objective\n")
        for j in np.flatnonzero(self.objective):
            out.write(f"{j + 1} {float(self.objective[j])!r}\n")
        out.write("equalities\n")
        A = self.eq_matrix.tocoo()
        for i, j, v in sorted(zip(A.row, A.col, A.data)):
            out.write(f"{int(i) + 1} {int(j) + 1} {float(v)!r}\n")
        for i, v in enumerate(self.eq_rhs):
            if v:
                out.write(f"rhs {i + 1} {float(v)!r}\n")
        if self.n_inequalities:
            out.write("inequalities\n")
            G = self.ineq_matrix.tocoo()
            for i, j, v in sorted(zip(G.row, G.col, G.data)):
                out.write(f"{int(i) + 1} {int(j) + 1} {float(v)!r}\n")
            for i, v in enumerate(self.ineq_rhs):
                if v:
                    out.write(f"rhs {i + 1} {float(v)!r}\n")
        for k, b in enumerate(self.psd_blocks):
            out.write(f"block {k + 1} {b.size}\n")
            pairs = triu_pairs(b.size)
            C = b.coeffs.tocoo()
            for t, j, v in sorted(zip(C.row, C.col, C.data)):
                r, s = pairs[t]
                out.write(f"{r + 1} {s + 1} {j + 1} {float(v)!r}\n")
            for t in np.flatnonzero(b.const):
                r, s = pairs[t]
                out.write(f"{r + 1} {s + 1} 0 {float(b.const[t])!r}\n")
        return out.getvalue()


class ProgramBuilder:
    """Incremental assembly of a :class:`ConeProgram`."""

    def __init__(self):
        self.n_vars = 0
        self.labels: list[str] = []
        self._eq_rows: list[dict[int, float]] = []
        self._eq_rhs: list[float] = []
        self._ineq_rows: list[dict[int, float]] = []
        self._ineq_rhs: list[float] = []
        self._blocks: list[tuple[int, list[dict[int, float]], np.ndarray, str]] = []
        self._objective: dict[int, float] = {}
        self._offset = 0.0
        self._sense = "min"

    def add_vars(self, count: int, label: str = "x") -> np.ndarray:
        start = self.n_vars
        self.n_vars += count
        self.labels.extend(f"{label}[{i}]" for i in range(count))
        return np.arange(start, start + count)

    def add_psd_variable(self, size: int, label: str = "Q") -> np.ndarray:
        """A symmetric PSD matrix variable; returns the ``size x size`` index grid."""
        idx = self.add_vars(n_tri(size), label)
        grid = np.zeros((size, size), dtype=int)
        for t, (i, j) in enumerate(triu_pairs(size)):
            grid[i, j] = grid[j, i] = idx[t]
        rows = [{int(v): 1.0} for v in idx]
        self._blocks.append((size, rows, np.zeros(n_tri(size)), label))
        return grid

    def add_lmi(self, size: int, entries: Sequence[dict[int, float]],
                const: np.ndarray | None = None, label: str = "F") -> None:
        """Constrain ``F(x) >= 0``; ``entries[t]`` maps variables to coefficients of
        upper-triangle entry ``t`` (column-major)."""
        if len(entries) != n_tri(size):
            raise ValueError("LMI entry list has the wrong length")
        const = np.zeros(n_tri(size)) if const is None else np.asarray(const, float)
        self._blocks.append((size, list(entries), const, label))

    def add_equality(self, coeffs: dict[int, float], rhs: float) -> int:
        self._eq_rows.append(dict(coeffs))
        self._eq_rhs.append(float(rhs))
        return len(self._eq_rows) - 1

    def add_inequality(self, coeffs: dict[int, float], rhs: float) -> int:
        """``sum coeffs[j] * x[j] <= rhs``."""
        self._ineq_rows.append(dict(coeffs))
        self._ineq_rhs.append(float(rhs))
        return len(self._ineq_rows) - 1

    def set_objective(self, coeffs: dict[int, float], sense: str = "min",
                      offset: float = 0.0) -> None:
        self._objective = dict(coeffs)
        self._sense = sense
        self._offset = offset

    def build(self) -> ConeProgram:
        n = self.n_vars
        c = np.zeros(n)
        for j, v in self._objective.items():
            c[j] += v
        A = _rows_to_csr(self._eq_rows, n)
        blocks = tuple(PsdBlock(size, _rows_to_csr(rows, n), const, label)
                       for size, rows, const, label in self._blocks)
        return ConeProgram(n, c, A, np.array(self._eq_rhs), blocks, self._sense,
                           tuple(self.labels), self._offset,
                           _rows_to_csr(self._ineq_rows, n), np.array(self._ineq_rhs))


def _rows_to_csr(rows: Sequence[dict[int, float]], n: int) -> sp.csr_matrix:
    r, cidx, v = [], [], []
    for i, row in enumerate(rows):
        for j, a in row.items():
            if a:
                r.append(i)
                cidx.append(j)
                v.append(a)
    return sp.csr_matrix((v, (r, cidx)), shape=(len(rows), n))


BACKENDS = ("auto", "clarabel", "cvxopt")
RELAXED_TOL_LIMIT = 1e-7


@dataclass(frozen=True)
class SolverSettings:
    feas_tol: float = 1e-9
    max_iter: int = 100
    verbose: bool = False
    # independent complementary-slackness / duality-gap recheck
    recheck_tol: float = 1e-6
    # "auto" picks a backend by problem shape and falls back to the other on failure
    backend: str = "auto"

    def __post_init__(self):
        if self.feas_tol <= 0:
            raise ValueError("feas_tol must be positive")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}")

    @classmethod
    def from_env(cls, **kwargs) -> SolverSettings:
        env = os.environ.get("POLYCERT_SOLVER_TOL")
        if env and "feas_tol" not in kwargs:
            kwargs["feas_tol"] = float(env)
        return cls(**kwargs)


@dataclass
class Solution:
    status: Status
    x: np.ndarray
    eq_duals: np.ndarray
    psd_duals: list[np.ndarray]
    objective: float
    dual_objective: float
    primal_residual: float
    dual_residual: float
    gap: float
    message: str = ""
    solve_time: float = 0.0
    iterations: int = 0
    block_values: list[np.ndarray] = field(default_factory=list)
    ineq_duals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def ok(self) -> bool:
        return self.status == Status.OPTIMAL


_STATUS_MAP = {
    "Solved": Status.OPTIMAL,
    # reduced tolerances are tightened in _solve_clarabel, and the recheck still applies
    "AlmostSolved": Status.OPTIMAL,
    "PrimalInfeasible": Status.INFEASIBLE,
    "AlmostPrimalInfeasible": Status.INFEASIBLE,
    "DualInfeasible": Status.UNBOUNDED,
    "AlmostDualInfeasible": Status.UNBOUNDED,
    "MaxIterations": Status.INACCURATE,
    "MaxTime": Status.INACCURATE,
    "NumericalError": Status.FAILED,
    "InsufficientProgress": Status.INACCURATE,
    "CallbackTerminated": Status.FAILED,
}


def _scaled_tri_weights(n: int) -> np.ndarray:
    return np.array([1.0 if i == j else SQRT2 for i, j in triu_pairs(n)])


def solve(prog: ConeProgram, settings: SolverSettings | None = None) -> Solution:
    """Solve and independently re-verify residuals, gap and complementarity.

    With the ``auto`` backend an unverified result from the preferred backend
    triggers a second attempt with the other one, then retries with a looser
    feasibility tolerance (at most ``RELAXED_TOL_LIMIT``); the first verified
    result wins.
    """
    settings = settings or SolverSettings.from_env()
    if settings.backend == "cvxopt":
        return _solve_cvxopt(prog, settings)
    if settings.backend == "clarabel":
        return _solve_clarabel(prog, settings)
    first, second = _solve_clarabel, _solve_cvxopt
    if _prefers_cvxopt(prog):
        first, second = second, first
    sol = first(prog, settings)
    if sol.status in (Status.OPTIMAL, Status.INFEASIBLE, Status.UNBOUNDED):
        return sol
    alt = second(prog, settings)
    alt.solve_time += sol.solve_time
    if alt.status == Status.OPTIMAL or sol.status == Status.FAILED:
        alt.message = f"{sol.message}; retried: {alt.message}"
        sol = alt
    if sol.status == Status.OPTIMAL:
        return sol
    # Interior-point codes can stall just short of a very tight tolerance on
    # faces without interior; back off while the recheck still guards the result.
    spent = sol.solve_time
    for factor in (10, 100):
        tol = settings.feas_tol * factor
        if tol > RELAXED_TOL_LIMIT * (1 + 1e-9):
            break
        loose = replace(settings, feas_tol=tol)
        retry = first(prog, loose)
        spent += retry.solve_time
        if retry.status == Status.OPTIMAL:
            retry.solve_time = spent
            retry.message += f"; tolerance relaxed to {tol:.0e}"
            return retry
    sol.solve_time = spent
    return sol


def _relaxed_tol(feas_tol: float) -> float:
    return max(feas_tol, min(10 * feas_tol, RELAXED_TOL_LIMIT))


def _prefers_cvxopt(prog: ConeProgram) -> bool:
    """LMI form with few variables and a large PSD block.

    CVXOPT's cost is driven by the variable count (Schur complement), Clarabel's
    by the dense PSD blocks in its KKT system.
    """
    svec = sum(n_tri(b.size) for b in prog.psd_blocks)
    return svec >= 3 * prog.n_vars and not prog.n_inequalities


def _finish(prog: ConeProgram, settings: SolverSettings, status: Status, x, lam, mu, Zs,
            message: str, elapsed: float, iterations: int) -> Solution:
    vals = [blk.matrix(x) for blk in prog.psd_blocks]
    sol = Solution(status, x, lam, Zs, float(prog.objective @ x + prog.obj_offset), np.nan,
                   np.nan, np.nan, np.nan, message, elapsed, iterations, vals, mu)
    if status in (Status.OPTIMAL, Status.INACCURATE):
        _recheck(prog, sol, settings)
    return sol


def _solve_clarabel(prog: ConeProgram, settings: SolverSettings) -> Solution:
    import clarabel

    n = prog.n_vars
    sign = 1.0 if prog.sense == "min" else -1.0
    A_parts = [prog.eq_matrix.tocsc()]
    b_parts = [prog.eq_rhs]
    cones = []
    if prog.n_equalities:
        cones.append(clarabel.ZeroConeT(prog.n_equalities))
    if prog.n_inequalities:
        A_parts.append(prog.ineq_matrix.tocsc())
        b_parts.append(prog.ineq_rhs)
        cones.append(clarabel.NonnegativeConeT(prog.n_inequalities))
    for blk in prog.psd_blocks:
        w = _scaled_tri_weights(blk.size)
        A_parts.append(-(sp.diags(w) @ blk.coeffs).tocsc())
        b_parts.append(w * blk.const)
        cones.append(clarabel.PSDTriangleConeT(blk.size))
    A = sp.vstack(A_parts).tocsc()
    b = np.concatenate(b_parts)
    P = sp.csc_matrix((n, n))
    opts = clarabel.DefaultSettings()
    opts.verbose = settings.verbose
    opts.max_iter = settings.max_iter
    opts.tol_feas = settings.feas_tol
    opts.tol_gap_abs = settings.feas_tol
    opts.tol_gap_rel = settings.feas_tol
    opts.tol_ktratio = 1e-7
    # "AlmostSolved" then means the same as a retry at the relaxed tolerance
    relaxed = _relaxed_tol(settings.feas_tol)
    opts.reduced_tol_feas = relaxed
    opts.reduced_tol_gap_abs = relaxed
    opts.reduced_tol_gap_rel = relaxed
    opts.reduced_tol_ktratio = 1e-5
    opts.direct_solve_method = "faer"
    t0 = time.perf_counter()
    try:
        result = clarabel.DefaultSolver(P, sign * prog.objective, A, b, cones, opts).solve()
    except Exception as exc:  # backend failure is a status, not an exception
        return _failed(prog, f"backend error: {exc}", time.perf_counter() - t0)
    elapsed = time.perf_counter() - t0
    raw_status = str(result.status).split(".")[-1]
    status = _STATUS_MAP.get(raw_status, Status.FAILED)
    if raw_status == "AlmostSolved":
        raw_status = f"AlmostSolved (tolerance {relaxed:.0e})"
    x = np.array(result.x)
    z = np.array(result.z)
    m_eq = prog.n_equalities
    lam = -z[:m_eq] if prog.sense == "min" else z[:m_eq]
    mu = z[m_eq:m_eq + prog.n_inequalities]
    Zs = []
    pos = m_eq + prog.n_inequalities
    for blk in prog.psd_blocks:
        t = n_tri(blk.size)
        Zs.append(tri_to_sym(z[pos:pos + t] / _scaled_tri_weights(blk.size), blk.size))
        pos += t
    return _finish(prog, settings, status, x, lam, mu, Zs, raw_status, elapsed,
                   int(result.iterations))


_CVXOPT_STATUS = {
    "optimal": Status.OPTIMAL,
    "unknown": Status.INACCURATE,
    "primal infeasible": Status.INFEASIBLE,
    "dual infeasible": Status.UNBOUNDED,
}


def _to_cvxopt_sparse(M: sp.spmatrix):
    from cvxopt import spmatrix

    C = M.tocoo()
    return spmatrix([float(v) for v in C.data], [int(i) for i in C.row],
                    [int(j) for j in C.col], C.shape)


def _solve_cvxopt(prog: ConeProgram, settings: SolverSettings) -> Solution:
    from cvxopt import matrix, solvers

    n = prog.n_vars
    sign = 1.0 if prog.sense == "min" else -1.0
    # G x + s = h with s in R_+^l x S_+^{n_1} x ...; PSD blocks as full column-major vec
    G_parts = [prog.ineq_matrix.tocoo()]
    h_parts = [prog.ineq_rhs]
    for blk in prog.psd_blocks:
        size = blk.size
        pairs = triu_pairs(size)
        C = blk.coeffs.tocoo()
        rows, cols, vals = [], [], []
        for t, j, v in zip(C.row, C.col, C.data):
            i, k = pairs[t]
            rows.append(i + k * size)
            cols.append(j)
            vals.append(-v)
            if i != k:
                rows.append(k + i * size)
                cols.append(j)
                vals.append(-v)
        G_parts.append(sp.coo_matrix((vals, (rows, cols)), shape=(size * size, n)))
        H = tri_to_sym(blk.const, size)
        h_parts.append(H.ravel(order="F"))
    G = sp.vstack(G_parts)
    h = np.concatenate(h_parts)
    dims = {"l": prog.n_inequalities, "q": [], "s": [b.size for b in prog.psd_blocks]}
    opts = {"show_progress": settings.verbose, "abstol": settings.feas_tol,
            "reltol": settings.feas_tol, "feastol": settings.feas_tol,
            "maxiters": settings.max_iter}
    args = [matrix(sign * prog.objective), _to_cvxopt_sparse(G), matrix(h), dims]
    if prog.n_equalities:
        args += [_to_cvxopt_sparse(prog.eq_matrix), matrix(prog.eq_rhs)]
    t0 = time.perf_counter()
    try:
        result = solvers.conelp(*args, options=opts)
    except (ValueError, ArithmeticError) as exc:
        return _failed(prog, f"cvxopt error: {exc}", time.perf_counter() - t0)
    elapsed = time.perf_counter() - t0
    raw = result["status"]
    status = _CVXOPT_STATUS.get(raw, Status.FAILED)
    if result["x"] is None:
        # infeasibility certificates come without a primal point
        sol = _failed(prog, f"cvxopt {raw}", elapsed)
        if status in (Status.INFEASIBLE, Status.UNBOUNDED):
            sol.status = status
        return sol
    x = np.array(result["x"]).ravel()
    y = np.array(result["y"]).ravel() if prog.n_equalities else np.zeros(0)
    z = np.array(result["z"]).ravel()
    lam = -y if prog.sense == "min" else y
    mu = z[:prog.n_inequalities]
    Zs = []
    pos = prog.n_inequalities
    for blk in prog.psd_blocks:
        size = blk.size
        Z = z[pos:pos + size * size].reshape((size, size), order="F")
        Zs.append(np.tril(Z) + np.tril(Z, -1).T)
        pos += size * size
    return _finish(prog, settings, status, x, lam, mu, Zs, f"cvxopt {raw}", elapsed,
                   int(result.get("iterations", 0)))


def _failed(prog: ConeProgram, msg: str, elapsed: float) -> Solution:
    nan = float("nan")
    return Solution(Status.FAILED, np.full(prog.n_vars, np.nan), np.full(prog.n_equalities, np.nan),
                    [], nan, nan, nan, nan, nan, msg, elapsed)


def _recheck(prog: ConeProgram, sol: Solution, settings: SolverSettings) -> None:
    """Recompute residuals, duality gap and complementarity outside the backend."""
    x = sol.x
    scale_b = 1.0 + (np.abs(prog.eq_rhs).max() if prog.n_equalities else 0.0)
    eq_res = np.abs(prog.eq_matrix @ x - prog.eq_rhs).max() if prog.n_equalities else 0.0
    slack = prog.ineq_rhs - prog.ineq_matrix @ x
    ineq_viol = max(0.0, -slack.min()) if prog.n_inequalities else 0.0
    psd_viol = 0.0
    for M in sol.block_values:
        lam_min = np.linalg.eigvalsh(M)[0] if M.size else 0.0
        psd_viol = max(psd_viol, -lam_min / (1.0 + np.abs(M).max()))
    sol.primal_residual = max(eq_res / scale_b, ineq_viol / scale_b, psd_viol)

    # c - A^T lam -/+ F*(Z)
    adj = np.zeros(prog.n_vars)
    const_term = 0.0
    for blk, Z in zip(prog.psd_blocks, sol.psd_duals):
        zt = sym_to_tri(Z) * np.array([1.0 if i == j else 2.0 for i, j in triu_pairs(blk.size)])
        adj += blk.coeffs.T @ zt
        const_term += float(zt @ blk.const)
    sgn = 1.0 if prog.sense == "min" else -1.0
    mu = sol.ineq_duals
    stat = prog.objective - prog.eq_matrix.T @ sol.eq_duals - sgn * adj + sgn * (prog.ineq_matrix.T @ mu)
    scale_c = 1.0 + np.abs(prog.objective).max()
    dual_psd = max(0.0, -mu.min()) if mu.size else 0.0
    for Z in sol.psd_duals:
        if Z.size:
            dual_psd = max(dual_psd, -np.linalg.eigvalsh(Z)[0] / (1.0 + np.abs(Z).max()))
    sol.dual_residual = max(np.abs(stat).max() / scale_c, dual_psd)
    const_term += float(prog.ineq_rhs @ mu)
    sol.dual_objective = float(prog.eq_rhs @ sol.eq_duals - sgn * const_term + prog.obj_offset)
    sol.gap = abs(sol.objective - sol.dual_objective) / (1.0 + abs(sol.objective))
    compl = sum(float(np.sum(M * Z)) for M, Z in zip(sol.block_values, sol.psd_duals))
    compl += float(slack @ mu) if mu.size else 0.0
    compl = abs(compl) / (1.0 + abs(sol.objective))
    tol = settings.recheck_tol
    if sol.status == Status.OPTIMAL:
        bad = []
        if sol.primal_residual > tol:
            bad.append(f"primal residual {sol.primal_residual:.2e}")
        if sol.dual_residual > tol:
            bad.append(f"dual residual {sol.dual_residual:.2e}")
        if sol.gap > 10 * tol:
            bad.append(f"duality gap {sol.gap:.2e}")
        if compl > tol:
            bad.append(f"complementarity {compl:.2e}")
        if bad:
            sol.status = Status.INACCURATE
            sol.message += "; recheck failed: " + ", ".join(bad)


@dataclass(frozen=True)
class PsdCheck:
    lambda_min: float
    is_psd: bool


def psd_check(mat, tol: float = 1e-8) -> PsdCheck:
    M = np.asarray(mat, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("psd_check needs a square matrix")
    if not np.allclose(M, M.T, atol=1e-12 * (1 + np.abs(M).max())):
        raise ValueError("psd_check needs a symmetric matrix")
    lam = float(np.linalg.eigvalsh(M)[0]) if M.size else 0.0
    return PsdCheck(lam, lam >= -tol)


def numeric_rank(mat, tol_rel: float = 1e-6) -> int:
    """Number of singular values at least ``tol_rel * sigma_max``."""
    M = np.asarray(mat, dtype=float)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s >= tol_rel * s[0]))

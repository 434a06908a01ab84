"""Pointwise polyconvex envelopes through the moment-SOS hierarchy.

At a query matrix ``X`` the envelope is the minimum of ``integral f dmu``
over probability measures ``mu`` whose minors have mean ``p(X)``.  Replacing
measures by pseudo-moment vectors of order ``k`` gives an SDP lower bound; its
dual produces an affine-in-minors minorant ``v + <u, p>`` of ``f``.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

from .conic import ConeProgram, ProgramBuilder, Solution, SolverSettings, Status, n_tri, solve
from .linalg import pivoted_echelon
from .minors import MinorsMap, flatten, minors_eval, minors_symbolic, unflatten
from .poly_core import Exponent, Polynomial, VarSpace, monomial_basis
from .sos_certify import CONST, ParamPoly, _sos_program


class OrderTooSmall(ValueError):
    pass


class ExtractionFailed(Exception):
    pass


class EnvelopeStatus(str, Enum):
    EXACT_BY_MATCH = "ExactByMatch"
    EXACT_BY_FLAT = "ExactByFlat"
    LOWER_BOUND = "LowerBound"
    SOLVER_ISSUE = "SolverIssue"

    @property
    def exact(self) -> bool:
        return self in (EnvelopeStatus.EXACT_BY_MATCH, EnvelopeStatus.EXACT_BY_FLAT)


@dataclass(frozen=True)
class SemialgebraicDomain:
    """``{Z : g_i(Z) >= 0 for all i}``; no constraints means the whole space."""

    constraints: tuple[Polynomial, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        spaces = {g.space for g in self.constraints}
        if len(spaces) > 1:
            raise ValueError("domain constraints live on different variable spaces")

    @property
    def d_g(self) -> int:
        return max((g.degree for g in self.constraints), default=1) or 1

    def contains(self, X, tol: float = 1e-6) -> bool:
        x = flatten(np.asarray(X, dtype=float).tolist())
        return all(float(g.evaluate(x)) >= -tol for g in self.constraints)


WHOLE_SPACE = SemialgebraicDomain()


def moment_label(a: Exponent) -> str:
    sep = "," if any(e > 9 for e in a) else ""
    return "y_" + sep.join(str(e) for e in a)


@dataclass(frozen=True)
class MomentMatrix:
    order: int
    basis: tuple[Exponent, ...]
    matrix: np.ndarray


@dataclass(frozen=True)
class PseudoMomentVector:
    """Values ``y_a`` for every monomial of degree at most ``2k``."""

    space: VarSpace
    k: int
    values: dict

    def __getitem__(self, a: Exponent) -> float:
        return self.values[tuple(a)]

    def riesz(self, f: Polynomial) -> float:
        """The linear functional ``l_y(f) = sum_a f_a y_a``."""
        return float(sum(float(c) * self.values[a] for a, c in f.terms.items()))

    def as_array(self) -> np.ndarray:
        return np.array([self.values[a] for a in monomial_basis(self.space, 2 * self.k)])

    def labels(self) -> list[str]:
        return [moment_label(a) for a in monomial_basis(self.space, 2 * self.k)]

    @classmethod
    def from_atoms(cls, space: VarSpace, k: int, atoms: Sequence[tuple[np.ndarray, float]]
                   ) -> PseudoMomentVector:
        mons = monomial_basis(space, 2 * k)
        vals = np.zeros(len(mons))
        for X, w in atoms:
            vals += w * _monomial_values(np.asarray(flatten(np.asarray(X).tolist()), float), mons)
        return cls(space, k, dict(zip(mons, vals)))


def _monomial_values(x: np.ndarray, mons: Sequence[Exponent]) -> np.ndarray:
    E = np.array(mons, dtype=float)
    return np.prod(np.power(x[None, :], E), axis=1)


def moment_matrix(y: PseudoMomentVector, j: int | None = None) -> MomentMatrix:
    """``M_j(y)`` with entry ``(a, b) = y_{a+b}`` over the degree-``j`` basis."""
    j = y.k if j is None else j
    if not 0 <= j <= y.k:
        raise ValueError(f"moment matrix order {j} outside 0..{y.k}")
    basis = tuple(monomial_basis(y.space, j))
    M = np.array([[y.values[tuple(p + q for p, q in zip(a, b))] for b in basis] for a in basis])
    return MomentMatrix(j, basis, M)


@dataclass
class EnvelopeReport:
    X: np.ndarray
    k: int
    value: float
    f_value: float
    status: EnvelopeStatus
    dual_v: float = math.nan
    dual_u: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dual_source: str = ""
    multiplier_v: float = math.nan
    multiplier_u: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ranks: list[int] = field(default_factory=list)
    flat_rank: int | None = None
    flat_rank_strict: int | None = None
    polyconvex_at_X: bool = False
    atoms: list[tuple[np.ndarray, float]] = field(default_factory=list)
    moments: PseudoMomentVector | None = None
    message: str = ""
    solve_time: float = 0.0
    primal_status: Status | None = None
    dual_status: Status | None = None
    p_X: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def dual_value(self) -> float:
        """``v + <u, p(X)>``, the SOS lower bound."""
        if not self.dual_u.size:
            return math.nan
        return float(self.dual_v + self.dual_u @ self.p_X)

    @property
    def rank(self) -> int | None:
        return self.ranks[-1] if self.ranks else None

    def to_json(self) -> dict:
        def num(v):
            return None if v is None or not np.isfinite(v) else float(v)

        return {
            "X": np.asarray(self.X, float).tolist(),
            "k": self.k,
            "value": num(self.value),
            "f_value": num(self.f_value),
            "status": self.status.value,
            "polyconvex_at_X": self.polyconvex_at_X,
            "dual": {"v": num(self.dual_v), "u": [float(x) for x in self.dual_u],
                     "value": num(self.dual_value), "source": self.dual_source},
            "multipliers": {"v": num(self.multiplier_v),
                            "u": [float(x) for x in self.multiplier_u]},
            "ranks": list(self.ranks),
            "flat_rank": self.flat_rank,
            "flat_rank_strict": self.flat_rank_strict,
            "atoms": [{"X": np.asarray(A, float).tolist(), "weight": float(w)}
                      for A, w in self.atoms],
            "message": self.message,
            "solve_time": self.solve_time,
        }


# -- assembly ----------------------------------------------------------------

def minimal_order(f: Polynomial, dom: SemialgebraicDomain, mmap: MinorsMap) -> int:
    """Smallest ``k`` with ``2k >= max(deg f, deg g_i, m, n)``."""
    top = max([f.degree, mmap.m, mmap.n] + [g.degree for g in dom.constraints])
    return max(1, math.ceil(top / 2))


def _check_inputs(f: Polynomial, dom: SemialgebraicDomain, mmap: MinorsMap, k: int):
    if (f.space.m, f.space.n) != (mmap.m, mmap.n) or f.space.extra:
        raise ValueError("f must live on the matrix space of the minors map")
    for g in dom.constraints:
        if g.space != f.space:
            raise ValueError("domain constraints must share the space of f")
    kmin = minimal_order(f, dom, mmap)
    if k < kmin:
        raise OrderTooSmall(f"relaxation order {k} is below the minimal order {kmin}")


def _minor_values(mmap: MinorsMap, X) -> np.ndarray:
    return np.asarray([float(v) for v in minors_eval(mmap, X)])


def _loc_order(g: Polynomial, k: int) -> int:
    return k - math.ceil(g.degree / 2)


def build_moment_relaxation(f: Polynomial, dom: SemialgebraicDomain, mmap: MinorsMap,
                            X, k: int) -> ConeProgram:
    """Pseudo-moment relaxation of order ``k``.

    Variable ``j`` is ``y_a`` for the ``j``-th monomial of degree ``<= 2k`` in
    graded order.  Equalities: ``y_0 = 1`` and ``l_y(p_i) = p_i(X)``.
    """
    _check_inputs(f, dom, mmap, k)
    space = f.space
    mons = monomial_basis(space, 2 * k)
    index = {a: i for i, a in enumerate(mons)}
    b = ProgramBuilder()
    y = b.add_vars(len(mons), "y")
    b.labels[:] = [moment_label(a) for a in mons]
    b.add_equality({int(y[0]): 1.0}, 1.0)
    pX = _minor_values(mmap, X)
    for pi, val in zip(minors_symbolic(mmap, False), pX):
        b.add_equality({index[a]: float(c) for a, c in pi.terms.items()}, val)
    _add_localizing(b, index, space, k, None)
    for g in dom.constraints:
        if _loc_order(g, k) >= 0:
            _add_localizing(b, index, space, _loc_order(g, k), g)
    b.set_objective({index[a]: float(c) for a, c in f.terms.items()}, "min")
    return b.build()


def _add_localizing(b: ProgramBuilder, index: dict, space: VarSpace, j: int,
                    g: Polynomial | None) -> None:
    basis = monomial_basis(space, j)
    size = len(basis)
    entries = []
    for col in range(size):
        for row in range(col + 1):
            e = tuple(p + q for p, q in zip(basis[row], basis[col]))
            if g is None:
                entries.append({index[e]: 1.0})
            else:
                ent: dict[int, float] = {}
                for a, c in g.terms.items():
                    key = index[tuple(p + q for p, q in zip(e, a))]
                    ent[key] = ent.get(key, 0.0) + float(c)
                entries.append(ent)
    # entries were produced column by column over the upper triangle
    b.add_lmi(size, entries, label="M" if g is None else "L")


def build_dual_sos(f: Polynomial, dom: SemialgebraicDomain, mmap: MinorsMap,
                   X, k: int) -> ConeProgram:
    """``max v + <u, p(X)>`` s.t. ``f - v - <u, p> = s_0 + sum_i g_i s_i``.

    Variable 0 is ``v``, variables ``1..N`` are ``u``; the rest are Gram entries.
    """
    _check_inputs(f, dom, mmap, k)
    space = f.space
    b = ProgramBuilder()
    v = int(b.add_vars(1, "v")[0])
    u = [int(i) for i in b.add_vars(mmap.N, "u")]
    expr = ParamPoly(space).add_poly(f.to_float())
    expr.terms[space.zero_exponent()][v] -= 1.0
    for ui, pi in zip(u, minors_symbolic(mmap, False)):
        expr.add_poly(pi, -1.0, ui)
    mults = [(g.to_float(), monomial_basis(space, _loc_order(g, k)))
             for g in dom.constraints if _loc_order(g, k) >= 0]
    _sos_program(expr, monomial_basis(space, k), prune=False, builder=b, multipliers=mults)
    pX = _minor_values(mmap, X)
    obj = {v: 1.0}
    for ui, val in zip(u, pX):
        obj[ui] = float(val)
    b.set_objective(obj, "max")
    return b.build()


# -- exactness checks ---------------------------------------------------------

def _moment_vector(space: VarSpace, k: int, x: np.ndarray) -> PseudoMomentVector:
    mons = monomial_basis(space, 2 * k)
    return PseudoMomentVector(space, k, dict(zip(mons, (float(v) for v in x[:len(mons)]))))


def moment_ranks(y: PseudoMomentVector, rank_tol: float = 1e-4) -> list[int]:
    """Numerical ranks of the leading moment matrices ``M_0 .. M_k``.

    Eigenvalues below ``rank_tol * max(1, lambda_max(M_k))`` count as zero.  The
    default is loose because interior-point moments on a face without interior
    are only accurate to roughly the square root of the solver tolerance.
    """
    Mk = moment_matrix(y).matrix
    top = max(1.0, float(np.linalg.eigvalsh(Mk)[-1]))
    ranks = []
    for j in range(y.k + 1):
        size = len(monomial_basis(y.space, j))
        w = np.linalg.eigvalsh(Mk[:size, :size])
        ranks.append(int(np.sum(w > rank_tol * top)))
    return ranks


def check_match(report: EnvelopeReport, f: Polynomial | None = None, X=None,
                tol: float = 1e-6) -> bool:
    """``f_mom(X) == f(X)``: the relaxation is exact and ``f`` is polyconvex at ``X``."""
    if report.status == EnvelopeStatus.SOLVER_ISSUE or not np.isfinite(report.value):
        return False
    fX = report.f_value
    if f is not None:
        X = report.X if X is None else X
        fX = float(f.evaluate(flatten(np.asarray(X, float).tolist())))
    return abs(report.value - fX) <= tol * (1 + abs(fX))


def flat_gap(dom: SemialgebraicDomain, strict: bool = False) -> int:
    """Order gap of the flatness test; ``strict`` uses the unhalved constraint degree."""
    if strict:
        return dom.d_g
    return max(1, math.ceil(dom.d_g / 2))


def check_flat_extension(y: PseudoMomentVector, dom: SemialgebraicDomain = WHOLE_SPACE,
                         rank_tol: float = 1e-4, strict: bool = False) -> int | None:
    """Rank ``r`` if ``rank M_k(y) == rank M_{k-d}(y)``, else ``None``."""
    d = flat_gap(dom, strict)
    if y.k - d < 0:
        return None
    ranks = moment_ranks(y, rank_tol)
    return ranks[y.k] if ranks[y.k] == ranks[y.k - d] else None


def extract_atoms(y: PseudoMomentVector, r: int, seed: int | None = 0,
                  tol: float = 1e-5, rank_tol: float = 1e-4,
                  dom: SemialgebraicDomain = WHOLE_SPACE) -> list[tuple[np.ndarray, float]]:
    """Recover an ``r``-atomic measure from flat moments.

    Factor ``M_k = V V^T``, pick ``r`` pivot monomials of degree ``< k`` by
    pivoted QR, read off multiplication matrices and diagonalize a random
    combination of them with a Schur decomposition.
    """
    import scipy.linalg

    space = y.space
    Mm = moment_matrix(y)
    basis = Mm.basis
    w, Q = np.linalg.eigh(Mm.matrix)
    order = np.argsort(w)[::-1][:r]
    if r < 1 or w[order[-1]] <= 0:
        raise ExtractionFailed("moment matrix has no positive eigenvalues")
    V = Q[:, order] * np.sqrt(w[order])
    low = len(monomial_basis(space, y.k - 1)) if y.k >= 1 else 0
    _, piv = pivoted_echelon(V[:low].T, rank=r)
    if len(piv) != r:
        raise ExtractionFailed("could not find pivot monomials")
    U = np.linalg.solve(V[piv].T, V.T).T  # rows: monomials, U[piv] = I
    index = {a: i for i, a in enumerate(basis)}
    mults = []
    for var in range(space.total):
        Nv = np.empty((r, r))
        for row, pi in enumerate(piv):
            shifted = list(basis[pi])
            shifted[var] += 1
            Nv[row] = U[index[tuple(shifted)]]
        mults.append(Nv)
    scale = max(1.0, max(np.abs(Nv).max() for Nv in mults))
    for i in range(len(mults)):
        for j in range(i):
            if np.abs(mults[i] @ mults[j] - mults[j] @ mults[i]).max() > 1e-4 * scale:
                raise ExtractionFailed("multiplication matrices do not commute")
    rng = np.random.default_rng(seed)
    c = rng.random(len(mults))
    c /= c.sum()
    T, Z = scipy.linalg.schur(sum(ci * Ni for ci, Ni in zip(c, mults)), output="real")
    points = np.array([[Z[:, j] @ Nv @ Z[:, j] for Nv in mults] for j in range(r)])

    mons = monomial_basis(space, 2 * y.k)
    B = np.column_stack([_monomial_values(pt, mons) for pt in points])
    target = y.as_array()
    weights, *_ = np.linalg.lstsq(B, target, rcond=None)
    err = np.abs(B @ weights - target).max()
    if err > tol:
        raise ExtractionFailed(f"atoms reproduce the moments only to {err:.1e}")
    if weights.min() <= 0:
        raise ExtractionFailed("non-positive atom weight")
    if abs(weights.sum() - 1) > 1e-6:
        raise ExtractionFailed("atom weights do not sum to one")
    atoms = [(unflatten(pt, space.m, space.n), float(wt)) for pt, wt in zip(points, weights)]
    for A, _ in atoms:
        if not dom.contains(A):
            raise ExtractionFailed("extracted atom lies outside the domain")
    atoms.sort(key=lambda aw: tuple(np.round(aw[0].ravel(), 8)))
    return atoms


# -- drivers -----------------------------------------------------------------

def _dual_from_solution(sol: Solution, N: int) -> tuple[float, np.ndarray]:
    return float(sol.x[0]), np.asarray(sol.x[1:1 + N], dtype=float)


def envelope_at(f: Polynomial, mmap: MinorsMap, X, k: int | None = None,
                dom: SemialgebraicDomain = WHOLE_SPACE,
                settings: SolverSettings | None = None, rank_tol: float = 1e-4,
                match_tol: float = 1e-6, dual_solve: bool = True, extract: bool = True,
                seed: int | None = 0) -> EnvelopeReport:
    """Evaluate the order-``k`` relaxation of the polyconvex envelope at ``X``.

    The status is promoted in turn by the value-match test and by the flat
    extension test, so a flat solution reports ``ExactByFlat`` even when the
    values also match; ``polyconvex_at_X`` records the match separately.
    """
    k = minimal_order(f, dom, mmap) if k is None else k
    Xa = np.asarray(X, dtype=float)
    if np.abs(Xa).max(initial=0.0) > 10:
        warnings.warn("query matrix has entries above 10; moments may be badly scaled",
                      RuntimeWarning, stacklevel=2)
    fX = float(f.evaluate(flatten(Xa.tolist())))
    pX = _minor_values(mmap, X)
    prog = build_moment_relaxation(f, dom, mmap, X, k)
    sol = solve(prog, settings)
    report = EnvelopeReport(Xa, k, sol.objective, fX, EnvelopeStatus.LOWER_BOUND,
                            solve_time=sol.solve_time, primal_status=sol.status, p_X=pX)
    if sol.status not in (Status.OPTIMAL,):
        report.status = EnvelopeStatus.SOLVER_ISSUE
        report.message = f"moment relaxation: {sol.status.value} ({sol.message})"
        if sol.status != Status.INACCURATE:
            report.value = math.nan
            return report
    report.multiplier_v = float(sol.eq_duals[0])
    report.multiplier_u = np.asarray(sol.eq_duals[1:1 + mmap.N], dtype=float)
    report.dual_v, report.dual_u = report.multiplier_v, report.multiplier_u
    report.dual_source = "multipliers"
    if dual_solve:
        dsol = solve(build_dual_sos(f, dom, mmap, X, k), settings)
        report.dual_status = dsol.status
        report.solve_time += dsol.solve_time
        if dsol.status == Status.OPTIMAL:
            report.dual_v, report.dual_u = _dual_from_solution(dsol, mmap.N)
            report.dual_source = "dual solve"
    y = _moment_vector(f.space, k, sol.x)
    report.moments = y
    report.ranks = moment_ranks(y, rank_tol)
    if report.status == EnvelopeStatus.SOLVER_ISSUE:
        return report

    problems = []
    if report.value > fX + 1e-6 * (1 + abs(fX)):
        problems.append(f"relaxation value {report.value:.6g} exceeds f(X) = {fX:.6g}")
    dv = report.dual_value
    if np.isfinite(dv) and dv > report.value + 1e-5 * (1 + abs(report.value)):
        problems.append(f"dual bound {dv:.6g} exceeds relaxation value {report.value:.6g}")
    if problems:
        report.status = EnvelopeStatus.SOLVER_ISSUE
        report.message = "; ".join(problems)
        return report

    if check_match(report, tol=match_tol):
        report.polyconvex_at_X = True
        report.status = EnvelopeStatus.EXACT_BY_MATCH
    report.flat_rank = check_flat_extension(y, dom, rank_tol)
    report.flat_rank_strict = check_flat_extension(y, dom, rank_tol, strict=True)
    if report.flat_rank is not None:
        report.status = EnvelopeStatus.EXACT_BY_FLAT
        if extract:
            report.atoms, report.message = _atoms_with_polish(
                prog, y, report.flat_rank, seed, rank_tol, dom, settings)
    return report


def _atoms_with_polish(prog: ConeProgram, y: PseudoMomentVector, r: int, seed, rank_tol: float,
                       dom: SemialgebraicDomain, settings: SolverSettings | None):
    """Extract atoms; on failure re-solve once with a 100x tighter tolerance.

    Moments on a face without interior carry errors of order sqrt(tol), which
    can exceed the reconstruction tolerance even though the rank is right.
    """
    try:
        return extract_atoms(y, r, seed, rank_tol=rank_tol, dom=dom), ""
    except ExtractionFailed as exc:
        first = str(exc)
    base = settings or SolverSettings.from_env()
    tight = SolverSettings(feas_tol=base.feas_tol / 100, max_iter=base.max_iter,
                           verbose=base.verbose, recheck_tol=base.recheck_tol,
                           backend=base.backend)
    sol = solve(prog, tight)
    if sol.status != Status.OPTIMAL:
        return [], f"atom extraction failed: {first}"
    y2 = _moment_vector(y.space, y.k, sol.x)
    try:
        return extract_atoms(y2, r, seed, rank_tol=rank_tol, dom=dom), ""
    except ExtractionFailed as exc:
        return [], f"atom extraction failed: {exc}"


def hierarchy(f: Polynomial, mmap: MinorsMap, X, k_min: int | None = None, k_max: int = 4,
              dom: SemialgebraicDomain = WHOLE_SPACE, **kwargs) -> list[EnvelopeReport]:
    """Orders ``k_min..k_max``; stops at the first exact order."""
    kmin = minimal_order(f, dom, mmap)
    k_min = kmin if k_min is None else k_min
    if k_min < kmin:
        raise OrderTooSmall(f"relaxation order {k_min} is below the minimal order {kmin}")
    reports = []
    for k in range(k_min, k_max + 1):
        rep = envelope_at(f, mmap, X, k, dom, **kwargs)
        reports.append(rep)
        if rep.status.exact:
            break
    return reports


def affine_path(X0, X1) -> Callable[[float], np.ndarray]:
    """``t -> X0 + t * X1``."""
    A = np.asarray(X0, dtype=float)
    B = np.asarray(X1, dtype=float)
    return lambda t: A + t * B


@dataclass(frozen=True)
class SweepRow:
    t: float
    value: float
    rank: int | None
    status: EnvelopeStatus
    report: EnvelopeReport | None = None


def sweep(f: Polynomial, mmap: MinorsMap, path: Callable[[float], np.ndarray],
          grid: Iterable[float], k: int | None = None,
          dom: SemialgebraicDomain = WHOLE_SPACE, **kwargs) -> list[SweepRow]:
    """One envelope evaluation per grid point, in increasing ``t``; never aborts."""
    rows = []
    for t in sorted(float(t) for t in grid):
        try:
            rep = envelope_at(f, mmap, path(t), k, dom, **kwargs)
            rows.append(SweepRow(t, rep.value, rep.rank, rep.status, rep))
        except (ValueError, np.linalg.LinAlgError) as exc:
            rows.append(SweepRow(t, math.nan, None, EnvelopeStatus.SOLVER_ISSUE,
                                 EnvelopeReport(np.asarray(path(t)), k or 0, math.nan, math.nan,
                                                EnvelopeStatus.SOLVER_ISSUE, message=str(exc))))
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["t", "value", "rank", "status"])
    for r in rows:
        writer.writerow([repr(r.t), repr(r.value), "" if r.rank is None else r.rank,
                         r.status.value])
    return out.getvalue()

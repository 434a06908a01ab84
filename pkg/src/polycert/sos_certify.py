"""Sum-of-squares certificates for polynomials and for polyconvexity.

Every search is compiled to a :class:`~polycert.conic.ConeProgram` whose
unknowns are the free polynomial coefficients (of ``q`` or ``g``) and the
entries of one Gram matrix.  Numerical certificates are always re-checked
here, never trusted from the solver, and can be rounded to exact rational
sum-of-squares identities.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .conic import ProgramBuilder, Solution, SolverSettings, Status, solve
from .linalg import (from_domain_vector, min_norm_correction, pivoted_echelon, range_basis,
                     simplest_rational, to_domain)
from .minors import MinorsMap, minors_symbolic
from .poly_core import (Exponent, Polynomial, VarSpace, bregman, exponent_key, hessian_form,
                   monomial_basis)

CONST = -1  # key of the constant part in a parametric coefficient


class Inconclusive(Exception):
    """No certificate at this degree; a larger degree may still succeed."""

    def __init__(self, message: str, status: Status | None = None):
        super().__init__(message)
        self.status = status


class RoundingFailed(Exception):
    pass


@dataclass(frozen=True)
class GramCertificate:
    """``target = <b, Q b>`` up to ``residual`` for the monomial vector ``b``."""

    basis: tuple[Exponent, ...]
    Q: np.ndarray
    target: Polynomial
    residual: float = field(init=False)
    lambda_min: float = field(init=False)

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if Q.shape != (len(self.basis), len(self.basis)):
            raise ValueError("Gram matrix does not match the basis")
        Q = 0.5 * (Q + Q.T)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "residual", gram_residual(self.basis, Q, self.target))
        lam = float(np.linalg.eigvalsh(Q)[0]) if Q.size else 0.0
        object.__setattr__(self, "lambda_min", lam)

    @property
    def space(self) -> VarSpace:
        return self.target.space

    def gram_polynomial(self) -> Polynomial:
        return gram_to_polynomial(self.basis, self.Q, self.space)

    def is_valid(self, res_tol: float = 1e-6, eig_tol: float = 1e-8) -> bool:
        return self.residual <= res_tol and self.lambda_min >= -eig_tol


@dataclass(frozen=True)
class PolyconvexityCertificate:
    kind: str  # "SOSPolyconvex" or "LiftedSOSPolyconvex"
    witness: object  # list[Polynomial] for q, Polynomial for g
    gram: GramCertificate
    degree: int
    minors: MinorsMap

    def rounded_witness(self, denominator: int = 10 ** 4):
        if isinstance(self.witness, Polynomial):
            return rationalize(self.witness, denominator)
        return [rationalize(q, denominator) for q in self.witness]


@dataclass(frozen=True)
class ExactSOSIdentity:
    """``target == sum(c * s**2 for c, s in squares)`` over the rationals."""

    target: Polynomial
    squares: tuple[tuple[Fraction, Polynomial], ...]

    def expand(self) -> Polynomial:
        total = Polynomial.zero(self.target.space)
        for c, s in self.squares:
            total = total + (s * s).scale(c)
        return total


# -- helpers on Gram representations -----------------------------------------

def _add(a: Exponent, b: Exponent) -> Exponent:
    return tuple(x + y for x, y in zip(a, b))


def gram_to_polynomial(basis: Sequence[Exponent], Q: np.ndarray, space: VarSpace) -> Polynomial:
    terms: dict[Exponent, float] = defaultdict(float)
    for i, a in enumerate(basis):
        for j, b in enumerate(basis):
            if Q[i, j]:
                terms[_add(a, b)] += Q[i, j]
    return Polynomial(space, terms, exact=False)


def psd_clip(Q: np.ndarray) -> np.ndarray:
    """Nearest PSD matrix in Frobenius norm (negative eigenvalues set to zero)."""
    w, V = np.linalg.eigh(0.5 * (Q + Q.T))
    return (V * np.maximum(w, 0.0)) @ V.T


def gram_residual(basis: Sequence[Exponent], Q: np.ndarray, target: Polynomial) -> float:
    """Max coefficient mismatch between ``<b, Q b>`` and ``target``."""
    diff = gram_to_polynomial(basis, Q, target.space) - target.to_float()
    return max((abs(c) for c in diff.terms.values()), default=0.0)


def rationalize(p: Polynomial, denominator: int = 10 ** 4) -> Polynomial:
    """Continued-fraction best approximants of every coefficient."""
    return Polynomial(p.space, {a: Fraction(c).limit_denominator(denominator)
                                for a, c in p.terms.items()}, exact=True)


def prune_basis(basis: Sequence[Exponent], support: Iterable[Exponent]) -> list[Exponent]:
    """Drop monomials whose square can never be matched.

    If ``2a`` is outside the support of the target and is not the sum of two
    *distinct* basis monomials, the diagonal Gram entry of ``a`` is forced to
    zero, hence its whole row.  Repeated until stable.
    """
    support = set(support)
    current = list(basis)
    while True:
        pair_sums: dict[Exponent, int] = defaultdict(int)
        for i, a in enumerate(current):
            for b in current[i + 1:]:
                pair_sums[_add(a, b)] += 1
        keep = [a for a in current if _add(a, a) in support or pair_sums.get(_add(a, a), 0)]
        if len(keep) == len(current):
            return keep
        current = keep


# -- parametric polynomials -------------------------------------------------

class ParamPoly:
    """Polynomial whose coefficients are affine in SDP unknowns.

    ``terms[a][j]`` is the coefficient of unknown ``j`` in the coefficient of
    monomial ``a``; ``j == CONST`` holds the constant part.
    """

    def __init__(self, space: VarSpace):
        self.space = space
        self.terms: dict[Exponent, dict[int, float]] = defaultdict(lambda: defaultdict(float))

    def add_poly(self, p: Polynomial, scale: float = 1.0, var: int = CONST) -> ParamPoly:
        for a, c in p.terms.items():
            self.terms[a][var] += scale * float(c)
        return self

    def support(self) -> set[Exponent]:
        return {a for a, row in self.terms.items() if any(v != 0 for v in row.values())}

    def resolve(self, x: np.ndarray) -> Polynomial:
        out = {}
        for a, row in self.terms.items():
            v = sum(c * (1.0 if j == CONST else x[j]) for j, c in row.items())
            if v != 0:
                out[a] = v
        return Polynomial(self.space, out, exact=False)


@dataclass
class _SosProblem:
    builder: ProgramBuilder
    expr: ParamPoly
    basis: list[Exponent]
    grid: np.ndarray | None
    # (multiplier, basis, grid) of every localizing Gram block
    extra: list = field(default_factory=list)
    # a monomial of expr that no Gram block can produce
    unmatched: Exponent | None = None


def _gram_terms(basis: Sequence[Exponent], grid: np.ndarray, weight: Polynomial | None,
                out: dict[Exponent, dict[int, float]]) -> None:
    """Accumulate the coefficients of ``weight * <b, Q b>`` (``weight=None`` means 1)."""
    wterms = weight.terms.items() if weight is not None else [(None, 1.0)]
    for i, a in enumerate(basis):
        for j in range(i, len(basis)):
            e = _add(a, basis[j])
            c0 = 1.0 if i == j else 2.0
            var = int(grid[i, j])
            for mon, c in wterms:
                out[e if mon is None else _add(e, mon)][var] += c0 * float(c)


def _sos_program(expr: ParamPoly, basis: Sequence[Exponent], prune: bool = True,
                 builder: ProgramBuilder | None = None,
                 multipliers: Sequence[tuple[Polynomial, Sequence[Exponent]]] = ()
                 ) -> _SosProblem:
    """Add ``expr == <b, Q b> + sum_i g_i <b_i, Q_i b_i>`` with all ``Q >= 0``.

    Basis pruning is only valid without multipliers and is skipped otherwise.
    """
    builder = builder or ProgramBuilder()
    basis = sorted(basis, key=exponent_key)
    if prune and not multipliers:
        basis = prune_basis(basis, expr.support())
    gram_terms: dict[Exponent, dict[int, float]] = defaultdict(lambda: defaultdict(float))
    grid = None
    if basis:
        grid = builder.add_psd_variable(len(basis), "Q")
        _gram_terms(basis, grid, None, gram_terms)
    extra = []
    unmatched = None
    for k, (g, b) in enumerate(multipliers):
        b = sorted(b, key=exponent_key)
        if not b:
            continue
        gk = builder.add_psd_variable(len(b), f"Q{k + 1}")
        _gram_terms(b, gk, g, gram_terms)
        extra.append((g, b, gk))
    for mon in set(expr.terms) | set(gram_terms):
        row: dict[int, float] = defaultdict(float)
        rhs = 0.0
        for j, c in expr.terms.get(mon, {}).items():
            if j == CONST:
                rhs -= c
            else:
                row[j] += c
        for j, c in gram_terms.get(mon, {}).items():
            row[j] -= c
        row = {j: c for j, c in row.items() if c != 0}
        if not row:
            if rhs != 0 and unmatched is None:
                unmatched = mon
            continue
        builder.add_equality(row, rhs)
    return _SosProblem(builder, expr, basis, grid, extra, unmatched)


def _gram_from_solution(problem: _SosProblem, sol: Solution) -> np.ndarray:
    if problem.grid is None:
        return np.zeros((0, 0))
    return sol.x[problem.grid]


def _solve_sos(problem: _SosProblem, settings: SolverSettings | None,
               what: str) -> tuple[Solution, GramCertificate]:
    if problem.unmatched is not None:
        raise Inconclusive(f"{what}: monomial {problem.unmatched} is outside the Gram basis",
                           Status.INFEASIBLE)
    prog = problem.builder.build()
    sol = solve(prog, settings)
    if sol.status in (Status.INFEASIBLE, Status.FAILED, Status.UNBOUNDED):
        raise Inconclusive(f"{what}: SDP {sol.status.value} ({sol.message})", sol.status)
    target = problem.expr.resolve(sol.x)
    cert = GramCertificate(tuple(problem.basis), _gram_from_solution(problem, sol), target)
    if cert.residual <= 1e-6 and cert.lambda_min < -1e-8:
        # Gram faces without interior: IPM iterates sit slightly outside the cone
        cert = GramCertificate(cert.basis, psd_clip(cert.Q), target)
    if not cert.is_valid():
        raise Inconclusive(f"{what}: no valid certificate (status {sol.status.value}, "
                           f"residual {cert.residual:.2e}, lambda_min {cert.lambda_min:.2e})",
                           sol.status)
    return sol, cert


# -- public certification API -----------------------------------------------

def sos_decompose(f: Polynomial, two_d: int | None = None,
                  settings: SolverSettings | None = None,
                  objective: str = "trace") -> GramCertificate:
    """Gram certificate that ``f`` is a sum of squares of polynomials of degree ``d``.

    ``objective="trace"`` minimizes the trace of the Gram matrix, a convex proxy
    for rank that favours decompositions with few squares.  ``"feasibility"``
    returns whatever point the solver lands on, usually of maximal rank.  If the
    trace problem does not solve to a verified optimum, the feasibility
    problem is solved instead.
    """
    if objective not in ("trace", "feasibility"):
        raise ValueError(f"unknown objective {objective!r}")
    deg = max(f.degree, 0)
    two_d = two_d if two_d is not None else deg + (deg % 2)
    if two_d % 2 or two_d < deg:
        raise ValueError(f"need an even degree bound >= deg f = {deg}, got {two_d}")
    if f.is_zero():
        return GramCertificate((), np.zeros((0, 0)), f.to_float())
    basis = monomial_basis(f.space, two_d // 2)
    if objective == "trace":
        problem = _sos_program(ParamPoly(f.space).add_poly(f), basis)
        if problem.grid is not None:
            problem.builder.set_objective({int(problem.grid[i, i]): 1.0
                                           for i in range(len(problem.basis))})
        try:
            sol, cert = _solve_sos(problem, settings, "SOS")
            if sol.status == Status.OPTIMAL:
                return cert
        except Inconclusive:
            pass
        # trace minimization can stall numerically where plain feasibility does not
    problem = _sos_program(ParamPoly(f.space).add_poly(f), basis)
    return _solve_sos(problem, settings, "SOS")[1]


def check_sos_convex(g: Polynomial, form: str = "hessian",
                     settings: SolverSettings | None = None) -> GramCertificate:
    """Certify SOS-convexity via the Hessian form ``<y, H(x) y>`` or the Bregman divergence."""
    if g.degree <= 1:
        big = g.space.doubled()
        return GramCertificate((), np.zeros((0, 0)), Polynomial.zero(big, exact=False))
    if form == "hessian":
        h = hessian_form(g)
    elif form == "bregman":
        h = bregman(g)
    else:
        raise ValueError("form must be 'hessian' or 'bregman'")
    if g.degree % 2:
        raise Inconclusive("odd-degree polynomial of degree > 1 is never convex")
    return sos_decompose(h, settings=settings)


def polyconvexity_target(f: Polynomial, mmap: MinorsMap,
                         q: Sequence[Polynomial]) -> Polynomial:
    """``f(X) - f(Y) - <q(Y), p(X) - p(Y)>`` in the doubled ``(X, Y)`` space."""
    space = f.space
    big = space.doubled()
    t = space.total
    exact = f.exact
    px = minors_symbolic(mmap, exact, big, 0)
    py = minors_symbolic(mmap, exact, big, t)
    out = f.embed(big, 0) - f.embed(big, t)
    for qi, a, b in zip(q, px, py):
        if qi.exact != exact:
            qi = qi.to_float() if not exact else qi
        out = out - qi.embed(big, t) * (a - b)
    return out


def _sos_pc_problem(f: Polynomial, mmap: MinorsMap, deg_q: int):
    space = f.space
    if (space.m, space.n) != (mmap.m, mmap.n) or space.extra:
        raise ValueError("f must live on the matrix space of the minors map")
    big = space.doubled()
    t = space.total
    ff = f.to_float()
    px = minors_symbolic(mmap, False, big, 0)
    py = minors_symbolic(mmap, False, big, t)
    builder = ProgramBuilder()
    expr = ParamPoly(big)
    expr.add_poly(ff.embed(big, 0)).add_poly(ff.embed(big, t), -1.0)
    q_basis = monomial_basis(space, deg_q)
    q_vars = []
    for i in range(mmap.N):
        idx = builder.add_vars(len(q_basis), f"q{i + 1}")
        q_vars.append(idx)
        diff = px[i] - py[i]
        for alpha, var in zip(q_basis, idx):
            shifted = Polynomial(big, {_add(a, (0,) * t + alpha): c for a, c in diff.terms.items()},
                                 exact=False)
            expr.add_poly(shifted, -1.0, int(var))
    half = math.ceil(max(f.degree, deg_q + mmap.max_order) / 2)
    problem = _sos_program(expr, monomial_basis(big, half), builder=builder)
    return problem, q_basis, q_vars


def certify_sos_polyconvex(f: Polynomial, mmap: MinorsMap, deg_q: int,
                           select: str = "l1", snap: bool = True,
                           settings: SolverSettings | None = None) -> PolyconvexityCertificate:
    """Search for a polynomial map ``q`` of degree ``deg_q`` making
    ``f(X) - f(Y) - <q(Y), p(X) - p(Y)>`` a sum of squares.

    ``q`` is rarely unique.  ``select="l1"`` returns the feasible ``q`` with the
    smallest sum of absolute coefficients, which favours sparse, readable
    multipliers; ``select="feasible"`` returns whatever interior point the
    solver lands on.  With ``snap`` the coefficients of ``q`` are replaced by
    nearby simple rationals when the SOS condition still certifies with them;
    the returned ``q`` is then exact.
    """
    if select not in ("l1", "feasible"):
        raise ValueError("select must be 'l1' or 'feasible'")
    problem, q_basis, q_vars = _sos_pc_problem(f, mmap, deg_q)
    if select == "l1":
        builder = problem.builder
        all_q = [int(v) for idx in q_vars for v in idx]
        bounds = builder.add_vars(len(all_q), "abs_q")
        for v, t in zip(all_q, bounds):
            builder.add_inequality({v: 1.0, int(t): -1.0}, 0.0)
            builder.add_inequality({v: -1.0, int(t): -1.0}, 0.0)
        builder.set_objective({int(t): 1.0 for t in bounds})
    sol, gram = _solve_sos(problem, settings, "SOS polyconvexity")
    q = [Polynomial(f.space, {a: sol.x[v] for a, v in zip(q_basis, idx)}, exact=False)
         for idx in q_vars]
    if snap:
        snapped = _snap_multipliers(f, mmap, q, settings)
        if snapped is not None:
            q, gram = snapped
    return PolyconvexityCertificate("SOSPolyconvex", q, gram, deg_q, mmap)


def _snap_multipliers(f: Polynomial, mmap: MinorsMap, q: Sequence[Polynomial],
                      settings: SolverSettings | None, tol: float = 1e-3):
    """Simplest rational ``q`` within ``tol`` that still certifies, or ``None``."""
    fx = f if f.exact else rationalize(f)
    cand = [Polynomial(qi.space, {a: simplest_rational(c, tol) for a, c in qi.terms.items()},
                       exact=True) for qi in q]
    target = polyconvexity_target(fx, mmap, cand)
    try:
        return cand, sos_decompose(target, settings=settings)
    except Inconclusive:
        return None


def _weight(gamma: Exponent, orders: Sequence[int]) -> int:
    return sum(e * o for e, o in zip(gamma, orders))


def certify_lifted_sos_polyconvex(f: Polynomial, mmap: MinorsMap, deg_g: int,
                                  support: str = "weighted",
                                  settings: SolverSettings | None = None
                                  ) -> PolyconvexityCertificate:
    """Search for an SOS-convex ``g`` of degree ``deg_g`` on ``R^N`` with ``g o p = f``.

    ``support="weighted"`` restricts ``g`` to monomials whose degree after
    composition (minor orders as weights) is at most ``deg f``; ``"full"``
    allows every monomial of degree ``deg_g``.
    """
    if deg_g % 2 or deg_g < 2:
        raise ValueError("deg_g must be even and at least 2")
    if support not in ("weighted", "full"):
        raise ValueError("support must be 'weighted' or 'full'")
    space = f.space
    qspace = VarSpace(1, mmap.N)
    hspace = qspace.doubled()
    N = mmap.N
    orders = mmap.orders()
    gammas = monomial_basis(qspace, deg_g)
    if support == "weighted":
        gammas = [g for g in gammas if _weight(g, orders) <= f.degree]
    builder = ProgramBuilder()
    g_vars = builder.add_vars(len(gammas), "g")

    # g o p == f, coefficientwise
    p = minors_symbolic(mmap, False)
    pow_cache: dict[tuple[int, int], Polynomial] = {}

    def ppow(i, e):
        if (i, e) not in pow_cache:
            pow_cache[(i, e)] = p[i] ** e
        return pow_cache[(i, e)]

    comp: dict[Exponent, dict[int, float]] = defaultdict(dict)
    for gamma, var in zip(gammas, g_vars):
        term = Polynomial.constant(space, 1.0, exact=False)
        for i, e in enumerate(gamma):
            if e:
                term = term * ppow(i, e)
        for a, c in term.terms.items():
            comp[a][int(var)] = c
    for a in set(comp) | set(f.terms):
        builder.add_equality(comp.get(a, {}), float(f.coefficient(a)))

    # Hessian form <y, H_g(q) y> as a parametric polynomial in (q, y)
    expr = ParamPoly(hspace)
    for gamma, var in zip(gammas, g_vars):
        for i in range(N):
            if not gamma[i]:
                continue
            for j in range(i, N):
                if i == j:
                    if gamma[i] < 2:
                        continue
                    c = gamma[i] * (gamma[i] - 1)
                else:
                    if not gamma[j]:
                        continue
                    c = 2 * gamma[i] * gamma[j]
                mon = list(gamma) + [0] * N
                mon[i] -= 1
                mon[j] -= 1
                mon[N + i] += 1
                mon[N + j] += 1
                expr.terms[tuple(mon)][int(var)] += c
    half = (deg_g - 2) // 2
    basis = [tuple(alpha) + tuple(1 if k == i else 0 for k in range(N))
             for i in range(N) for alpha in monomial_basis(qspace, half)]
    problem = _sos_program(expr, basis, builder=builder)
    sol, gram = _solve_sos(problem, settings, "lifted SOS polyconvexity")
    eq_res = np.abs(problem.builder.build().eq_matrix @ sol.x
                    - problem.builder.build().eq_rhs).max() if comp else 0.0
    g = Polynomial(qspace, {gm: sol.x[v] for gm, v in zip(gammas, g_vars)}, exact=False)
    if eq_res > 1e-6:
        raise Inconclusive(f"composition g o p = f violated by {eq_res:.2e}", sol.status)
    return PolyconvexityCertificate("LiftedSOSPolyconvex", g, gram, deg_g, mmap)


def compose_with_minors(g: Polynomial, mmap: MinorsMap, exact: bool | None = None) -> Polynomial:
    """``g o p`` as a polynomial on the matrix space."""
    exact = g.exact if exact is None else exact
    p = minors_symbolic(mmap, exact)
    return g.substitute(dict(enumerate(p)), mmap.space)


def lifted_to_first_order_q(g: Polynomial, mmap: MinorsMap) -> list[Polynomial]:
    """``q = grad g o p``, the multiplier map induced by a lifted certificate."""
    return [compose_with_minors(g.diff(i), mmap) for i in range(mmap.N)]


# -- exact rounding and verification ----------------------------------------

def round_to_rational(cert: GramCertificate, denominator: int = 10 ** 4,
                      target: Polynomial | None = None,
                      rank_tol: float = 1e-7, basis_tol: float = 1e-4) -> ExactSOSIdentity:
    """Turn a numerical Gram certificate into an exact rational SOS identity.

    The numerical range of ``Q`` is given a rational basis ``W`` (rows of a
    reduced echelon form, rounded), so that ``Q = W^T R W`` keeps the exact
    kernel of a singular Gram matrix.  ``R`` is rounded entrywise, corrected
    by the exact minimum-norm solution of the coefficient equations and
    factored by a rational ``LDL^T``.  When ``Q`` is nonsingular ``W = I``.
    Entries of ``W`` are the simplest continued-fraction convergents within
    ``basis_tol``; everything else uses best approximants up to ``denominator``.
    """
    if not cert.residual <= 1e-6:
        raise RoundingFailed(f"certificate residual {cert.residual:.2e} exceeds 1e-6")
    if target is None:
        target = rationalize(cert.target, denominator)
    if not target.exact:
        raise TypeError("target must be an exact polynomial")
    space = target.space
    basis = list(cert.basis)
    V, _ = range_basis(cert.Q, rank_tol)
    r = V.shape[1]
    if r == 0:
        identity = ExactSOSIdentity(target, ())
        if not verify_identity(target, identity):
            raise RoundingFailed("zero Gram matrix but nonzero target")
        return identity
    Wf, piv = pivoted_echelon(V.T, rank=r)
    if len(piv) != r:
        raise RoundingFailed("could not find a rational basis of the Gram range")
    W = [[simplest_rational(v, basis_tol, denominator) for v in row] for row in Wf]
    for k, c in enumerate(piv):
        for kk in range(r):
            W[kk][c] = Fraction(int(kk == k))
    w_polys = [Polynomial(space, {basis[j]: W[k][j] for j in range(len(basis)) if W[k][j]},
                          exact=True) for k in range(r)]

    # unknowns: upper triangle of R; column (k, l) holds the coefficients of w_k w_l
    pairs = [(k, l) for k in range(r) for l in range(k, r)]
    columns = []
    monomials: dict[Exponent, int] = {}
    for k, l in pairs:
        prod = w_polys[k] * w_polys[l]
        if k != l:
            prod = prod.scale(2)
        columns.append(prod)
        for mon in prod.terms:
            monomials.setdefault(mon, len(monomials))
    for mon in target.terms:
        if mon not in monomials:
            raise RoundingFailed(f"monomial {mon} cannot be represented by the basis")
    rows = [[Fraction(0)] * len(pairs) for _ in monomials]
    for col, prod in enumerate(columns):
        for mon, c in prod.terms.items():
            rows[monomials[mon]][col] = c
    A = to_domain(rows, len(pairs))
    R0 = [Fraction(float(cert.Q[piv[k], piv[l]])).limit_denominator(denominator)
          for k, l in pairs]
    rhs = [Fraction(0)] * len(monomials)
    for mon, c in target.terms.items():
        rhs[monomials[mon]] = c
    resid = [t - sum(a * x for a, x in zip(row, R0) if a) for row, t in zip(rows, rhs)]
    delta = from_domain_vector(min_norm_correction(A, to_domain([[v] for v in resid], 1)))
    R = {}
    for (k, l), v, d in zip(pairs, R0, delta):
        R[(k, l)] = R[(l, k)] = v + d

    squares = _rational_ldl(R, list(range(r)), w_polys)
    identity = ExactSOSIdentity(target, tuple(squares))
    if not verify_identity(target, identity):
        raise RoundingFailed("rounded decomposition does not reproduce the target")
    return identity


def _rational_ldl(Q: dict, active: list[int],
                  polys: Sequence[Polynomial]) -> list[tuple[Fraction, Polynomial]]:
    """Exact ``LDL^T`` with diagonal pivoting; a zero pivot needs a zero column."""
    A = dict(Q)
    remaining = list(active)
    squares = []
    while remaining:
        piv = max(remaining, key=lambda i: A[(i, i)])
        d = A[(piv, piv)]
        if d < 0:
            raise RoundingFailed("rounded Gram matrix is not positive semidefinite")
        if d == 0:
            if any(A[(i, j)] != 0 for i in remaining for j in remaining):
                raise RoundingFailed("rounded Gram matrix is not positive semidefinite")
            break
        remaining.remove(piv)
        col = {i: A[(i, piv)] / d for i in remaining}
        s = polys[piv]
        for i, l in col.items():
            if l:
                s = s + polys[i].scale(l)
        squares.append((d, s))
        for i in remaining:
            if not col[i]:
                continue
            for j in remaining:
                if col[j]:
                    A[(i, j)] -= d * col[i] * col[j]
    return squares


def identity_difference(lhs: Polynomial, identity: ExactSOSIdentity) -> Polynomial:
    if not lhs.exact:
        raise TypeError("identity verification needs exact polynomials")
    return lhs - identity.expand()


def verify_identity(lhs: Polynomial, identity: ExactSOSIdentity) -> bool:
    """Exact check of ``lhs == sum c_i s_i^2``; no tolerance involved."""
    if any(c < 0 for c, _ in identity.squares):
        return False
    return identity_difference(lhs, identity).is_zero()


def exact_sos_polyconvex_identity(f: Polynomial, cert: PolyconvexityCertificate,
                                  denominator: int = 10 ** 4) -> tuple[list[Polynomial],
                                                                       ExactSOSIdentity]:
    """Round ``q`` and the Gram matrix of an SOS-polyconvexity certificate."""
    if cert.kind != "SOSPolyconvex":
        raise ValueError("expected an SOS polyconvexity certificate")
    q = [qi if qi.exact else rationalize(qi, denominator) for qi in cert.witness]
    fx = f if f.exact else rationalize(f, denominator)
    target = polyconvexity_target(fx, cert.minors, q)
    return q, round_to_rational(cert.gram, denominator, target)


def certificate_to_json(cert: GramCertificate | PolyconvexityCertificate) -> dict:
    """Serializable form: basis exponents, dense lower-triangle Q, residual, witness."""
    gram = cert if isinstance(cert, GramCertificate) else cert.gram
    n = len(gram.basis)
    doc = {
        "basis": [list(a) for a in gram.basis],
        "gram_lower": [[float(gram.Q[i, j]) for j in range(i + 1)] for i in range(n)],
        "residual": float(gram.residual),
        "lambda_min": float(gram.lambda_min),
        "target": gram.target.to_text(),
    }
    if isinstance(cert, PolyconvexityCertificate):
        doc["kind"] = cert.kind
        doc["degree"] = cert.degree
        doc["minors"] = [ix.label() for ix in cert.minors.indices]
        if isinstance(cert.witness, Polynomial):
            doc["witness"] = {"g": cert.witness.to_text(),
                              "g_rounded": cert.rounded_witness().to_text()}
        else:
            doc["witness"] = {"q": [q.to_text() for q in cert.witness],
                              "q_rounded": [q.to_text() for q in cert.rounded_witness()]}
    else:
        doc["kind"] = "SOS"
    return doc

"""Independent reference computations for the test suite.

Nothing here touches the polynomial, minors or solver code under test: the
example functions are written out in plain numpy and the discrete-measure
minimization uses scipy's SLSQP.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import minimize

EPS = 0.5
I2 = np.eye(2)
WELLS_EPS = [np.array([[1.0, EPS], [0.0, 1.0]]), np.array([[1.0, -EPS], [0.0, 1.0]])]
WELLS_QUAD = [np.diag([1.0, 1.0]), np.diag([-1.0, 1.0]), np.diag([1.0, -1.0]), np.diag([-1.0, -1.0])]


def fro2(A) -> float:
    A = np.asarray(A, dtype=float)
    return float(np.sum(A * A))


def adm(X) -> float:
    return fro2(X) * (fro2(X) - 2 * np.linalg.det(X))


def det_squared(X) -> float:
    return float(np.linalg.det(X)) ** 2


def double_well(X) -> float:
    n = len(X)
    return fro2(np.asarray(X) - np.eye(n)) * fro2(np.asarray(X) + np.eye(n))


def eps_double_well(X) -> float:
    return fro2(X - WELLS_EPS[0]) * fro2(X - WELLS_EPS[1])


def quad_well(X) -> float:
    return float(np.prod([fro2(X - W) for W in WELLS_QUAD]))


def scalar_double_well(X) -> float:
    return (fro2(X) - 1.0) ** 2


def scalar_double_well_envelope(X) -> float:
    return max(fro2(X) - 1.0, 0.0) ** 2


def minors_2x2(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.array([X[0, 0], X[1, 0], X[0, 1], X[1, 1], X[0, 0] * X[1, 1] - X[0, 1] * X[1, 0]])


def all_minors(X) -> np.ndarray:
    """Every s x s minor, s >= 1, via numpy determinants (order matches the map)."""
    X = np.asarray(X, dtype=float)
    m, n = X.shape
    out = []
    for s in range(1, min(m, n) + 1):
        block = [(cols, rows) for rows in itertools.combinations(range(m), s)
                 for cols in itertools.combinations(range(n), s)]
        for cols, rows in sorted(block):
            out.append(np.linalg.det(X[np.ix_(rows, cols)]))
    return np.array(out)


# -- finite differences ---------------------------------------------------------

def fd_gradient(fun, x, h: float = 1e-5) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def fd_hessian(fun, x, h: float = 1e-4) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.size
    H = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = h
            ej[j] = h
            H[i, j] = (fun(x + ei + ej) - fun(x + ei - ej) - fun(x - ei + ej)
                       + fun(x - ei - ej)) / (4 * h * h)
    return H


def fd4_gradient(fun, x, h: float = 1e-3) -> np.ndarray:
    """Fourth-order central differences."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (-fun(x + 2 * e) + 8 * fun(x + e) - 8 * fun(x - e) + fun(x - 2 * e)) / (12 * h)
    return g


def fd4_hessian(fun, x, h: float = 1e-3) -> np.ndarray:
    """Fourth-order differences of ``fd4_gradient`` (exact for polynomials up to degree 5)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    H = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        H[:, j] = (-fd4_gradient(fun, x + 2 * e, h) + 8 * fd4_gradient(fun, x + e, h)
                   - 8 * fd4_gradient(fun, x - e, h) + fd4_gradient(fun, x - 2 * e, h)) / (12 * h)
    return (H + H.T) / 2


# -- brute-force polyconvex envelope ---------------------------------------------

def discrete_measure_envelope(fun, X, n_atoms: int = 6, starts: int = 40, seed: int = 0,
                              anchors: list[np.ndarray] | None = None) -> float:
    """Upper bound on the polyconvex envelope of ``fun`` at a 2x2 matrix ``X``.

    Minimizes ``sum_j w_j f(Z_j)`` over ``n_atoms`` atoms subject to
    ``sum_j w_j p(Z_j) = p(X)``, ``w >= 0``, ``sum w = 1``.  Weights are kept on
    the simplex by a softmax parametrization; the minors constraint is handled
    by SLSQP equality constraints and a final projection onto the constraint
    (Newton steps on the atoms, weights fixed).  Starts mix random atoms with
    atoms placed at the supplied ``anchors`` and at ``X``.
    """
    X = np.asarray(X, dtype=float)
    pX = minors_2x2(X)
    rng = np.random.default_rng(seed)
    anchors = list(anchors or [])

    def unpack(z):
        A = z[:4 * n_atoms].reshape(n_atoms, 2, 2)
        a = z[4 * n_atoms:]
        w = np.exp(a - a.max())
        return A, w / w.sum()

    def objective(z):
        A, w = unpack(z)
        return float(sum(wi * fun(Ai) for wi, Ai in zip(w, A)))

    def constraint(z):
        A, w = unpack(z)
        return sum(wi * minors_2x2(Ai) for wi, Ai in zip(w, A)) - pX

    best = fun(X)  # the Dirac measure at X is always feasible
    for s in range(starts):
        atoms = []
        for j in range(n_atoms):
            pick = rng.random()
            if anchors and pick < 0.6:
                base = anchors[rng.integers(len(anchors))]
                atoms.append(base + 0.1 * rng.standard_normal((2, 2)))
            elif pick < 0.8:
                atoms.append(X + 0.3 * rng.standard_normal((2, 2)))
            else:
                atoms.append(1.5 * rng.standard_normal((2, 2)))
        z0 = np.concatenate([np.ravel(atoms), 0.1 * rng.standard_normal(n_atoms)])
        res = minimize(objective, z0, method="SLSQP",
                       constraints=[{"type": "eq", "fun": constraint}],
                       options={"maxiter": 500, "ftol": 1e-12})
        z = _project(res.x, constraint, n_atoms)
        if z is None:
            continue
        val = objective(z)
        if val < best:
            best = val
    return best


def _project(z, constraint, n_atoms: int, iters: int = 20):
    """Least-norm Newton correction of the atoms onto the minors constraint."""
    z = np.array(z, dtype=float)
    for _ in range(iters):
        r = constraint(z)
        if np.abs(r).max() < 1e-12:
            return z
        J = np.zeros((r.size, 4 * n_atoms))
        h = 1e-7
        for i in range(4 * n_atoms):
            e = np.zeros_like(z)
            e[i] = h
            J[:, i] = (constraint(z + e) - constraint(z - e)) / (2 * h)
        step = np.linalg.lstsq(J, -r, rcond=None)[0]
        z[:4 * n_atoms] += step
    return z if np.abs(constraint(z)).max() < 1e-9 else None

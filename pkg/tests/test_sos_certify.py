from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from polycert.expr import parse_expression
from polycert.minors import build_minors_map, minors_symbolic
from polycert.poly_core import Polynomial, VarSpace, monomial_basis
from polycert.sos_certify import (ExactSOSIdentity, GramCertificate, Inconclusive,
                                  RoundingFailed, certify_lifted_sos_polyconvex,
                                  certify_sos_polyconvex, check_sos_convex, compose_with_minors,
                                  exact_sos_polyconvex_identity, lifted_to_first_order_q,
                                  polyconvexity_target, round_to_rational, sos_decompose,
                                  verify_identity)

import oracles

S22 = VarSpace(2, 2)
MM22 = build_minors_map(2, 2)


def P(src, space=S22):
    return parse_expression(src, space)


def independent_residual(cert: GramCertificate) -> float:
    """Max coefficient error of <b, Q b> - target, accumulated without the library helpers."""
    acc: dict = {}
    for i, a in enumerate(cert.basis):
        for j, b in enumerate(cert.basis):
            mon = tuple(p + q for p, q in zip(a, b))
            acc[mon] = acc.get(mon, 0.0) + cert.Q[i, j]
    for mon, c in cert.target.terms.items():
        acc[mon] = acc.get(mon, 0.0) - float(c)
    return max((abs(v) for v in acc.values()), default=0.0)


def assert_valid(cert: GramCertificate):
    assert independent_residual(cert) <= 1e-6
    assert np.linalg.eigvalsh(cert.Q)[0] >= -1e-8 if cert.Q.size else True


# -- plain SOS ----------------------------------------------------------------------------------

def test_sum_of_two_squares_has_identity_gram():
    cert = sos_decompose(P("x1^2 + x2^2"))
    assert_valid(cert)
    assert [sum(a) for a in cert.basis] == [1, 1]
    assert np.allclose(cert.Q, np.eye(2), atol=1e-6)


def test_double_well_minus_minorant_is_sos(examples):
    g = examples["double_well"] - 4 + 8 * P("det(X)")
    assert g == P("frob2(X)^2 + 4*(x2 - x3)^2")
    cert = sos_decompose(g)
    assert_valid(cert)
    ident = round_to_rational(cert, target=g)
    assert verify_identity(g, ident)
    assert len(ident.squares) == 2


def test_motzkin_is_inconclusive():
    s = VarSpace(1, 2)
    m = parse_expression("x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2 + 1", s)
    grid = np.linspace(-2, 2, 41)
    assert min(float(m.evaluate([a, b])) for a in grid for b in grid) >= 0
    with pytest.raises(Inconclusive):
        sos_decompose(m, 6)


def test_odd_degree_bound_rejected():
    with pytest.raises(ValueError):
        sos_decompose(P("x1^2"), 3)


# -- SOS convexity ----------------------------------------------------------------------------------

@pytest.mark.parametrize("form", ["hessian", "bregman"])
@pytest.mark.parametrize("src", ["frob2(X + transpose(X))", "frob2(X)^2"])
def test_sos_convex_examples(src, form):
    assert_valid(check_sos_convex(P(src), form=form))


def test_nonconvex_quartic_is_inconclusive():
    s = VarSpace(1, 1)
    with pytest.raises(Inconclusive):
        check_sos_convex(parse_expression("x1^4 - x1^2", s))


def test_affine_is_trivially_sos_convex():
    cert = check_sos_convex(P("3*x1 - x4 + 2"))
    assert cert.Q.size == 0


# -- SOS polyconvexity -----------------------------------------------------------------------------

@pytest.fixture(scope="module")
def adm_cert(examples):
    return certify_sos_polyconvex(examples["adm"], MM22, 3)


def test_adm_multiplier_matches_closed_form(adm_cert):
    q_expected = [P(f"4*{v}*(frob2(X) - det(X))") for v in ("X[1,1]", "X[2,1]", "X[1,2]", "X[2,2]")]
    q_expected.append(P("-2*frob2(X)"))
    for q, e in zip(adm_cert.witness, q_expected):
        diff = q.to_float() - e.to_float()
        assert max((abs(c) for c in diff.terms.values()), default=0.0) <= 1e-4
    assert_valid(adm_cert.gram)


def test_adm_first_order_inequality(adm_cert):
    rng = np.random.default_rng(11)
    q = [qi.to_float() for qi in adm_cert.witness]
    for _ in range(100):
        X, Y = rng.uniform(-2, 2, (2, 2, 2))
        qY = np.array([qi.evaluate(list(Y.ravel(order="F"))) for qi in q])
        gap = oracles.adm(X) - oracles.adm(Y) - qY @ (oracles.minors_2x2(X) - oracles.minors_2x2(Y))
        assert gap >= -1e-6


def test_adm_rounds_to_exact_identity(examples, adm_cert):
    q, ident = exact_sos_polyconvex_identity(examples["adm"], adm_cert)
    assert verify_identity(polyconvexity_target(examples["adm"], MM22, q), ident)
    assert all(c > 0 for c, _ in ident.squares)


def test_convex_quadratic_is_sos_polyconvex():
    cert = certify_sos_polyconvex(P("frob2(X)"), MM22, 1)
    expected = [P("2*x1"), P("2*x2"), P("2*x3"), P("2*x4"), Polynomial.zero(S22)]
    for q, e in zip(cert.witness, expected):
        assert max((abs(float(c)) for c in (q.to_float() - e.to_float()).terms.values()),
                   default=0.0) <= 1e-6


def test_determinant_is_polyaffine():
    cert = certify_sos_polyconvex(P("det(X)"), MM22, 0)
    values = [float(q.constant_term()) for q in cert.witness]
    assert np.allclose(values, [0, 0, 0, 0, 1], atol=1e-6)
    assert cert.gram.residual <= 1e-6


# -- lifted SOS polyconvexity ------------------------------------------------------------------------

def test_det_squared_lifts_to_square_of_last_minor(examples):
    cert = certify_lifted_sos_polyconvex(examples["det_squared"], MM22, 2)
    g = cert.witness
    qspace = VarSpace(1, MM22.N)
    expected = Polynomial.variable(qspace, 4, exact=False) ** 2
    assert max(abs(c) for c in (g - expected).terms.values()) <= 1e-6
    diff = compose_with_minors(g, MM22) - examples["det_squared"].to_float()
    assert max((abs(c) for c in diff.terms.values()), default=0.0) <= 1e-6


def test_double_well_lifts_in_two_dimensions(examples):
    cert = certify_lifted_sos_polyconvex(examples["double_well"], MM22, 4)
    composed = compose_with_minors(cert.witness, MM22)
    diff = composed - examples["double_well"].to_float()
    assert max((abs(c) for c in diff.terms.values()), default=0.0) <= 1e-6
    assert_valid(cert.gram)


@pytest.mark.parametrize("deg_g", [2, 4])
def test_adm_is_not_lifted(examples, deg_g):
    with pytest.raises(Inconclusive):
        certify_lifted_sos_polyconvex(examples["adm"], MM22, deg_g)


@pytest.mark.parametrize("name,deg_g", [("det_squared", 2), ("double_well", 4)])
def test_lifted_implies_sos_polyconvex(examples, name, deg_g):
    """q = grad g o p is a valid multiplier for the first-order SOS condition."""
    f = examples[name]
    cert = certify_lifted_sos_polyconvex(f, MM22, deg_g)
    g = cert.witness
    # snap the tiny coefficient noise of g before composing exactly
    g_exact = Polynomial(g.space, {a: Fraction(round(c * 10 ** 6), 10 ** 6)
                                  for a, c in g.terms.items()})
    q = lifted_to_first_order_q(g_exact, MM22)
    target = polyconvexity_target(f, MM22, q)
    assert_valid(sos_decompose(target))


# -- rounding and exact verification ---------------------------------------------------------------

def test_identity_gram_rounds_to_unit_squares():
    target = P("x1^2 + x2^2")
    basis = tuple(a for a in monomial_basis(S22, 1) if sum(a) == 1)[:2]
    cert = GramCertificate(basis, np.eye(2), target.to_float())
    ident = round_to_rational(cert, target=target)
    assert sorted(c for c, _ in ident.squares) == [1, 1]
    assert verify_identity(target, ident)


def test_rounding_rejects_large_residual():
    target = P("x1^2 + x2^2")
    basis = tuple(a for a in monomial_basis(S22, 1) if sum(a) == 1)[:2]
    cert = GramCertificate(basis, np.diag([1.0, 1.01]), target.to_float())
    assert cert.residual == pytest.approx(1e-2)
    with pytest.raises(RoundingFailed):
        round_to_rational(cert, target=target)


def test_verify_identity_detects_mutation():
    x1, x2 = P("x1"), P("x2")
    target = P("x1^2 + 2*x1*x2 + 2*x2^2")
    good = ExactSOSIdentity(target, ((Fraction(1), x1 + x2), (Fraction(1), x2)))
    assert verify_identity(target, good)
    bad = ExactSOSIdentity(target, ((Fraction(2), x1 + x2), (Fraction(1), x2)))
    assert not verify_identity(target, bad)


def test_verify_identity_requires_exact_backend():
    with pytest.raises(TypeError):
        verify_identity(P("x1").to_float(), ExactSOSIdentity(P("x1"), ()))


def test_certificate_residual_is_recomputed():
    target = P("x1^2 + x2^2").to_float()
    basis = tuple(a for a in monomial_basis(S22, 1) if sum(a) == 1)[:2]
    cert = GramCertificate(basis, np.array([[1.0, 0.3], [0.3, 1.0]]), target)
    assert cert.residual == pytest.approx(0.6)
    assert not cert.is_valid()


def test_minors_target_is_zero_on_diagonal(examples):
    q = [P(f"4*{v}*(frob2(X) - det(X))") for v in ("x1", "x2", "x3", "x4")] + [P("-2*frob2(X)")]
    t = polyconvexity_target(examples["adm"], MM22, q)
    big = t.space
    diag = {i: Polynomial.variable(big, i) for i in range(4)}
    diag.update({4 + i: Polynomial.variable(big, i) for i in range(4)})
    assert t.substitute(diag).is_zero()
    assert len(minors_symbolic(MM22)) == 5

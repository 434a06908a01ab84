"""Rational polynomial identity files: load, verify exactly, write.

An identity file is JSON with a left-hand side and a list of weighted terms::

    {"format": "polycert-identity/1", "m": 2, "n": 2,
     "lhs": {"type": "polynomial", "expr": "frob2(X - I)*frob2(X + I)"},
     "terms": [{"coef": "1", "poly": "frob2(X)^2"}, ...]}

A term contributes ``coef * poly`` or, for square terms,
``coef * (sum of factor_squares^2) * square^2``.  Square terms must have a
nonnegative coefficient, so an identity whose terms are all squares is an SOS
certificate for the left-hand side.

``lhs.type = "sos_polyconvexity"`` takes ``f`` and ``q`` (expressions in
``X``) and builds ``f(X) - f(Y) - <q(Y), p(X) - p(Y)>`` over the doubled space,
where ``X`` and ``Y`` are available to the term expressions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .expr import parse_expression
from .minors import build_minors_map
from .poly_core import Polynomial, VarSpace
from .sos_certify import ExactSOSIdentity, polyconvexity_target

FORMAT = "polycert-identity/1"


@dataclass(frozen=True)
class Identity:
    space: VarSpace
    lhs: Polynomial
    terms: tuple[tuple[Fraction, Polynomial], ...]
    squares_only: bool
    nonneg_ok: bool  # every square term has a nonnegative coefficient

    def rhs(self) -> Polynomial:
        total = Polynomial.zero(self.space)
        for c, p in self.terms:
            total = total + p.scale(c)
        return total


@dataclass(frozen=True)
class Mismatch:
    monomial: str
    lhs: Fraction
    rhs: Fraction

    def __str__(self):
        return f"coefficient of {self.monomial}: lhs {self.lhs} != rhs {self.rhs}"


def _names(space: VarSpace, doubled: bool) -> dict:
    if not doubled:
        return {}
    base = VarSpace(space.m, space.n)
    return {"X": Polynomial.matrix(space, offset=0),
            "Y": Polynomial.matrix(space, offset=base.total)}


def load_identity(doc: dict | str | Path) -> Identity:
    """Build an :class:`Identity` from a parsed document or a file path."""
    if not isinstance(doc, dict):
        doc = json.loads(Path(doc).read_text())
    if doc.get("format") != FORMAT:
        raise ValueError(f"unsupported identity format {doc.get('format')!r}")
    m, n = int(doc["m"]), int(doc["n"])
    base = VarSpace(m, n)
    lhs_doc = doc["lhs"]
    kind = lhs_doc.get("type")
    if kind == "polynomial":
        doubled = bool(lhs_doc.get("doubled", False))
        space = base.doubled() if doubled else base
        lhs = parse_expression(lhs_doc["expr"], space, _names(space, doubled))
    elif kind == "sos_polyconvexity":
        doubled = True
        space = base.doubled()
        mmap = build_minors_map(m, n)
        f = parse_expression(lhs_doc["f"], base)
        q = [parse_expression(s, base) for s in lhs_doc["q"]]
        if len(q) != mmap.N:
            raise ValueError(f"q has {len(q)} entries, the minors map has {mmap.N}")
        lhs = polyconvexity_target(f, mmap, q)
    else:
        raise ValueError(f"unknown lhs type {kind!r}")
    names = _names(space, doubled)
    terms = []
    squares_only, nonneg_ok = True, True
    for t in doc["terms"]:
        c = Fraction(str(t["coef"]))
        if "square" in t:
            s = parse_expression(t["square"], space, names)
            factor = Polynomial.constant(space, 1)
            if t.get("factor_squares"):
                factor = sum((parse_expression(e, space, names) ** 2
                              for e in t["factor_squares"]), Polynomial.zero(space))
            terms.append((c, factor * s * s))
            nonneg_ok &= c >= 0
        elif "poly" in t:
            terms.append((c, parse_expression(t["poly"], space, names)))
            squares_only = False
        else:
            raise ValueError("each term needs a 'square' or a 'poly' entry")
    return Identity(space, lhs, tuple(terms), squares_only, nonneg_ok)


def first_mismatch(ident: Identity) -> Mismatch | None:
    """First differing coefficient in graded-lex order, or ``None``."""
    rhs = ident.rhs()
    diff = ident.lhs - rhs
    if diff.is_zero():
        return None
    a, _ = diff.sorted_terms()[0]
    mon = Polynomial(ident.space, {a: 1}).to_text()
    return Mismatch(mon, Fraction(ident.lhs.coefficient(a)), Fraction(rhs.coefficient(a)))


def identity_document(identity: ExactSOSIdentity, f: Polynomial, q: list[Polynomial]) -> dict:
    """Identity file for an exact SOS-polyconvexity certificate.

    Squares are written in the canonical ``x<k>`` form over the doubled space.
    """
    space = f.space
    return {
        "format": FORMAT,
        "description": "rounded SOS polyconvexity certificate",
        "m": space.m,
        "n": space.n,
        "lhs": {"type": "sos_polyconvexity", "f": f.to_text(), "q": [qi.to_text() for qi in q]},
        "terms": [{"coef": str(c), "square": s.to_text()} for c, s in identity.squares],
    }


def shipped_fixture(name: str) -> Path:
    """Path of a bundled identity fixture such as ``"adm_sos_polyconvex"``."""
    return Path(str(resources.files("polycert") / "fixtures" / f"{name}.json"))

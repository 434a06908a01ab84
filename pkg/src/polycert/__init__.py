"""Sum-of-squares certificates of polyconvexity and moment relaxations of polyconvex envelopes."""

from .conic import ConeProgram, ProgramBuilder, SolverSettings, Status, solve
from .envelope import (EnvelopeReport, EnvelopeStatus, SemialgebraicDomain, envelope_at,
                       extract_atoms, hierarchy, minimal_order, sweep)
from .expr import ExpressionError, parse_expression, parse_point
from .minors import MinorsMap, build_minors_map, minors_eval, minors_symbolic
from .poly_core import Polynomial, VarSpace, bregman, gradient, hessian, monomial_basis
from .sos_certify import (GramCertificate, Inconclusive, PolyconvexityCertificate,
                          certify_lifted_sos_polyconvex, certify_sos_polyconvex,
                          check_sos_convex, sos_decompose)

__version__ = "0.1.0"

__all__ = [
    "ConeProgram", "EnvelopeReport", "EnvelopeStatus", "ExpressionError", "GramCertificate",
    "Inconclusive", "MinorsMap", "Polynomial", "PolyconvexityCertificate", "ProgramBuilder",
    "SemialgebraicDomain", "SolverSettings", "Status", "VarSpace", "bregman",
    "build_minors_map", "certify_lifted_sos_polyconvex", "certify_sos_polyconvex",
    "check_sos_convex", "envelope_at", "extract_atoms", "gradient", "hessian", "hierarchy",
    "minimal_order", "minors_eval", "minors_symbolic", "monomial_basis", "parse_expression",
    "parse_point", "solve", "sos_decompose", "sweep",
]

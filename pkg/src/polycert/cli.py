"""Command-line front end.

Verbs::

    polycert certify {sos-pc,lifted,sos,sos-convex} --f EXPR [--m M --n N] [--qdeg D | --gdeg D]
    polycert envelope --f EXPR --point MATRIX [--order K | --kmax K] [--domain EXPR ...]
    polycert sweep --f EXPR --path MATRIX_IN_t --grid 0:1:21 [--format csv|json]
    polycert verify IDENTITY.json
    polycert dump-sdp --f EXPR [--kind moment|dual|sos-pc] ...

Exit codes: 0 success, 1 usage or parse error, 2 inconclusive certificate,
3 envelope is only a lower bound, 4 solver trouble, 5 identity mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Sequence

import jsonschema
import numpy as np

from .conic import BACKENDS, SolverSettings
from .envelope import (EnvelopeReport, EnvelopeStatus, OrderTooSmall, SemialgebraicDomain,
                       affine_path, build_dual_sos, build_moment_relaxation, envelope_at,
                       hierarchy, minimal_order, sweep, sweep_csv)
from .expr import ExpressionError, parse_expression, parse_path, parse_point
from .identity import first_mismatch, identity_document, load_identity
from .minors import build_minors_map
from .poly_core import VarSpace
from .sos_certify import (Inconclusive, RoundingFailed, _sos_pc_problem, certificate_to_json,
                          certify_lifted_sos_polyconvex, certify_sos_polyconvex,
                          check_sos_convex, exact_sos_polyconvex_identity, sos_decompose)

log = logging.getLogger("polycert")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INCONCLUSIVE = 2
EXIT_LOWER_BOUND = 3
EXIT_SOLVER = 4
EXIT_MISMATCH = 5

ENVELOPE_EXIT = {
    EnvelopeStatus.EXACT_BY_MATCH: EXIT_OK,
    EnvelopeStatus.EXACT_BY_FLAT: EXIT_OK,
    EnvelopeStatus.LOWER_BOUND: EXIT_LOWER_BOUND,
    EnvelopeStatus.SOLVER_ISSUE: EXIT_SOLVER,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; 2 means "inconclusive" here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_schema(name: str) -> dict:
    text = (resources.files("polycert") / "schemas" / f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(doc: dict, name: str) -> None:
    jsonschema.validate(doc, load_schema(name))


# -- argument handling --------------------------------------------------------

def _common(p: argparse.ArgumentParser, problem: bool = True) -> None:
    g = p.add_argument_group("problem")
    if problem:
        g.add_argument("--m", type=int, default=2, help="rows of X (default 2)")
        g.add_argument("--n", type=int, default=2, help="columns of X (default 2)")
        g.add_argument("--f", required=True, help="polynomial expression in X")
        g.add_argument("--max-minor-order", type=int, default=None,
                       help="keep minors up to this order only (1 gives the convex envelope)")
    s = p.add_argument_group("solver")
    s.add_argument("--tol", type=float, default=None,
                   help="solver feasibility tolerance (default 1e-9 or $POLYCERT_SOLVER_TOL)")
    s.add_argument("--backend", choices=BACKENDS, default="auto")
    s.add_argument("--seed", type=int, default=0, help="seed for randomized internals")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("-v", "--verbose", action="store_true", help="progress on stderr")


def _envelope_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--domain", action="append", default=[], metavar="EXPR",
                   help="constraint g(X) >= 0; repeatable")
    p.add_argument("--order", type=int, default=None, help="relaxation order k")
    p.add_argument("--rank-tol", type=float, default=1e-4,
                   help="relative eigenvalue threshold for moment-matrix ranks")
    p.add_argument("--no-dual", action="store_true", help="skip the separate SOS dual solve")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="polycert", description="SOS polyconvexity certificates and "
                                                  "moment relaxations of polyconvex envelopes.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("certify", help="search for an SOS-type certificate")
    c.add_argument("kind", choices=("sos-pc", "lifted", "sos", "sos-convex"))
    _common(c)
    c.add_argument("--qdeg", type=int, default=None, help="degree of q (sos-pc)")
    c.add_argument("--gdeg", type=int, default=None, help="degree of g (lifted)")
    c.add_argument("--degree", type=int, default=None, help="even degree bound (sos)")
    c.add_argument("--select", choices=("l1", "feasible"), default="l1",
                   help="how to pick among feasible q (sos-pc)")
    c.add_argument("--no-snap", action="store_true", help="keep the raw numerical q")
    c.add_argument("--support", choices=("weighted", "full"), default="weighted",
                   help="monomial support of g (lifted)")
    c.add_argument("--exact", action="store_true",
                   help="round to an exact rational identity and verify it (sos-pc)")
    c.add_argument("--emit-identity", type=Path, default=None, metavar="PATH",
                   help="write the exact identity for 'verify' (implies --exact)")

    e = sub.add_parser("envelope", help="polyconvex envelope relaxation at one point")
    _common(e)
    _envelope_args(e)
    e.add_argument("--point", required=True, help="matrix literal, e.g. '[[1, 0], [0, 1/2]]'")
    e.add_argument("--kmax", type=int, default=None,
                   help="run orders from --order (or the minimal one) up to KMAX")

    w = sub.add_parser("sweep", help="envelope along an affine path X(t)")
    _common(w)
    _envelope_args(w)
    w.add_argument("--path", required=True, help="matrix literal affine in t, e.g. '[[t, 0], [0, -t]]'")
    w.add_argument("--grid", required=True,
                   help="'start:stop:count' or a comma-separated list of t values")

    v = sub.add_parser("verify", help="exact check of a rational identity file")
    v.add_argument("identity", type=Path)
    v.add_argument("-v", "--verbose", action="store_true")

    d = sub.add_parser("dump-sdp", help="print the cone program as sparse triplets")
    _common(d)
    d.add_argument("--kind", choices=("moment", "dual", "sos-pc"), default="moment")
    d.add_argument("--domain", action="append", default=[], metavar="EXPR")
    d.add_argument("--point", default=None)
    d.add_argument("--order", type=int, default=None)
    d.add_argument("--qdeg", type=int, default=None)
    return parser


def _settings(args) -> SolverSettings:
    kwargs = {"backend": args.backend}
    if args.tol is not None:
        kwargs["feas_tol"] = args.tol
    return SolverSettings.from_env(**kwargs)


def _problem(args):
    if args.m < 1 or args.n < 1:
        raise UsageError("--m and --n must be positive")
    space = VarSpace(args.m, args.n)
    f = parse_expression(args.f, space)
    mmap = build_minors_map(args.m, args.n, args.max_minor_order)
    return space, f, mmap


def _domain(args, space) -> SemialgebraicDomain:
    return SemialgebraicDomain(tuple(parse_expression(g, space) for g in args.domain))


def parse_grid(text: str) -> list[float]:
    """``start:stop:count`` (inclusive, evenly spaced) or ``a,b,c``; rationals allowed."""
    try:
        if ":" in text:
            a, b, cnt = text.split(":")
            lo, hi, cnt = Fraction(a), Fraction(b), int(cnt)
            if cnt < 1:
                raise ValueError
            if cnt == 1:
                return [float(lo)]
            return [float(lo + (hi - lo) * i / (cnt - 1)) for i in range(cnt)]
        return [float(Fraction(s.strip())) for s in text.split(",") if s.strip()]
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"bad grid {text!r}; use start:stop:count or a,b,c") from None


def _dump(doc: dict, fmt: str = "json") -> None:
    sys.stdout.write(json.dumps(doc, indent=2, allow_nan=False) + "\n")


# -- commands -----------------------------------------------------------------

def cmd_certify(args) -> int:
    space, f, mmap = _problem(args)
    settings = _settings(args)
    t0 = time.perf_counter()
    doc = {"command": "certify", "kind": args.kind, "f": f.to_text()}
    exact_wanted = args.exact or args.emit_identity is not None
    try:
        if args.kind == "sos-pc":
            if args.qdeg is None:
                raise UsageError("certify sos-pc needs --qdeg")
            cert = certify_sos_polyconvex(f, mmap, args.qdeg, select=args.select,
                                          snap=not args.no_snap, settings=settings)
            cdoc = certificate_to_json(cert)
            if exact_wanted:
                doc["exact"] = _exact_identity(f, cert, args.emit_identity)
        elif args.kind == "lifted":
            if args.gdeg is None:
                raise UsageError("certify lifted needs --gdeg")
            cert = certify_lifted_sos_polyconvex(f, mmap, args.gdeg, support=args.support,
                                                 settings=settings)
            cdoc = certificate_to_json(cert)
        elif args.kind == "sos":
            cdoc = certificate_to_json(sos_decompose(f, args.degree, settings))
        else:
            cdoc = certificate_to_json(check_sos_convex(f, settings=settings))
            cdoc["kind"] = "SOSConvex"
    except Inconclusive as exc:
        doc.update(status="inconclusive", message=str(exc),
                   elapsed=time.perf_counter() - t0)
        validate(doc, "certify")
        _dump(doc)
        return EXIT_INCONCLUSIVE
    doc.update(status="certified", certificate=cdoc, elapsed=time.perf_counter() - t0)
    validate(doc, "certify")
    _dump(doc)
    return EXIT_OK


def _exact_identity(f, cert, path: Path | None) -> dict:
    try:
        q, ident = exact_sos_polyconvex_identity(f, cert)
    except RoundingFailed as exc:
        return {"verified": False, "squares": 0, "message": str(exc)}
    out = {"verified": True, "squares": len(ident.squares)}
    if path is not None:
        path.write_text(json.dumps(identity_document(ident, f, q), indent=2) + "\n")
        out["identity_file"] = str(path)
    return out


def _point(args):
    X = parse_point(args.point, args.m, args.n)
    return np.array([[float(v) for v in row] for row in X])


def _report_doc(rep: EnvelopeReport) -> dict:
    doc = rep.to_json()
    doc["command"] = "envelope"
    return doc


def cmd_envelope(args) -> int:
    space, f, mmap = _problem(args)
    dom = _domain(args, space)
    X = _point(args)
    kw = dict(settings=_settings(args), rank_tol=args.rank_tol, dual_solve=not args.no_dual,
              seed=args.seed)
    kmin = minimal_order(f, dom, mmap)
    if args.order is not None and args.order < kmin:
        raise OrderTooSmall(f"relaxation order {args.order} is below the minimal order {kmin}")
    if args.kmax is not None:
        reports = hierarchy(f, mmap, X, args.order, args.kmax, dom, **kw)
        doc = _report_doc(reports[-1])
        doc["hierarchy"] = [r.to_json() for r in reports]
    else:
        reports = [envelope_at(f, mmap, X, args.order, dom, **kw)]
        doc = _report_doc(reports[0])
    validate(doc, "envelope")
    _dump(doc)
    return ENVELOPE_EXIT[reports[-1].status]


def cmd_sweep(args) -> int:
    space, f, mmap = _problem(args)
    dom = _domain(args, space)
    X0, X1 = parse_path(args.path, args.m, args.n)
    grid = parse_grid(args.grid)
    rows = sweep(f, mmap, affine_path([[float(v) for v in r] for r in X0],
                                      [[float(v) for v in r] for r in X1]),
                 grid, args.order, dom, settings=_settings(args), rank_tol=args.rank_tol,
                 dual_solve=not args.no_dual, seed=args.seed)
    if args.format == "csv":
        sys.stdout.write(sweep_csv(rows))
    else:
        doc = {"command": "sweep",
               "rows": [{"t": r.t, "value": r.value if math.isfinite(r.value) else None,
                         "rank": r.rank, "status": r.status.value} for r in rows]}
        validate(doc, "sweep")
        _dump(doc)
    return EXIT_SOLVER if any(r.status == EnvelopeStatus.SOLVER_ISSUE for r in rows) else EXIT_OK


def cmd_verify(args) -> int:
    doc = json.loads(args.identity.read_text())
    validate(doc, "identity")
    ident = load_identity(doc)
    if not ident.nonneg_ok:
        print("mismatch: a square term has a negative coefficient")
        return EXIT_MISMATCH
    bad = first_mismatch(ident)
    if bad is not None:
        print(f"mismatch: {bad}")
        return EXIT_MISMATCH
    what = "SOS identity" if ident.squares_only else "polynomial identity"
    print(f"verified: exact {what} with {len(ident.terms)} terms")
    return EXIT_OK


def cmd_dump_sdp(args) -> int:
    space, f, mmap = _problem(args)
    if args.kind == "sos-pc":
        if args.qdeg is None:
            raise UsageError("dump-sdp --kind sos-pc needs --qdeg")
        prog = _sos_pc_problem(f, mmap, args.qdeg)[0].builder.build()
    else:
        if args.point is None:
            raise UsageError(f"dump-sdp --kind {args.kind} needs --point")
        dom = _domain(args, space)
        X = _point(args)
        k = minimal_order(f, dom, mmap) if args.order is None else args.order
        build = build_moment_relaxation if args.kind == "moment" else build_dual_sos
        prog = build(f, dom, mmap, X, k)
    sys.stdout.write(prog.dump())
    return EXIT_OK


COMMANDS = {
    "certify": cmd_certify,
    "envelope": cmd_envelope,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "dump-sdp": cmd_dump_sdp,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ExpressionError, OrderTooSmall, ValueError, OSError,
            json.JSONDecodeError, jsonschema.ValidationError) as exc:
        print(f"polycert {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Polynomial expression parser for matrix-variable problems.

The grammar is Python's expression syntax restricted to polynomial
arithmetic, with ``^`` accepted as a power operator::

    frob2(X - I)*frob2(X + I)
    (det(X))^2 + 1/4*X[1,2]
    x1^2*x4 - 3/2*x2           # canonical serialized form

Values are either scalar polynomials or matrices of them.  ``X`` is the
matrix variable, ``X[i,j]`` a 1-based entry, ``I`` the identity, ``x<k>``
the k-th variable in column-major order.  Builtins: ``det``, ``frob2``,
``tr``, ``transpose``.  Matrix literals ``[[a, b], [c, d]]`` are accepted
where a matrix is expected.
"""

from __future__ import annotations

import ast
import re
from fractions import Fraction
from typing import Mapping, Union

from .poly_core import Polynomial, VarSpace, determinant

Matrix = list  # list[list[Polynomial]]
Value = Union[Polynomial, Matrix]

_FORBIDDEN = object()  # binding that makes a name unusable in a context

_VAR_RE = re.compile(r"x([1-9][0-9]*)$")


class ExpressionError(ValueError):
    """Parse or evaluation error located at ``line``/``column`` (both 1-based)."""

    def __init__(self, message: str, line: int = 1, column: int = 1, src: str = ""):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


def _translate(src: str) -> tuple[str, list[list[int]]]:
    """Replace ``^`` by ``**``; return the new text and a per-line column map."""
    out_lines, maps = [], []
    for line in src.split("\n"):
        buf, cmap = [], []
        for col, ch in enumerate(line):
            if ch == "^":
                buf.append("**")
                cmap.extend([col, col])
            else:
                buf.append(ch)
                cmap.append(col)
        cmap.append(len(line))
        out_lines.append("".join(buf))
        maps.append(cmap)
    return "\n".join(out_lines), maps


class _Evaluator:
    def __init__(self, space: VarSpace, names: Mapping[str, Value], maps, src: str,
                 pysrc: str):
        self.space = space
        self._pysrc = pysrc
        self.names = dict(names)
        self.maps = maps
        self.src = src

    # -- errors -------------------------------------------------------------

    def fail(self, node: ast.AST | None, message: str):
        line, col = 1, 0
        if node is not None and hasattr(node, "lineno"):
            line = node.lineno
            raw = node.col_offset
            cmap = self.maps[line - 1] if line - 1 < len(self.maps) else []
            col = cmap[raw] if raw < len(cmap) else raw
        raise ExpressionError(message, line, col + 1, self.src)

    # -- helpers ------------------------------------------------------------

    def const(self, c) -> Polynomial:
        return Polynomial.constant(self.space, c)

    def is_matrix(self, v) -> bool:
        return isinstance(v, list)

    def shape(self, M) -> tuple[int, int]:
        return len(M), len(M[0]) if M else 0

    def scalar(self, node, v) -> Polynomial:
        if self.is_matrix(v):
            self.fail(node, "expected a scalar, got a matrix")
        return v

    def matrix(self, node, v) -> Matrix:
        if not self.is_matrix(v):
            self.fail(node, "expected a matrix, got a scalar")
        return v

    def square(self, node, M) -> Matrix:
        r, c = self.shape(M)
        if r != c:
            self.fail(node, f"matrix must be square, got {r}x{c}")
        return M

    def identity(self, size: int) -> Matrix:
        return [[self.const(1 if i == j else 0) for j in range(size)] for i in range(size)]

    # -- evaluation ---------------------------------------------------------

    def eval(self, node: ast.AST) -> Value:
        method = getattr(self, "visit_" + type(node).__name__, None)
        if method is None:
            self.fail(node, f"unsupported syntax: {type(node).__name__}")
        return method(node)

    def visit_Expression(self, node):
        return self.eval(node.body)

    def visit_Constant(self, node):
        v = node.value
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(node, f"unsupported literal {v!r}")
        text = ast.get_source_segment(self._pysrc, node) if self._pysrc else None
        return self.const(Fraction(text) if text and isinstance(v, float)
                          and "e" not in text.lower() else Fraction(v))

    def visit_Name(self, node):
        name = node.id
        if name in self.names:
            v = self.names[name]
            if v is _FORBIDDEN:
                self.fail(node, f"name {name!r} is not allowed here")
            return v
        if name == "X":
            if self.space.m * self.space.n == 0:
                self.fail(node, "no matrix variable")
            return Polynomial.matrix(self.space)
        if name == "I":
            if self.space.m != self.space.n:
                self.fail(node, f"identity needs a square matrix space, got "
                                f"{self.space.m}x{self.space.n}")
            return self.identity(self.space.m)
        match = _VAR_RE.match(name)
        if match:
            i = int(match.group(1)) - 1
            if i >= self.space.total:
                self.fail(node, f"variable {name} out of range (have {self.space.total})")
            return Polynomial.variable(self.space, i)
        self.fail(node, f"unknown name {name!r}")

    def visit_Subscript(self, node):
        base = self.matrix(node.value, self.eval(node.value))
        idx = node.slice
        if not (isinstance(idx, ast.Tuple) and len(idx.elts) == 2):
            self.fail(node, "entries are written X[i,j]")
        pos = []
        for e in idx.elts:
            if not (isinstance(e, ast.Constant) and type(e.value) is int):
                self.fail(e, "matrix indices must be integer literals")
            pos.append(e.value)
        r, c = self.shape(base)
        i, j = pos
        if not (1 <= i <= r and 1 <= j <= c):
            self.fail(node, f"index [{i},{j}] outside a {r}x{c} matrix (indices are 1-based)")
        return base[i - 1][j - 1]

    def visit_List(self, node):
        rows = []
        for row in node.elts:
            if not isinstance(row, ast.List):
                self.fail(row, "matrix literals are lists of rows")
            rows.append([self.scalar(e, self.eval(e)) for e in row.elts])
        if not rows or any(len(r) != len(rows[0]) for r in rows) or not rows[0]:
            self.fail(node, "matrix literal rows must be nonempty and of equal length")
        return rows

    def visit_UnaryOp(self, node):
        v = self.eval(node.operand)
        if isinstance(node.op, ast.USub):
            return self._map(v, lambda p: -p)
        if isinstance(node.op, ast.UAdd):
            return v
        self.fail(node, "unsupported unary operator")

    def _map(self, v, fn):
        if self.is_matrix(v):
            return [[fn(p) for p in row] for row in v]
        return fn(v)

    def visit_BinOp(self, node):
        op = node.op
        if isinstance(op, ast.Pow):
            return self._power(node)
        a, b = self.eval(node.left), self.eval(node.right)
        if isinstance(op, (ast.Add, ast.Sub)):
            sign = 1 if isinstance(op, ast.Add) else -1
            if self.is_matrix(a) != self.is_matrix(b):
                self.fail(node, "cannot add a matrix and a scalar")
            if self.is_matrix(a):
                if self.shape(a) != self.shape(b):
                    self.fail(node, f"shape mismatch {self.shape(a)} vs {self.shape(b)}")
                return [[x + y * sign for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]
            return a + b * sign
        if isinstance(op, ast.Mult):
            if self.is_matrix(a) and self.is_matrix(b):
                (r, k), (k2, c) = self.shape(a), self.shape(b)
                if k != k2:
                    self.fail(node, f"cannot multiply {r}x{k} by {k2}x{c}")
                return [[sum((a[i][l] * b[l][j] for l in range(k)), self.const(0))
                         for j in range(c)] for i in range(r)]
            if self.is_matrix(a):
                return self._map(a, lambda p: p * b)
            if self.is_matrix(b):
                return self._map(b, lambda p: a * p)
            return a * b
        if isinstance(op, ast.Div):
            b = self.scalar(node.right, b)
            if b.degree > 0:
                self.fail(node.right, "division only by nonzero constants")
            c = b.constant_term()
            if c == 0:
                self.fail(node.right, "division by zero")
            return self._map(a, lambda p: p / c)
        self.fail(node, f"unsupported operator {type(op).__name__}")

    def _power(self, node):
        base = self.eval(node.left)
        e = self._int_exponent(node.right)
        if self.is_matrix(base):
            M = self.square(node.left, base)
            out = self.identity(len(M))
            for _ in range(e):
                out = [[sum((out[i][l] * M[l][j] for l in range(len(M))), self.const(0))
                        for j in range(len(M))] for i in range(len(M))]
            return out
        return base ** e

    def _int_exponent(self, node) -> int:
        if isinstance(node, ast.Constant) and type(node.value) is int:
            return node.value
        v = self.scalar(node, self.eval(node))
        if v.degree <= 0:
            c = v.constant_term()
            if Fraction(c).denominator == 1 and c >= 0:
                return int(c)
        self.fail(node, "exponent must be a nonnegative integer")

    def visit_Call(self, node):
        if not isinstance(node.func, ast.Name):
            self.fail(node, "unsupported call")
        name = node.func.id
        if node.keywords or len(node.args) != 1:
            self.fail(node, f"{name}() takes exactly one argument")
        arg = node.args[0]
        if name == "det":
            return determinant(self.square(arg, self.matrix(arg, self.eval(arg))))
        if name == "frob2":
            M = self.matrix(arg, self.eval(arg))
            return sum((p * p for row in M for p in row), self.const(0))
        if name == "tr":
            M = self.square(arg, self.matrix(arg, self.eval(arg)))
            return sum((M[i][i] for i in range(len(M))), self.const(0))
        if name == "transpose":
            M = self.matrix(arg, self.eval(arg))
            return [list(col) for col in zip(*M)]
        self.fail(node.func, f"unknown function {name!r}")


def _parse(src: str, space: VarSpace, names: Mapping[str, Value] | None) -> Value:
    if not isinstance(src, str) or not src.strip():
        raise ExpressionError("empty expression")
    pysrc, maps = _translate(src)
    # parenthesize so that expressions may span lines
    pysrc = "(" + pysrc + "\n)"
    maps[0].insert(0, 0)
    try:
        tree = ast.parse(pysrc, mode="eval")
    except SyntaxError as exc:
        line = exc.lineno or 1
        raw = max((exc.offset or 1) - 1, 0)
        if (line == 1 and raw == 0) or line > len(maps):
            # the error sits on the added parentheses: input ended early
            lines = src.split("\n")
            raise ExpressionError("syntax error: unexpected end of input", len(lines),
                                  len(lines[-1]) + 1, src) from None
        cmap = maps[line - 1] if line - 1 < len(maps) else []
        col = cmap[raw] if raw < len(cmap) else raw
        raise ExpressionError(f"syntax error: {exc.msg}", line, col + 1, src) from None
    return _Evaluator(space, names or {}, maps, src, pysrc).eval(tree)


def parse_expression(src: str, space: VarSpace,
                     names: Mapping[str, Value] | None = None) -> Polynomial:
    """Parse ``src`` into an exact polynomial over ``space``."""
    v = _parse(src, space, names)
    if isinstance(v, list):
        raise ExpressionError("expression is a matrix, expected a scalar")
    return v


def parse_matrix(src: str, m: int, n: int, space: VarSpace | None = None,
                 names: Mapping[str, Value] | None = None) -> Matrix:
    """Parse an ``m x n`` matrix literal (or matrix expression) into polynomials.

    With the default empty space every entry is a rational constant.
    """
    space = space or VarSpace(1, 1)
    v = _parse(src, space, names)
    if not isinstance(v, list):
        raise ExpressionError("expected a matrix literal such as [[1, 0], [0, 1]]")
    if (len(v), len(v[0])) != (m, n):
        raise ExpressionError(f"matrix has shape {len(v)}x{len(v[0])}, expected {m}x{n}")
    return v


def parse_point(src: str, m: int, n: int) -> list[list[Fraction]]:
    """Constant ``m x n`` matrix with exact rational entries."""
    space = VarSpace(m, n)
    rows = parse_matrix(src, m, n, space, names={"X": _FORBIDDEN, "t": _FORBIDDEN})
    out = []
    for row in rows:
        vals = []
        for p in row:
            if p.degree > 0:
                raise ExpressionError("point entries must be numbers")
            vals.append(Fraction(p.constant_term()))
        out.append(vals)
    return out


def parse_path(src: str, m: int, n: int) -> tuple[list[list[Fraction]], list[list[Fraction]]]:
    """Affine path ``X(t) = X0 + t X1`` given as a matrix literal in ``t``."""
    tspace = VarSpace(1, 1)
    t = Polynomial.variable(tspace, 0)
    rows = parse_matrix(src, m, n, tspace, names={"t": t, "X": _FORBIDDEN, "x1": _FORBIDDEN})
    X0, X1 = [], []
    for row in rows:
        r0, r1 = [], []
        for p in row:
            if p.degree > 1:
                raise ExpressionError("path entries must be affine in t")
            r0.append(Fraction(p.coefficient((0,))))
            r1.append(Fraction(p.coefficient((1,))))
        X0.append(r0)
        X1.append(r1)
    return X0, X1

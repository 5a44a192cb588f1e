"""Restricted arithmetic expressions for scenario files.

Grammar (a subset of Python expression syntax, checked on the AST):

    expr   := expr (+|-|*|/) expr | expr (**|^) expr | -expr | +expr | call | atom
    call   := exp(expr) | log(expr) | sqrt(expr) | conj(expr) | root(k, j)
    atom   := number | i | pi | z1..zn | zb1..zbn

``zbK`` is the conjugate of ``zK``; ``root(k, j)`` is exp(2 pi i j / k).  Nothing
else is accepted: no attribute access, subscripts, keywords or other names.
"""

from __future__ import annotations

import ast
import cmath
import math
import re
from dataclasses import dataclass

FUNCTIONS = {"exp", "log", "sqrt", "conj", "root"}
CONSTANTS = {"i": 1j, "pi": math.pi}
_VAR = re.compile(r"^(zb|z)([1-9][0-9]*)$")


class ExpressionError(ValueError):
    """Malformed expression; ``column`` is 1-based within the source text."""

    def __init__(self, message: str, source: str, column: int | None = None):
        self.source = source
        self.column = column
        where = f" at column {column}" if column is not None else ""
        super().__init__(f"{message}{where} in {source!r}")


@dataclass(frozen=True)
class Expression:
    source: str
    tree: ast.Expression
    nvars: int

    @property
    def variables(self) -> set:
        return {node.id for node in ast.walk(self.tree) if isinstance(node, ast.Name)
                and _VAR.match(node.id)}

    @property
    def holomorphic(self) -> bool:
        return not any(v.startswith("zb") for v in self.variables) and not any(
            isinstance(node, ast.Call) and node.func.id == "conj" for node in ast.walk(self.tree))

    def canonical(self) -> str:
        return ast.unparse(self.tree)

    def evaluate(self, z, zb=None):
        """Evaluate with ``z[a]`` (and ``zb[a]``) supplied for the variables."""
        return _Evaluator(z, zb, self.source).visit(self.tree.body)


def parse(source: str, nvars: int) -> Expression:
    text = source.strip().replace("^", "**")
    if not text:
        raise ExpressionError("empty expression", source)
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError("syntax error", source, max(1, exc.offset or 1)) from None
    callees = {id(node.func) for node in ast.walk(tree) if isinstance(node, ast.Call)}
    for node in ast.walk(tree):
        _check(node, source, nvars)
        if isinstance(node, ast.Name) and node.id in FUNCTIONS and id(node) not in callees:
            raise ExpressionError(f"function {node.id} used as a value", source, node.col_offset + 1)
    return Expression(source.strip(), tree, nvars)


_ALLOWED = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant, ast.Name, ast.Call,
            ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd, ast.Load)


def _check(node, source, nvars):
    col = getattr(node, "col_offset", None)
    col = None if col is None else col + 1
    if not isinstance(node, _ALLOWED):
        raise ExpressionError(f"unsupported syntax {type(node).__name__}", source, col)
    if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float, complex)) \
            or isinstance(node, ast.Constant) and isinstance(node.value, bool):
        raise ExpressionError("only numeric constants are allowed", source, col)
    if isinstance(node, ast.Name):
        m = _VAR.match(node.id)
        if m:
            if int(m.group(2)) > nvars:
                raise ExpressionError(f"variable {node.id} out of range (n = {nvars})", source, col)
        elif node.id not in CONSTANTS and node.id not in FUNCTIONS:
            raise ExpressionError(f"unknown name {node.id!r}", source, col)
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise ExpressionError("unknown function", source, col)
        if node.keywords:
            raise ExpressionError("keyword arguments are not allowed", source, col)
        want = 2 if node.func.id == "root" else 1
        if len(node.args) != want:
            raise ExpressionError(f"{node.func.id} takes {want} argument(s)", source, col)


class _Evaluator:
    def __init__(self, z, zb, source):
        self.z, self.zb, self.source = z, zb, source

    def visit(self, node):
        if isinstance(node, ast.Constant):
            return node.value
        if isinstance(node, ast.Name):
            if node.id in CONSTANTS:
                return CONSTANTS[node.id]
            kind, idx = _VAR.match(node.id).groups()
            if kind == "zb":
                if self.zb is None:
                    raise ExpressionError("conjugate variables not available here", self.source)
                return self.zb[int(idx) - 1]
            return self.z[int(idx) - 1]
        if isinstance(node, ast.UnaryOp):
            v = self.visit(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            a, b = self.visit(node.left), self.visit(node.right)
            op = node.op
            if isinstance(op, ast.Add):
                return a + b
            if isinstance(op, ast.Sub):
                return a - b
            if isinstance(op, ast.Mult):
                return a * b
            if isinstance(op, ast.Div):
                return a / b
            return _power(a, b)
        if isinstance(node, ast.Call):
            args = [self.visit(x) for x in node.args]
            return _call(node.func.id, args, self.source)
        raise ExpressionError("unsupported syntax", self.source)


def _power(a, b):
    if isinstance(b, complex) and b.imag == 0:
        b = b.real
    if isinstance(b, (int, float)) and float(b).is_integer() and b >= 0:
        return a ** int(b)
    if hasattr(a, "power"):
        return a.power(float(b))
    return a ** b


def _call(name, args, source):
    x = args[0]
    if name == "root":
        k, j = args
        return cmath.exp(2j * math.pi * j / k)
    if name == "conj":
        return x.conj() if hasattr(x, "conj") else complex(x).conjugate()
    if hasattr(x, name):
        return getattr(x, name)()
    if isinstance(x, (int, float, complex)):
        return getattr(cmath, name)(x)
    raise ExpressionError(f"{name} is not available for this argument type", source)

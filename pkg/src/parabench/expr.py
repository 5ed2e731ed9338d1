"""Parsing, evaluation and exact differentiation of small arithmetic expressions.

Coefficient and boundary data enter the workbench as closed-form expressions in
one or two variables, so the derivatives needed by admissibility checks and
total-variation integrals come from symbolic differentiation instead of noisy
finite differences.  The grammar is deliberately small and smooth: ``+ - * /``,
integer powers, ``sin cos exp tanh sqrt`` and the constant ``pi``.  Non-smooth
primitives (absolute value, min/max, branches) are excluded on purpose; callers
that need ``|f|`` take absolute values of evaluated derivatives.

Precedence, tightest first: power, unary minus, ``* /``, ``+ -``; binary
operators associate to the left.  Power exponents must be constant integers so
differentiation stays closed and total.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ExprError",
    "ParseError",
    "DomainError",
    "ExprAst",
    "parse",
    "evaluate",
    "differentiate",
    "unparse",
]

FUNCTIONS = ("sin", "cos", "exp", "tanh", "sqrt")
CONSTANTS = {"pi": math.pi}

# |denominator| below this is treated as division by zero, never a silent inf.
DIVISION_GUARD = 1e-12


class ExprError(ValueError):
    """Base class for expression failures."""


class ParseError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class DomainError(ExprError):
    """Evaluation hit a point outside the expression's domain."""


# --- AST nodes -------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * /
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: int


@dataclass(frozen=True)
class Call:
    fn: str
    arg: object


@dataclass(frozen=True)
class ExprAst:
    """An immutable expression tree over a declared variable list."""

    root: object
    variables: tuple[str, ...]

    def __call__(self, **point):
        return evaluate(self, point)

    def diff(self, var: str) -> "ExprAst":
        return differentiate(self, var)

    def __str__(self) -> str:
        return unparse(self.root)


# --- parsing ---------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\^|[-+*/()])"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: tuple[str, ...]):
        self.text = text
        self.variables = variables
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, value, pos = self.next()
        if kind != "op" or value != op:
            raise ParseError(f"expected {op!r}, found {value!r}", pos)

    def parse(self):
        node = self.expr()
        kind, value, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing input {value!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.next()
                node = Bin(value, node, self.term())
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.next()
                node = Bin(value, node, self.factor())
            else:
                return node

    def factor(self):
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.next()
            return Neg(self.factor())
        return self.power()

    def power(self):
        node = self.atom()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value == "^":
                self.next()
                node = Pow(node, self.exponent())
            else:
                return node

    def exponent(self):
        sign = 1
        kind, value, pos = self.peek()
        if kind == "op" and value in "+-":
            self.next()
            sign = -1 if value == "-" else 1
            kind, value, pos = self.peek()
        if kind != "num":
            raise ParseError("exponent must be a constant integer", pos)
        self.next()
        if not re.fullmatch(r"\d+", value):
            raise ParseError(f"exponent must be a constant integer, got {value!r}", pos)
        return sign * int(value)

    def atom(self):
        kind, value, pos = self.next()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if value in CONSTANTS:
                return Const(value)
            if value in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(value, arg)
            if value in self.variables:
                return Var(value)
            raise ParseError(f"undeclared variable {value!r}", pos)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ParseError(f"unexpected token {value!r}", pos)


def parse(text: str, variables) -> ExprAst:
    """Parse ``text`` over the declared variable list (length 1 or 2)."""
    variables = tuple(variables)
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    if len(variables) not in (1, 2):
        raise ExprError("variable list must have length 1 or 2")
    if len(set(variables)) != len(variables):
        raise ExprError("variable names must be distinct")
    for name in variables:
        if name in FUNCTIONS or name in CONSTANTS:
            raise ExprError(f"variable name {name!r} clashes with a builtin")
        if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", name):
            raise ExprError(f"invalid variable name {name!r}")
    root = _Parser(text, variables).parse()
    return ExprAst(root, variables)


# --- evaluation ------------------------------------------------------------


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval(node.arg, env)
    if isinstance(node, Bin):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if np.any(np.abs(b) < DIVISION_GUARD):
            raise DomainError(f"division by near-zero in '{unparse(node)}'")
        return a / b
    if isinstance(node, Pow):
        base = _eval(node.base, env)
        if node.exponent < 0 and np.any(np.abs(base) < DIVISION_GUARD):
            raise DomainError(f"negative power of near-zero in '{unparse(node)}'")
        with np.errstate(over="raise"):
            try:
                return base ** float(node.exponent)
            except FloatingPointError:
                raise DomainError(f"overflow in '{unparse(node)}'") from None
    if isinstance(node, Call):
        arg = _eval(node.arg, env)
        if node.fn == "sqrt":
            if np.any(np.asarray(arg) < 0):
                raise DomainError(f"sqrt of negative value in '{unparse(node)}'")
            return np.sqrt(arg)
        if node.fn == "exp":
            out = np.exp(arg)
            if not np.all(np.isfinite(out)):
                raise DomainError(f"overflow in '{unparse(node)}'")
            return out
        if node.fn == "sin":
            return np.sin(arg)
        if node.fn == "cos":
            return np.cos(arg)
        return np.tanh(arg)
    raise TypeError(f"unknown node {node!r}")


def evaluate(ast: ExprAst, point):
    """Evaluate at ``point`` (mapping variable name -> scalar or ndarray).

    Scalar inputs give a float; array inputs broadcast elementwise.  Domain
    violations (division near zero, sqrt of a negative) raise ``DomainError``
    rather than producing non-finite values.
    """
    missing = [v for v in ast.variables if v not in point]
    if missing:
        raise ExprError(f"missing value for variable(s) {missing}")
    extra = [k for k in point if k not in ast.variables]
    if extra:
        raise ExprError(f"unknown variable(s) {extra}")
    env = {k: np.asarray(v, dtype=float) if np.ndim(v) else float(v) for k, v in point.items()}
    out = _eval(ast.root, env)
    if not np.all(np.isfinite(out)):
        raise DomainError(f"non-finite value of '{unparse(ast.root)}'")
    if np.ndim(out) == 0:
        return float(out)
    return np.asarray(out, dtype=float)


def evaluate_on(ast: ExprAst, point) -> np.ndarray:
    """Like :func:`evaluate` but always returns an array of the broadcast shape."""
    shape = np.broadcast_shapes(*(np.shape(v) for v in point.values()))
    out = evaluate(ast, point)
    if np.ndim(out) == 0:
        return np.full(shape, float(out))
    return np.broadcast_to(out, shape).copy()


# --- differentiation -------------------------------------------------------

_ZERO = Num(0.0)
_ONE = Num(1.0)


def _is_num(node, value):
    return isinstance(node, Num) and node.value == value


def _add(a, b):
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    return Bin("+", a, b)


def _sub(a, b):
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return Neg(b)
    return Bin("-", a, b)


def _mul(a, b):
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return _ZERO
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    return Bin("*", a, b)


def _div(a, b):
    if _is_num(a, 0.0):
        return _ZERO
    if _is_num(b, 1.0):
        return a
    return Bin("/", a, b)


def _pow(base, k):
    if k == 0:
        return _ONE
    if k == 1:
        return base
    return Pow(base, k)


def _diff(node, var):
    if isinstance(node, (Num, Const)):
        return _ZERO
    if isinstance(node, Var):
        return _ONE if node.name == var else _ZERO
    if isinstance(node, Neg):
        d = _diff(node.arg, var)
        return _ZERO if _is_num(d, 0.0) else Neg(d)
    if isinstance(node, Bin):
        da = _diff(node.left, var)
        db = _diff(node.right, var)
        if node.op == "+":
            return _add(da, db)
        if node.op == "-":
            return _sub(da, db)
        if node.op == "*":
            return _add(_mul(da, node.right), _mul(node.left, db))
        numerator = _sub(_mul(da, node.right), _mul(node.left, db))
        return _div(numerator, _pow(node.right, 2))
    if isinstance(node, Pow):
        db = _diff(node.base, var)
        factor = _mul(Num(float(node.exponent)), _pow(node.base, node.exponent - 1))
        return _mul(factor, db)
    if isinstance(node, Call):
        da = _diff(node.arg, var)
        if node.fn == "sin":
            outer = Call("cos", node.arg)
        elif node.fn == "cos":
            outer = Neg(Call("sin", node.arg))
        elif node.fn == "exp":
            outer = node
        elif node.fn == "tanh":
            outer = _sub(_ONE, Pow(node, 2))
        else:  # sqrt
            return _div(da, _mul(Num(2.0), node))
        return _mul(outer, da)
    raise TypeError(f"unknown node {node!r}")


def differentiate(ast: ExprAst, var: str) -> ExprAst:
    """Exact partial derivative with respect to a declared variable."""
    if var not in ast.variables:
        raise ExprError(f"cannot differentiate with respect to undeclared {var!r}")
    return ExprAst(_diff(ast.root, var), ast.variables)


# --- unparsing -------------------------------------------------------------


def unparse(node) -> str:
    """Fully parenthesized text form; reparsing gives an equivalent tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{unparse(node.arg)})"
    if isinstance(node, Bin):
        return f"({unparse(node.left)} {node.op} {unparse(node.right)})"
    if isinstance(node, Pow):
        return f"({unparse(node.base)} ^ {node.exponent})"
    if isinstance(node, Call):
        return f"{node.fn}({unparse(node.arg)})"
    raise TypeError(f"unknown node {node!r}")

"""
Scalar arithmetic expressions for drift and diffusion coefficients.

Grammar (lowest to highest precedence)::

    sum     := product (('+' | '-') product)*
    product := ('-' | '+') product | power (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom ('^' unary)?            # right-associative
    atom    := NUMBER | IDENT | IDENT '(' sum ')' | '(' sum ')'

``t`` is an ordinary identifier; the simulator binds it to the current time.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

__all__ = [
    "BinOp",
    "Call",
    "EvalError",
    "Expr",
    "FUNCTIONS",
    "Neg",
    "Num",
    "ParseError",
    "Var",
    "compile_expr",
    "evaluate",
    "identifiers",
    "parse",
    "pretty",
]


class ParseError(ValueError):
    def __init__(self, message: str, source: str, offset: int):
        super().__init__(f"{message} at offset {offset} in {source!r}")
        self.source = source
        self.offset = offset


class EvalError(ArithmeticError):
    def __init__(self, message: str, subexpr: "Expr | None" = None):
        where = f" in {pretty(subexpr)!r}" if subexpr is not None else ""
        super().__init__(message + where)
        self.subexpr = subexpr


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Call]


def _log(x: float) -> float:
    if x <= 0:
        raise ValueError("log of a non-positive value")
    return math.log(x)


def _sqrt(x: float) -> float:
    if x < 0:
        raise ValueError("sqrt of a negative value")
    return math.sqrt(x)


FUNCTIONS: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "log": _log,
    "sqrt": _sqrt,
    "abs": abs,
}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None:
            start = pos + len(source[pos:]) - len(source[pos:].lstrip())
            raise ParseError(f"unexpected character {source[start]!r}", source, start)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, expected: str):
        kind, text, offset = self.peek()
        found = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"expected {expected}, found {found}", self.source, offset)

    def expect_op(self, op: str):
        kind, text, _ = self.peek()
        if kind != "op" or text != op:
            self.fail(repr(op))
        self.take()

    def parse(self) -> Expr:
        if self.peek()[0] == "end":
            raise ParseError("empty expression", self.source, 0)
        node = self.sum()
        if self.peek()[0] != "end":
            self.fail("operator or end of input")
        return node

    def sum(self) -> Expr:
        node = self.product()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.product())
        return node

    def product(self) -> Expr:
        # a leading sign negates the whole term: -a*b is Neg(a*b)
        kind, text, _ = self.peek()
        if kind == "op" and text in "+-":
            self.take()
            inner = self.product()
            return Neg(inner) if text == "-" else inner
        node = self.power()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, text, offset = self.peek()
        if kind == "num":
            self.take()
            return Num(float(text))
        if kind == "ident":
            self.take()
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                if text not in FUNCTIONS:
                    raise ParseError(f"unknown function {text!r}", self.source, offset)
                self.take()
                arg = self.sum()
                self.expect_op(")")
                return Call(text, arg)
            return Var(text)
        if kind == "op" and text == "(":
            self.take()
            node = self.sum()
            self.expect_op(")")
            return node
        self.fail("number, identifier or '('")


def parse(source: str) -> Expr:
    """Parse ``source`` into an expression tree; raises :class:`ParseError`."""
    return _Parser(source).parse()


def pretty(expr: Expr) -> str:
    """Render ``expr`` fully parenthesised so that ``parse(pretty(e)) == e``."""
    if isinstance(expr, Num):
        return repr(float(expr.value))
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Neg):
        return f"(-{pretty(expr.operand)})"
    if isinstance(expr, BinOp):
        return f"({pretty(expr.left)} {expr.op} {pretty(expr.right)})"
    if isinstance(expr, Call):
        return f"{expr.func}({pretty(expr.arg)})"
    raise TypeError(f"not an expression: {expr!r}")


def identifiers(expr: Expr) -> set[str]:
    """Names of all variables referenced by ``expr``."""
    if isinstance(expr, Var):
        return {expr.name}
    if isinstance(expr, Num):
        return set()
    if isinstance(expr, Neg):
        return identifiers(expr.operand)
    if isinstance(expr, Call):
        return identifiers(expr.arg)
    return identifiers(expr.left) | identifiers(expr.right)


def _apply(op: str, a: float, b: float, node: Expr) -> float:
    try:
        if op == "+":
            r = a + b
        elif op == "-":
            r = a - b
        elif op == "*":
            r = a * b
        elif op == "/":
            if b == 0:
                raise EvalError("division by zero", node)
            r = a / b
        else:
            r = a ** b
    except (OverflowError, ZeroDivisionError) as exc:
        raise EvalError(str(exc), node) from None
    if isinstance(r, complex) or not math.isfinite(r):
        raise EvalError("non-finite intermediate value", node)
    return r


def _call(name: str, x: float, node: Expr) -> float:
    try:
        r = FUNCTIONS[name](x)
    except (ValueError, OverflowError) as exc:
        raise EvalError(str(exc), node) from None
    if not math.isfinite(r):
        raise EvalError("non-finite intermediate value", node)
    return r


def evaluate(expr: Expr, bindings: Mapping[str, float]) -> float:
    """Evaluate ``expr`` with variables looked up in ``bindings``."""
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        try:
            return float(bindings[expr.name])
        except KeyError:
            raise EvalError(f"unbound identifier {expr.name!r}") from None
    if isinstance(expr, Neg):
        return -evaluate(expr.operand, bindings)
    if isinstance(expr, Call):
        return _call(expr.func, evaluate(expr.arg, bindings), expr)
    return _apply(expr.op, evaluate(expr.left, bindings), evaluate(expr.right, bindings), expr)


def compile_expr(expr: Expr, names: Sequence[str]) -> Callable[..., float]:
    """Compile ``expr`` into a function of positional arguments ordered as ``names``.

    Same arithmetic and error behaviour as :func:`evaluate`, without the
    per-call dictionary lookups.
    """
    index = {n: i for i, n in enumerate(names)}

    def build(node: Expr):
        if isinstance(node, Num):
            v = node.value
            return lambda args: v
        if isinstance(node, Var):
            if node.name not in index:
                raise EvalError(f"unbound identifier {node.name!r}")
            k = index[node.name]
            return lambda args: args[k]
        if isinstance(node, Neg):
            f = build(node.operand)
            return lambda args: -f(args)
        if isinstance(node, Call):
            g = build(node.arg)
            name = node.func
            return lambda args: _call(name, g(args), node)
        left, right, op = build(node.left), build(node.right), node.op
        return lambda args: _apply(op, left(args), right(args), node)

    fn = build(expr)
    return lambda *args: fn(args)

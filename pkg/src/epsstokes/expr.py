"""Arithmetic expressions in ``x`` and ``y`` for configuration files.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?          # right-associative
    primary := NUMBER | x | y | pi | FUNC '(' expr ')' | '(' expr ')'

so ``-x^2`` is ``-(x^2)`` and ``2^3^2`` is ``2^(3^2)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

FUNCTIONS = {
    "sin": (math.sin, np.sin),
    "cos": (math.cos, np.cos),
    "exp": (math.exp, np.exp),
    "sqrt": (math.sqrt, np.sqrt),
}
VARIABLES = ("x", "y")
CONSTANTS = {"pi": math.pi}


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class EvalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Num:
    value: float
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"
    pos: int = field(default=0, compare=False)


Expr = Num | Var | Neg | BinOp | Call

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos)

    def parse(self) -> Expr:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected trailing token {text!r}", pos)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            _, op, pos = self.take()
            node = BinOp(op, node, self.term(), pos)
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, op, pos = self.take()
            node = BinOp(op, node, self.unary(), pos)
        return node

    def unary(self) -> Expr:
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Neg(self.unary(), pos)
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        kind, text, pos = self.peek()
        if kind == "op" and text == "^":
            self.take()
            return BinOp("^", base, self.unary(), pos)
        return base

    def primary(self) -> Expr:
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text), pos)
        if kind == "name":
            if text in VARIABLES:
                return Var(text, pos)
            if text in CONSTANTS:
                return Var(text, pos)
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg, pos)
            raise ExprSyntaxError(f"unknown identifier {text!r}", pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"expected a number, name or '(', found {found}", pos)


def parse(text: str) -> Expr:
    return _Parser(text).parse()


def to_text(node: Expr) -> str:
    """Fully parenthesized text that parses back to an identical tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(node: Expr, x: float, y: float) -> float:
    """Scalar IEEE-double evaluation; division by zero and domain errors raise EvalError."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.name == "x":
            return float(x)
        if node.name == "y":
            return float(y)
        return CONSTANTS[node.name]
    if isinstance(node, Neg):
        return -evaluate(node.operand, x, y)
    if isinstance(node, Call):
        arg = evaluate(node.arg, x, y)
        try:
            return FUNCTIONS[node.func][0](arg)
        except (ValueError, OverflowError) as exc:
            raise EvalError(f"{to_text(node)}: {exc} (argument {arg!r})") from exc
    a = evaluate(node.left, x, y)
    b = evaluate(node.right, x, y)
    op = node.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0.0:
            raise EvalError(f"division by zero in {to_text(node)}")
        return a / b
    try:
        return math.pow(a, b)
    except (ValueError, OverflowError, ZeroDivisionError) as exc:
        raise EvalError(f"{to_text(node)}: {exc} (base {a!r}, exponent {b!r})") from exc


def evaluate_array(node: Expr, x, y) -> np.ndarray:
    """Vectorized evaluation over broadcastable arrays ``x`` and ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = np.broadcast_shapes(x.shape, y.shape)
    with np.errstate(all="raise"):
        return np.broadcast_to(_eval_np(node, x, y), shape).copy()


def _eval_np(node: Expr, x, y):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return x if node.name == "x" else y if node.name == "y" else CONSTANTS[node.name]
    if isinstance(node, Neg):
        return -_eval_np(node.operand, x, y)
    if isinstance(node, Call):
        arg = _eval_np(node.arg, x, y)
        try:
            return FUNCTIONS[node.func][1](arg)
        except FloatingPointError as exc:
            raise EvalError(f"{to_text(node)}: {exc}") from exc
    a = _eval_np(node.left, x, y)
    b = _eval_np(node.right, x, y)
    try:
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if np.any(np.asarray(b) == 0.0):
                raise EvalError(f"division by zero in {to_text(node)}")
            return a / b
        if np.any((np.asarray(a) < 0) & (np.asarray(b) != np.round(b))):
            raise EvalError(f"{to_text(node)}: negative base with non-integer exponent")
        return np.power(a, b)
    except FloatingPointError as exc:
        raise EvalError(f"{to_text(node)}: {exc}") from exc


def compile_expr(text_or_node) -> "callable":
    """Vectorized ``f(x, y)`` from expression text."""
    node = parse(text_or_node) if isinstance(text_or_node, str) else text_or_node

    def f(x, y):
        return evaluate_array(node, x, y)

    f.expr = node
    f.__doc__ = to_text(node)
    return f

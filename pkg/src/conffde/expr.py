"""Expression trees for scalar real-valued functions of a single variable t.

The grammar supports +, -, *, / and right-associative ^ (tightest binding,
above unary minus), parentheses, decimal and scientific literals, the
constants ``pi`` and ``e``, the variable ``t``, and the functions
sin, cos, tan, exp, ln, sqrt, abs and two-argument pow.  There is no
implicit multiplication: ``2t`` is a parse error.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Union

from .errors import DomainError, ParseError

_FUNCTIONS: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "ln": math.log,
    "sqrt": math.sqrt,
    "abs": abs,
}

_CONSTANTS = {"pi": math.pi, "e": math.e}


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Variable:
    """The single independent variable t."""


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or a function name from _FUNCTIONS
    child: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


Expr = Union[Constant, Variable, Unary, Binary]

T = Variable()
ZERO = Constant(0.0)

_TOKEN_RE = re.compile(
    r"""(?P<num>(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)
      | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
      | (?P<op>[+\-*/^(),])
      | (?P<ws>\s+)
      | (?P<bad>.)""",
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "num", "name", "op", "end"
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    for m in _TOKEN_RE.finditer(source):
        kind = m.lastgroup
        if kind == "ws":
            continue
        if kind == "bad":
            raise ParseError(f"unexpected character {m.group()!r}", m.start())
        tokens.append(_Token(kind, m.group(), m.start()))
    tokens.append(_Token("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        if tok.kind != "end":
            self.i += 1
        return tok

    def expect_op(self, op: str) -> None:
        tok = self.peek()
        if tok.kind != "op" or tok.text != op:
            raise ParseError(f"expected {op!r}", tok.pos)
        self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ParseError(f"unexpected trailing input {tok.text!r}", tok.pos)
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            left = Binary(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            left = Binary(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            # right-associative; exponent may carry its own unary minus
            return Binary("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.advance()
        if tok.kind == "num":
            return Constant(float(tok.text))
        if tok.kind == "name":
            if tok.text in _CONSTANTS:
                return Constant(_CONSTANTS[tok.text])
            if tok.text == "t":
                return T
            if tok.text == "pow":
                self.expect_op("(")
                first = self.expr()
                self.expect_op(",")
                second = self.expr()
                self.expect_op(")")
                return Binary("^", first, second)
            if tok.text in _FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Unary(tok.text, arg)
            raise ParseError(f"unknown identifier {tok.text!r}", tok.pos)
        if tok.kind == "op" and tok.text == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        if tok.kind == "end":
            raise ParseError("dangling operator: expected operand", tok.pos)
        raise ParseError(f"unexpected token {tok.text!r}", tok.pos)


def parse(source: str) -> Expr:
    """Parse expression text into an immutable Expr tree.

    Raises ParseError (with byte offset) on malformed input.
    """
    if not source or not source.strip():
        raise ParseError("empty expression", 0)
    return _Parser(source).parse()


def _eval(e: Expr, t: float) -> float:
    if isinstance(e, Constant):
        return e.value
    if isinstance(e, Variable):
        return t
    if isinstance(e, Unary):
        x = _eval(e.child, t)
        if e.op == "neg":
            return -x
        if e.op == "ln" and x <= 0.0:
            raise DomainError("ln of non-positive value")
        if e.op == "sqrt" and x < 0.0:
            raise DomainError("sqrt of negative value")
        return _FUNCTIONS[e.op](x)
    a = _eval(e.left, t)
    b = _eval(e.right, t)
    op = e.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0.0:
            raise DomainError("division by zero")
        return a / b
    # op == "^"; math.pow rejects 0^negative and negative^fractional
    try:
        return math.pow(a, b)
    except ValueError as exc:
        raise DomainError(f"invalid power {a!r} ^ {b!r}") from exc


def evaluate(e: Expr, t: float) -> float:
    """Evaluate an Expr at t.  Non-finite results raise DomainError."""
    try:
        value = _eval(e, t)
    except DomainError:
        raise
    except (OverflowError, ZeroDivisionError, ValueError) as exc:
        raise DomainError(str(exc)) from exc
    if not math.isfinite(value):
        raise DomainError(f"non-finite value {value!r}")
    return value


def as_expr(obj) -> Expr:
    """Coerce a string, number, or Expr into an Expr tree."""
    if isinstance(obj, (Constant, Variable, Unary, Binary)):
        return obj
    if isinstance(obj, str):
        return parse(obj)
    if isinstance(obj, (int, float)):
        return Constant(float(obj))
    raise TypeError(f"cannot interpret {type(obj).__name__} as an expression")


def is_zero(e: Expr) -> bool:
    """Structural test for the zero expression (used for the homogeneous case)."""
    return isinstance(e, Constant) and e.value == 0.0

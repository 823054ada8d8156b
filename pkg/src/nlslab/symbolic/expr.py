"""A small arithmetic language for symbols in the variables x1, x2, x3.

Grammar, lowest to highest binding power::

    expr    := expr ('+' | '-') expr        left associative, power 10
             | expr ('*' | '/') expr        left associative, power 20
             | '-' expr | '+' expr          prefix, operand parsed at power 25
             | expr '^' expr                right associative, power 30
             | NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

NAME is one of x1, x2, x3, pi; FUNC is one of sin cos exp tanh sech sqrt.
So ``-x1^2`` is ``-(x1^2)`` and ``2^3^2`` is ``2^(3^2)``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

VARIABLES = ("x1", "x2", "x3")
CONSTANTS = {"pi": np.pi}


def _sech(x):
    return 1.0 / np.cosh(x)


FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "tanh": np.tanh,
    "sech": _sech,
    "sqrt": np.sqrt,
}

BINARY_POWER = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
PREFIX_POWER = 25


class ParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class EvaluationError(ArithmeticError):
    def __init__(self, message: str, point=None):
        super().__init__(message if point is None else f"{message} at {point}")
        self.point = point


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


@dataclass(frozen=True)
class Token:
    kind: str  # num, name, op, end
    text: str
    offset: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        tokens.append(Token(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


# AST nodes ------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail_at(self, tok: Token, message: str):
        # an unexpected end of input is reported at the token that needed an operand
        if tok.kind == "end" and self.i > 0:
            prev = self.tokens[self.i - 1]
            raise ParseError(f"{message} after {prev.text!r}", prev.offset)
        raise ParseError(message, tok.offset)

    def parse(self):
        node = self.expression(0)
        if self.current.kind != "end":
            self.fail_at(self.current, f"unexpected {self.current.text!r}")
        return node

    def expression(self, rbp: int):
        left = self.nud(self.advance())
        while self.current.kind == "op" and BINARY_POWER.get(self.current.text, -1) > rbp:
            left = self.led(self.advance(), left)
        return left

    def nud(self, tok: Token):
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "name":
            if tok.text in VARIABLES:
                return Var(tok.text)
            if tok.text in CONSTANTS:
                return Num(CONSTANTS[tok.text])
            if tok.text in FUNCTIONS:
                self.expect("(", tok)
                arg = self.expression(0)
                self.expect(")", tok)
                return Call(tok.text, arg)
            raise ParseError(f"unknown identifier {tok.text!r}", tok.offset)
        if tok.kind == "op" and tok.text in "+-":
            self.i -= 1
            self.need_operand()
            self.i += 1
            operand = self.expression(PREFIX_POWER)
            return operand if tok.text == "+" else Unary("-", operand)
        if tok.kind == "op" and tok.text == "(":
            self.need_operand()
            inner = self.expression(0)
            self.expect(")", tok)
            return inner
        self.i -= 1
        self.fail_at(tok, "expected an operand" if tok.kind == "end" else f"unexpected {tok.text!r}")

    def led(self, tok: Token, left):
        op = tok.text
        self.need_operand()
        # '^' is right associative: parse its right side at one less binding power
        power = BINARY_POWER[op] - 1 if op == "^" else BINARY_POWER[op]
        return Binary(op, left, self.expression(power))

    def need_operand(self):
        if self.tokens[self.i].kind == "end":
            self.fail_at(self.tokens[self.i], "expected an operand")

    def expect(self, text: str, opener: Token):
        tok = self.current
        if tok.kind == "op" and tok.text == text:
            self.advance()
            return
        if tok.kind == "end":
            self.fail_at(tok, f"expected {text!r}")
        raise ParseError(f"expected {text!r}, found {tok.text!r}", tok.offset)


def parse(text: str):
    """Parse ``text`` into a constant-folded AST."""
    if not text.strip():
        raise ParseError("empty expression", 0)
    return fold(_Parser(text).parse())


# folding and evaluation -----------------------------------------------------

def _apply_binary(op, a, b):
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    return a ** b


def fold(node):
    """Collapse every variable-free subtree to a number."""
    if isinstance(node, Unary):
        inner = fold(node.operand)
        return Num(-inner.value) if isinstance(inner, Num) else Unary(node.op, inner)
    if isinstance(node, Binary):
        left, right = fold(node.left), fold(node.right)
        if isinstance(left, Num) and isinstance(right, Num):
            if node.op == "/" and right.value == 0:
                return Binary(node.op, left, right)  # reported at evaluation
            with np.errstate(all="ignore"):
                value = _apply_binary(node.op, left.value, right.value)
            if np.isfinite(value) and np.isreal(value):
                return Num(float(value))
        return Binary(node.op, left, right)
    if isinstance(node, Call):
        arg = fold(node.arg)
        if isinstance(arg, Num):
            with np.errstate(all="ignore"):
                value = FUNCTIONS[node.func](arg.value)
            if np.isfinite(value):
                return Num(float(value))
        return Call(node.func, arg)
    return node


def variables(node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Unary):
        return variables(node.operand)
    if isinstance(node, Binary):
        return variables(node.left) | variables(node.right)
    if isinstance(node, Call):
        return variables(node.arg)
    return set()


def swap(node, a: str, b: str):
    """Rename variable a to b and b to a."""
    if isinstance(node, Var):
        return Var({a: b, b: a}.get(node.name, node.name))
    if isinstance(node, Unary):
        return Unary(node.op, swap(node.operand, a, b))
    if isinstance(node, Binary):
        return Binary(node.op, swap(node.left, a, b), swap(node.right, a, b))
    if isinstance(node, Call):
        return Call(node.func, swap(node.arg, a, b))
    return node


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Unary):
        return -_eval(node.operand, env)
    if isinstance(node, Binary):
        left = _eval(node.left, env)
        right = _eval(node.right, env)
        if node.op == "/" and np.any(np.asarray(right) == 0):
            raise EvaluationError("division by zero", _first_point(np.asarray(right) == 0, env))
        return _apply_binary(node.op, left, right)
    return FUNCTIONS[node.func](_eval(node.arg, env))


def _first_point(mask, env):
    mask = np.broadcast_to(mask, np.broadcast(*env.values()).shape)
    idx = np.unravel_index(np.argmax(mask), mask.shape) if mask.ndim else ()
    return tuple(float(np.broadcast_to(env[v], mask.shape)[idx]) for v in VARIABLES)


def evaluate(node, x1, x2, x3) -> np.ndarray:
    """Evaluate an AST on broadcast arrays; non-finite output is an error."""
    env = {"x1": np.asarray(x1, dtype=float), "x2": np.asarray(x2, dtype=float),
           "x3": np.asarray(x3, dtype=float)}
    with np.errstate(all="ignore"):
        out = _eval(node, env)
    shape = np.broadcast(env["x1"], env["x2"], env["x3"]).shape
    out = np.broadcast_to(np.asarray(out), shape)
    if not np.all(np.isfinite(out)):
        raise EvaluationError("non-finite symbol value", _first_point(~np.isfinite(out), env))
    return out


def to_text(node) -> str:
    """Fully parenthesised rendering, reparsable by :func:`parse`."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, Binary):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    return f"{node.func}({to_text(node.arg)})"

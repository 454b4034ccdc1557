"""A small expression language for immersion components and support functions.

Grammar (``^`` binds tighter than unary minus, which binds tighter than
``*``/``/``; ``^`` is right associative)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom ('^' unary)?
    atom    := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'

Identifiers ``u1`` .. ``u9`` are chart variables; any other lower-case name
is a parameter that must be resolved before evaluation.  ``pi`` is always
available as a parameter.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ArityError, DomainError, DSLSyntaxError, HyperparError, UnknownIdentifier
from .jet import Jet, as_points

FUNCTIONS = {"sin": 1, "cos": 1, "tan": 1, "exp": 1, "ln": 1, "sqrt": 1, "abs": 1, "pow": 2}
BUILTIN_PARAMS = {"pi": math.pi}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # zero-based


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Expr = Num | Var | Param | Neg | BinOp | Call

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[a-z][a-z0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text):
    tokens, pos = [], 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise DSLSyntaxError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, n):
        self.text = text
        self.n = n
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value:
            found = "end of input" if kind == "end" else repr(text)
            raise DSLSyntaxError(f"expected {value!r}, found {found}", pos)

    def parse(self):
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise DSLSyntaxError(f"unexpected {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                return self.call(text, pos)
            if text in FUNCTIONS:
                raise DSLSyntaxError(f"function {text!r} needs an argument list", pos)
            m = re.fullmatch(r"u([1-9])", text)
            if m:
                index = int(m.group(1)) - 1
                if index >= self.n:
                    raise UnknownIdentifier(f"variable {text!r} at position {pos} exceeds chart dimension {self.n}")
                return Var(index)
            if not re.fullmatch(r"[a-z]+", text):
                raise UnknownIdentifier(f"invalid identifier {text!r} at position {pos}")
            return Param(text)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise DSLSyntaxError(f"unexpected {found}", pos)

    def call(self, name, pos):
        if name not in FUNCTIONS:
            raise UnknownIdentifier(f"unknown function {name!r} at position {pos}")
        self.expect("(")
        args = [self.expr()]
        while self.peek()[1] == "," and self.peek()[0] == "op":
            self.take()
            args.append(self.expr())
        self.expect(")")
        if len(args) != FUNCTIONS[name]:
            raise ArityError(f"{name} takes {FUNCTIONS[name]} argument(s), got {len(args)} (position {pos})")
        return Call(name, tuple(args))


def parse(text: str, n: int) -> Expr:
    """Parse ``text`` over chart variables ``u1..un``."""
    if not text or not text.strip():
        raise DSLSyntaxError("empty expression", 0)
    if not 1 <= n <= 9:
        raise ValueError(f"chart dimension must be in 1..9, got {n}")
    return _Parser(text, n).parse()


def pretty(e: Expr) -> str:
    """Fully parenthesised text that parses back to the same tree."""
    match e:
        case Num(value):
            return repr(float(value))
        case Var(index):
            return f"u{index + 1}"
        case Param(name):
            return name
        case Neg(operand):
            return f"(-{pretty(operand)})"
        case BinOp(op, left, right):
            return f"({pretty(left)} {op} {pretty(right)})"
        case Call(name, args):
            return f"{name}({', '.join(pretty(a) for a in args)})"
    raise TypeError(f"not an expression node: {e!r}")


def resolve(e: Expr, params: dict | None = None) -> Expr:
    """Replace parameters by literals; unknown names raise :class:`UnknownIdentifier`."""
    table = dict(BUILTIN_PARAMS)
    table.update(params or {})
    match e:
        case Param(name):
            if name not in table:
                raise UnknownIdentifier(f"unresolved parameter {name!r}")
            return Num(float(table[name]))
        case Neg(operand):
            return Neg(resolve(operand, params))
        case BinOp(op, left, right):
            return BinOp(op, resolve(left, params), resolve(right, params))
        case Call(name, args):
            return Call(name, tuple(resolve(a, params) for a in args))
    return e


def variables(e: Expr) -> set[int]:
    match e:
        case Var(index):
            return {index}
        case Neg(operand):
            return variables(operand)
        case BinOp(_, left, right):
            return variables(left) | variables(right)
        case Call(_, args):
            return set().union(*(variables(a) for a in args))
    return set()


def _constant_value(node):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Neg) and isinstance(node.operand, Num):
        return -node.operand.value
    return None


_JET_FUNCS = {
    "sin": Jet.sin,
    "cos": Jet.cos,
    "tan": Jet.tan,
    "exp": Jet.exp,
    "ln": Jet.log,
    "sqrt": Jet.sqrt,
    "abs": Jet.abs,
}


def eval_jet(e: Expr, points, order: int, params: dict | None = None) -> Jet:
    """Jet of ``e`` at a batch of chart points (``(n,)`` or ``(batch, n)``)."""
    pts = as_points(points)
    n = pts.shape[1]
    if params:
        e = resolve(e, params)
    cache = {}

    def var(i):
        if i not in cache:
            cache[i] = Jet.variable(i, pts, order)
        return cache[i]

    def ev(node):
        try:
            return _ev(node)
        except HyperparError as err:
            if not getattr(err, "expr_path", None):
                err.expr_path = pretty(node)
                err.args = (f"{err.args[0] if err.args else err} [in {err.expr_path}]",) + err.args[1:]
            raise

    def _ev(node):
        match node:
            case Num(value):
                return Jet.constant(np.full(pts.shape[0], value), n, order)
            case Var(index):
                if index >= n:
                    raise UnknownIdentifier(f"variable u{index + 1} exceeds chart dimension {n}")
                return var(index)
            case Param(name):
                if name in BUILTIN_PARAMS:
                    return Jet.constant(np.full(pts.shape[0], BUILTIN_PARAMS[name]), n, order)
                raise UnknownIdentifier(f"unresolved parameter {name!r}")
            case Neg(operand):
                return -ev(operand)
            case BinOp("+", left, right):
                return ev(left) + ev(right)
            case BinOp("-", left, right):
                return ev(left) - ev(right)
            case BinOp("*", left, right):
                return ev(left) * ev(right)
            case BinOp("/", left, right):
                return ev(left) / ev(right)
            case BinOp("^", left, right):
                return _power(ev(left), right)
            case Call("pow", (base, expo)):
                return _power(ev(base), expo)
            case Call(name, (arg,)):
                return _JET_FUNCS[name](ev(arg))
        raise TypeError(f"not an expression node: {node!r}")

    def _power(base, expo_node):
        c = _constant_value(expo_node)
        if c is not None:
            return base.ipow(int(c)) if float(c).is_integer() else base.pow(c)
        if not variables(expo_node):
            expo = ev(expo_node)
            value = float(expo.value.flat[0])
            return base.ipow(int(value)) if value.is_integer() else base.pow(value)
        return base ** ev(expo_node)

    return ev(e)


_FLOAT_FUNCS = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "sqrt": math.sqrt,
    "abs": abs,
}


def evaluate(e: Expr, point, params: dict | None = None) -> float:
    """Plain floating-point evaluation at a single chart point."""
    point = [float(p) for p in np.asarray(point, dtype=float).ravel()]
    table = dict(BUILTIN_PARAMS)
    table.update(params or {})

    def ev(node):
        match node:
            case Num(value):
                return value
            case Var(index):
                return point[index]
            case Param(name):
                if name not in table:
                    raise UnknownIdentifier(f"unresolved parameter {name!r}")
                return float(table[name])
            case Neg(operand):
                return -ev(operand)
            case BinOp(op, left, right):
                a, b = ev(left), ev(right)
                if op == "+":
                    return a + b
                if op == "-":
                    return a - b
                if op == "*":
                    return a * b
                if op == "/":
                    return a / b
                return _fpow(a, b)
            case Call("pow", (base, expo)):
                return _fpow(ev(base), ev(expo))
            case Call("ln", (arg,)):
                v = ev(arg)
                if v <= 0:
                    raise DomainError("ln of a non-positive value")
                return math.log(v)
            case Call(name, (arg,)):
                return _FLOAT_FUNCS[name](ev(arg))
        raise TypeError(f"not an expression node: {node!r}")

    return float(ev(e))


def _fpow(a, b):
    if float(b).is_integer():
        return a ** int(b)
    if a <= 0:
        raise DomainError(f"non-integral power {b} of a non-positive value")
    return a**b

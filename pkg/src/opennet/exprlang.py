"""Scalar expressions over named real variables.

Every map, vector field and Jacobian in :mod:`opennet` is a tuple of
:class:`Expr` trees.  The module provides a small infix parser, an
evaluator, symbolic differentiation and substitution.

Grammar (loosest binding first)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'

Identifiers may contain dots (``n0.x``), which is how product
coordinates are named.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

__all__ = [
    "Expr", "Const", "Var", "Unary", "Binary",
    "ExprError", "ExprSyntaxError", "UnknownIdentifier", "UnknownFunction",
    "EvalError", "UnboundVariable", "DivisionByZero", "DomainError",
    "DiffError",
    "parse", "evaluate", "diff", "jacobian", "substitute", "to_str",
    "free_vars", "compile_expr", "compile_vector", "const", "var",
    "FUNCTIONS",
]


class ExprError(Exception):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int, source: str = ""):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.source = source


class UnknownIdentifier(ExprSyntaxError):
    def __init__(self, name: str, offset: int, source: str = ""):
        super().__init__(f"unknown identifier {name!r}", offset, source)
        self.name = name


class UnknownFunction(ExprSyntaxError):
    def __init__(self, name: str, offset: int, source: str = ""):
        super().__init__(f"unknown function {name!r}", offset, source)
        self.name = name


class EvalError(ExprError, ArithmeticError):
    """Raised when an expression cannot be evaluated at a point."""


class UnboundVariable(EvalError):
    def __init__(self, name: str):
        super().__init__(f"unbound variable {name!r}")
        self.name = name


class DivisionByZero(EvalError):
    pass


class DomainError(EvalError):
    pass


class DiffError(ExprError):
    pass


FUNCTIONS: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "tanh": math.tanh,
    "sqrt": math.sqrt,
}

_BINARY: dict[str, Callable[[float, float], float]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: a / b,
    "^": math.pow,
}


# ---------------------------------------------------------------------------
# nodes

class Expr:
    """Immutable expression node.  Arithmetic operators build new trees."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __rtruediv__(self, other):
        return div(_lift(other), self)

    def __pow__(self, other):
        return power(self, _lift(other))

    def __neg__(self):
        return neg(self)

    def __str__(self):
        return to_str(self)


@dataclass(frozen=True, slots=True, repr=False)
class Const(Expr):
    value: float

    def __repr__(self):
        return f"Const({self.value!r})"


@dataclass(frozen=True, slots=True, repr=False)
class Var(Expr):
    name: str

    def __repr__(self):
        return f"Var({self.name!r})"


@dataclass(frozen=True, slots=True, repr=False)
class Unary(Expr):
    op: str  # "neg" or a key of FUNCTIONS
    arg: Expr

    def __repr__(self):
        return f"Unary({self.op!r}, {self.arg!r})"


@dataclass(frozen=True, slots=True, repr=False)
class Binary(Expr):
    op: str  # one of + - * / ^
    left: Expr
    right: Expr

    def __repr__(self):
        return f"Binary({self.op!r}, {self.left!r}, {self.right!r})"


ZERO = Const(0.0)
ONE = Const(1.0)


def const(value: float) -> Const:
    return Const(float(value))


def var(name: str) -> Var:
    return Var(name)


def _lift(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float)):
        return Const(float(x))
    if isinstance(x, str):
        return Var(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


# Builders used by diff/substitute.  They fold literal subtrees and drop
# additive zeros and multiplicative ones; nothing more.

def _fold(op: str, *args: float) -> Const | None:
    try:
        if op in _BINARY:
            v = _BINARY[op](*args)
        elif op == "neg":
            v = -args[0]
        else:
            v = FUNCTIONS[op](*args)
    except (ArithmeticError, ValueError):
        return None
    if not math.isfinite(v):
        return None
    return Const(v)


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold("+", a.value, b.value) or Binary("+", a, b)
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return Binary("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold("-", a.value, b.value) or Binary("-", a, b)
    if b == ZERO:
        return a
    if a == ZERO:
        return neg(b)
    return Binary("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold("*", a.value, b.value) or Binary("*", a, b)
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return Binary("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold("/", a.value, b.value) or Binary("/", a, b)
    if b == ONE:
        return a
    return Binary("/", a, b)


def power(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold("^", a.value, b.value) or Binary("^", a, b)
    if b == ONE:
        return a
    if b == ZERO:
        return ONE
    return Binary("^", a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def func(name: str, a: Expr) -> Expr:
    if isinstance(a, Const):
        return _fold(name, a.value) or Unary(name, a)
    return Unary(name, a)


_BUILDERS = {"+": add, "-": sub, "*": mul, "/": div, "^": power}


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_.]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos, source)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source: str, names: frozenset[str] | None):
        self.source = source
        self.names = names
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        what = "end of input" if tok[0] == "end" else repr(tok[1])
        return ExprSyntaxError(f"{message}, found {what}", tok[2], self.source)

    def expect(self, op):
        tok = self.peek()
        if tok[0] != "op" or tok[1] != op:
            raise self.error(f"expected {op!r}")
        return self.take()

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "end":
            raise self.error("unexpected token")
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            left = Binary(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            left = Binary(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.peek()
        kind, text, offset = tok
        if kind == "num":
            self.take()
            return Const(float(text))
        if kind == "ident":
            self.take()
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "(":
                if text not in FUNCTIONS:
                    raise UnknownFunction(text, offset, self.source)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Unary(text, arg)
            if self.names is not None and text not in self.names:
                raise UnknownIdentifier(text, offset, self.source)
            return Var(text)
        if kind == "op" and text == "(":
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        raise self.error("expected a number, identifier or '('")


def parse(source: str, variables: Iterable[str] | None = None) -> Expr:
    """Parse `source` into an expression tree.

    If `variables` is given, every identifier must be one of them.
    """
    names = None if variables is None else frozenset(variables)
    return _Parser(source, names).parse()


# ---------------------------------------------------------------------------
# printing

def _fmt_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        text = str(int(v))
    else:
        text = repr(v)
    if v < 0 or (v == 0 and math.copysign(1.0, v) < 0):
        return f"(-{text.lstrip('-')})"
    return text


def to_str(e: Expr) -> str:
    """Print `e` fully parenthesized; `parse(to_str(e))` rebuilds the same ops."""
    if isinstance(e, Const):
        return _fmt_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"(-{to_str(e.arg)})"
        return f"{e.op}({to_str(e.arg)})"
    if isinstance(e, Binary):
        return f"({to_str(e.left)} {e.op} {to_str(e.right)})"
    raise TypeError(e)


# ---------------------------------------------------------------------------
# evaluation

def _call(fn, *args):
    try:
        return fn(*args)
    except ZeroDivisionError as exc:
        raise DivisionByZero("division by zero") from exc
    except ValueError as exc:
        raise DomainError(str(exc)) from exc
    except OverflowError as exc:
        raise EvalError(f"overflow: {exc}") from exc


def evaluate(e: Expr, env: Mapping[str, float]) -> float:
    """Evaluate `e` with variables bound by `env`."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return float(env[e.name])
        except KeyError:
            raise UnboundVariable(e.name) from None
    if isinstance(e, Unary):
        a = evaluate(e.arg, env)
        if e.op == "neg":
            return -a
        return _call(FUNCTIONS[e.op], a)
    if isinstance(e, Binary):
        a = evaluate(e.left, env)
        b = evaluate(e.right, env)
        return _call(_BINARY[e.op], a, b)
    raise TypeError(e)


def _closure(e: Expr, index: Mapping[str, int]):
    if isinstance(e, Const):
        v = e.value
        return lambda x: v
    if isinstance(e, Var):
        try:
            i = index[e.name]
        except KeyError:
            raise UnboundVariable(e.name) from None
        return lambda x: x[i]
    if isinstance(e, Unary):
        a = _closure(e.arg, index)
        if e.op == "neg":
            return lambda x: -a(x)
        f = FUNCTIONS[e.op]
        return lambda x: f(a(x))
    if isinstance(e, Binary):
        a = _closure(e.left, index)
        b = _closure(e.right, index)
        op = e.op
        if op == "+":
            return lambda x: a(x) + b(x)
        if op == "-":
            return lambda x: a(x) - b(x)
        if op == "*":
            return lambda x: a(x) * b(x)
        if op == "/":
            return lambda x: a(x) / b(x)
        return lambda x: math.pow(a(x), b(x))
    raise TypeError(e)


def compile_expr(e: Expr, variables: Sequence[str]) -> Callable[[Sequence[float]], float]:
    """Return ``f(values)`` evaluating `e` with ``values[i]`` bound to ``variables[i]``.

    Performs the same floating-point operations as :func:`evaluate`.
    """
    index = {name: i for i, name in enumerate(variables)}
    fn = _closure(e, index)
    return lambda x: _call(fn, x)


def compile_vector(exprs: Sequence[Expr], variables: Sequence[str]):
    """Vector version of :func:`compile_expr`; returns a list of floats."""
    index = {name: i for i, name in enumerate(variables)}
    fns = [_closure(e, index) for e in exprs]

    def run(x):
        return [_call(f, x) for f in fns]

    return run


# ---------------------------------------------------------------------------
# structure

def free_vars(e: Expr) -> frozenset[str]:
    out: set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, Unary):
            stack.append(node.arg)
        elif isinstance(node, Binary):
            stack.append(node.left)
            stack.append(node.right)
    return frozenset(out)


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions simultaneously."""
    memo: dict[Expr, Expr] = {}

    def go(node: Expr) -> Expr:
        hit = memo.get(node)
        if hit is not None:
            return hit
        if isinstance(node, Const):
            out = node
        elif isinstance(node, Var):
            out = mapping.get(node.name, node)
        elif isinstance(node, Unary):
            a = go(node.arg)
            out = neg(a) if node.op == "neg" else func(node.op, a)
        else:
            out = _BUILDERS[node.op](go(node.left), go(node.right))
        memo[node] = out
        return out

    return go(e)


def rename(e: Expr, mapping: Mapping[str, str]) -> Expr:
    return substitute(e, {k: Var(v) for k, v in mapping.items()})


# ---------------------------------------------------------------------------
# differentiation

def diff(e: Expr, v: str) -> Expr:
    """Symbolic partial derivative of `e` with respect to variable `v`.

    ``pow`` is only differentiable when its exponent is a literal
    (variable-free) subtree.
    """
    memo: dict[Expr, Expr] = {}

    def d(node: Expr) -> Expr:
        hit = memo.get(node)
        if hit is not None:
            return hit
        out = _d(node)
        memo[node] = out
        return out

    def _d(node: Expr) -> Expr:
        if isinstance(node, Const):
            return ZERO
        if isinstance(node, Var):
            return ONE if node.name == v else ZERO
        if isinstance(node, Unary):
            a = node.arg
            da = d(a)
            if da == ZERO:
                return ZERO
            if node.op == "neg":
                return neg(da)
            if node.op == "sin":
                return mul(func("cos", a), da)
            if node.op == "cos":
                return mul(neg(func("sin", a)), da)
            if node.op == "exp":
                return mul(node, da)
            if node.op == "tanh":
                return mul(sub(ONE, power(node, Const(2.0))), da)
            if node.op == "sqrt":
                return div(da, mul(Const(2.0), node))
            raise DiffError(f"cannot differentiate {node.op}")
        if isinstance(node, Binary):
            a, b = node.left, node.right
            if node.op == "^":
                if free_vars(b):
                    raise DiffError(
                        f"pow with non-constant exponent {to_str(b)!r} is not differentiable"
                    )
                da = d(a)
                if da == ZERO:
                    return ZERO
                c = Const(evaluate(b, {}))
                return mul(mul(c, power(a, sub(c, ONE))), da)
            da, db = d(a), d(b)
            if node.op == "+":
                return add(da, db)
            if node.op == "-":
                return sub(da, db)
            if node.op == "*":
                return add(mul(da, b), mul(a, db))
            if node.op == "/":
                if db == ZERO:
                    return div(da, b)
                return div(sub(mul(da, b), mul(a, db)), power(b, Const(2.0)))
        raise DiffError(f"cannot differentiate {node!r}")

    return d(e)


def jacobian(f: Sequence[Expr], variables: Sequence[str]) -> list[list[Expr]]:
    """Matrix of partial derivatives, entry (i, j) = d f[i] / d variables[j]."""
    return [[diff(fi, v) for v in variables] for fi in f]

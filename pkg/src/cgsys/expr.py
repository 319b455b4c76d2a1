"""Expression trees over named real variables.

A scalar expression is an immutable tree built from real constants, named
variables, the unary functions neg/sin/cos/tan/atan/exp/log/sqrt, the binary
operators ``+ - * / ^`` and the two-argument ``atan2``.  Trees evaluate in
IEEE double precision and differentiate structurally, so nested second
derivatives (needed for dd^c and Laplacian residuals) stay exact instead of
picking up finite-difference noise.

Construction applies a fixed list of light simplifications and nothing more:

* constant folding of arithmetic on two constants (skipped when it would
  raise, e.g. division by a zero constant)
* ``0 + e -> e``, ``e + 0 -> e``, ``e - 0 -> e``
* ``0 * e -> 0``, ``e * 0 -> 0``, ``1 * e -> e``, ``e * 1 -> e``
* ``e / 1 -> e``, ``e ^ 1 -> e``
* negation of a constant folds to a constant

There is no canonicalization beyond that list.  The parser builds nodes
through the same constructors, which is what keeps
``parse_expr(to_string(t))`` structurally equal to ``t``.

Everything in this module is pure and immutable; expressions and
environments can be shared between threads without synchronization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cache

__all__ = [
    "Expr", "Const", "Var", "Unary", "Binary", "Atan2",
    "ExprError", "ParseError", "UnknownFunctionError",
    "UnboundVariableError", "DomainError",
    "parse_expr", "evaluate", "diff", "free_vars", "subst", "to_string",
    "add", "sub", "mul", "div", "pow_", "neg", "unary", "as_expr",
    "UNARY_OPS", "BINARY_OPS",
]

UNARY_OPS = ("neg", "sin", "cos", "tan", "atan", "exp", "log", "sqrt")
BINARY_OPS = ("add", "sub", "mul", "div", "pow")


class ExprError(ValueError):
    """Base class for expression failures."""


class ParseError(ExprError):
    """Malformed expression text; ``offset`` is the byte offset of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnknownFunctionError(ParseError):
    """An identifier was called like a function but names none."""


class UnboundVariableError(ExprError):
    """Evaluation met a variable absent from the environment."""


class DomainError(ExprError):
    """Evaluation left an operation's domain; the message names the node."""


class Expr:
    """Base node type.  Subclasses are frozen dataclasses, equality is
    structural, and arithmetic operators build new trees through the
    simplifying constructors below."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __pow__(self, other):
        return pow_(self, as_expr(other))

    def __neg__(self):
        return neg(self)

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: float


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, slots=True)
class Unary(Expr):
    op: str
    arg: Expr


@dataclass(frozen=True, slots=True)
class Binary(Expr):
    op: str
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True, slots=True)
class Atan2(Expr):
    y: Expr
    x: Expr


ZERO = Const(0.0)
ONE = Const(1.0)


def as_expr(value) -> Expr:
    """Coerce a number or string to an expression (strings are parsed)."""
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return parse_expr(value)
    if isinstance(value, (int, float)):
        return Const(float(value))
    raise TypeError(f"cannot convert {type(value).__name__} to Expr")


def _is_const(e: Expr, v: float) -> bool:
    return isinstance(e, Const) and e.value == v


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Binary("add", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    return Binary("sub", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Binary("mul", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is_const(b, 1.0):
        return a
    return Binary("div", a, b)


def pow_(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 1.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        try:
            return Const(_eval_pow(a.value, b.value, None))
        except (DomainError, OverflowError):
            pass
    return Binary("pow", a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    return Unary("neg", a)


def unary(op: str, a: Expr) -> Expr:
    if op == "neg":
        return neg(a)
    if op not in UNARY_OPS:
        raise ValueError(f"unknown unary operation {op!r}")
    return Unary(op, a)


# ---------------------------------------------------------------------------
# evaluation


def _eval_pow(base: float, expo: float, node) -> float:
    if base == 0.0 and expo < 0.0:
        raise DomainError(f"zero raised to negative power in '{_name(node)}'")
    if base < 0.0 and expo != int(expo):
        raise DomainError(f"negative base with non-integer exponent in '{_name(node)}'")
    try:
        return float(base ** expo)
    except OverflowError:
        raise DomainError(f"overflow in '{_name(node)}'") from None


def _name(node) -> str:
    return to_string(node) if node is not None else "pow"


def evaluate(e: Expr, env: dict[str, float]) -> float:
    """Evaluate ``e`` with variables bound by ``env``.

    Deterministic IEEE double arithmetic: the same tree and environment give
    a bit-identical result.  Lookup of an absent variable raises
    UnboundVariableError, never a default.  Division by zero, log of a
    non-positive value, sqrt of a negative value and similar propagate as
    DomainError naming the offending node, never as NaN.
    """
    match e:
        case Const(value=v):
            return v
        case Var(name=n):
            try:
                return float(env[n])
            except KeyError:
                raise UnboundVariableError(f"unbound variable '{n}'") from None
        case Unary(op=op, arg=a):
            x = evaluate(a, env)
            if op == "neg":
                return -x
            if op == "sin":
                return math.sin(x)
            if op == "cos":
                return math.cos(x)
            if op == "tan":
                return math.tan(x)
            if op == "atan":
                return math.atan(x)
            if op == "exp":
                try:
                    return math.exp(x)
                except OverflowError:
                    raise DomainError(f"overflow in '{to_string(e)}'") from None
            if op == "log":
                if x <= 0.0:
                    raise DomainError(f"log of non-positive value in '{to_string(e)}'")
                return math.log(x)
            if op == "sqrt":
                if x < 0.0:
                    raise DomainError(f"sqrt of negative value in '{to_string(e)}'")
                return math.sqrt(x)
            raise ValueError(f"unknown unary operation {op!r}")
        case Binary(op=op, lhs=l, rhs=r):
            a = evaluate(l, env)
            b = evaluate(r, env)
            if op == "add":
                return a + b
            if op == "sub":
                return a - b
            if op == "mul":
                return a * b
            if op == "div":
                if b == 0.0:
                    raise DomainError(f"division by zero in '{to_string(e)}'")
                return a / b
            if op == "pow":
                return _eval_pow(a, b, e)
            raise ValueError(f"unknown binary operation {op!r}")
        case Atan2(y=ye, x=xe):
            return math.atan2(evaluate(ye, env), evaluate(xe, env))
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# structural differentiation


@cache
def diff(e: Expr, name: str) -> Expr:
    """Exact structural derivative of ``e`` with respect to variable ``name``.

    The result contains only variables already present in ``e`` and is built
    through the light-simplification constructors.
    """
    match e:
        case Const():
            return ZERO
        case Var(name=n):
            return ONE if n == name else ZERO
        case Unary(op=op, arg=a):
            da = diff(a, name)
            if op == "neg":
                return neg(da)
            if op == "sin":
                return mul(Unary("cos", a), da)
            if op == "cos":
                return neg(mul(Unary("sin", a), da))
            if op == "tan":
                return div(da, pow_(Unary("cos", a), Const(2.0)))
            if op == "atan":
                return div(da, add(ONE, pow_(a, Const(2.0))))
            if op == "exp":
                return mul(e, da)
            if op == "log":
                return div(da, a)
            if op == "sqrt":
                return div(da, mul(Const(2.0), e))
            raise ValueError(f"unknown unary operation {op!r}")
        case Binary(op=op, lhs=l, rhs=r):
            if op == "add":
                return add(diff(l, name), diff(r, name))
            if op == "sub":
                return sub(diff(l, name), diff(r, name))
            if op == "mul":
                return add(mul(diff(l, name), r), mul(l, diff(r, name)))
            if op == "div":
                num = sub(mul(diff(l, name), r), mul(l, diff(r, name)))
                return div(num, pow_(r, Const(2.0)))
            if op == "pow":
                if isinstance(r, Const):
                    return mul(mul(r, pow_(l, Const(r.value - 1.0))), diff(l, name))
                # general case: a^b * (b' log a + b a'/a)
                inner = add(mul(diff(r, name), Unary("log", l)),
                            div(mul(r, diff(l, name)), l))
                return mul(e, inner)
            raise ValueError(f"unknown binary operation {op!r}")
        case Atan2(y=a, x=b):
            num = sub(mul(b, diff(a, name)), mul(a, diff(b, name)))
            den = add(pow_(a, Const(2.0)), pow_(b, Const(2.0)))
            return div(num, den)
    raise TypeError(f"not an expression: {e!r}")


@cache
def free_vars(e: Expr) -> frozenset[str]:
    """The set of variable names appearing in ``e``."""
    match e:
        case Const():
            return frozenset()
        case Var(name=n):
            return frozenset((n,))
        case Unary(arg=a):
            return free_vars(a)
        case Binary(lhs=l, rhs=r):
            return free_vars(l) | free_vars(r)
        case Atan2(y=a, x=b):
            return free_vars(a) | free_vars(b)
    raise TypeError(f"not an expression: {e!r}")


def subst(e: Expr, mapping: dict[str, Expr]) -> Expr:
    """Replace each variable by the expression ``mapping`` assigns it.

    Variables absent from the mapping stay themselves.
    """
    match e:
        case Const():
            return e
        case Var(name=n):
            return mapping.get(n, e)
        case Unary(op=op, arg=a):
            return unary(op, subst(a, mapping))
        case Binary(op=op, lhs=l, rhs=r):
            ctor = {"add": add, "sub": sub, "mul": mul, "div": div, "pow": pow_}[op]
            return ctor(subst(l, mapping), subst(r, mapping))
        case Atan2(y=a, x=b):
            return Atan2(subst(a, mapping), subst(b, mapping))
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# printing

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "pow": 3}
_SYM = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}
_ATOM = 9
_NEG = 2


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Unary) and e.op == "neg":
        return _NEG
    return _ATOM


def _fmt_const(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def to_string(e: Expr) -> str:
    """Render with minimal parentheses; reparsing reproduces the tree."""
    match e:
        case Const(value=v):
            return _fmt_const(v)
        case Var(name=n):
            return n
        case Unary(op="neg", arg=a):
            s = to_string(a)
            if _prec(a) < 3:
                s = f"({s})"
            return f"-{s}"
        case Unary(op=op, arg=a):
            return f"{op}({to_string(a)})"
        case Binary(op=op, lhs=l, rhs=r):
            p = _PREC[op]
            ls = to_string(l)
            rs = to_string(r)
            if op == "pow":
                if _prec(l) <= p:
                    ls = f"({ls})"
                if _prec(r) < p:
                    rs = f"({rs})"
            else:
                if _prec(l) < p:
                    ls = f"({ls})"
                if _prec(r) <= p:
                    rs = f"({rs})"
            return f"{ls} {_SYM[op]} {rs}" if op in ("add", "sub") else f"{ls}{_SYM[op]}{rs}"
        case Atan2(y=a, x=b):
            return f"atan2({to_string(a)}, {to_string(b)})"
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# parsing

_FUNCTIONS = {"sin", "cos", "tan", "atan", "exp", "log", "sqrt", "atan2"}


class _Parser:
    """Recursive-descent parser for the expression grammar.

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | base ('^' factor)?
    base   := number | ident | ident '(' expr (',' expr)? ')' | '(' expr ')'

    '+'/'-' and '*'/'/' associate left, '^' associates right and binds
    tighter than unary minus, so "-x^2" is -(x^2).
    """

    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.n = len(text)

    def parse(self) -> Expr:
        e = self._expr()
        self._skip_ws()
        if self.pos < self.n:
            raise ParseError(f"unexpected character {self.text[self.pos]!r}", self.pos)
        return e

    def _skip_ws(self):
        while self.pos < self.n and self.text[self.pos].isspace():
            self.pos += 1

    def _peek(self) -> str:
        self._skip_ws()
        return self.text[self.pos] if self.pos < self.n else ""

    def _expr(self) -> Expr:
        e = self._term()
        while True:
            c = self._peek()
            if c == "+":
                self.pos += 1
                e = add(e, self._term())
            elif c == "-":
                self.pos += 1
                e = sub(e, self._term())
            else:
                return e

    def _term(self) -> Expr:
        e = self._factor()
        while True:
            c = self._peek()
            if c == "*":
                self.pos += 1
                e = mul(e, self._factor())
            elif c == "/":
                self.pos += 1
                e = div(e, self._factor())
            else:
                return e

    def _factor(self) -> Expr:
        if self._peek() == "-":
            self.pos += 1
            return neg(self._factor())
        base = self._base()
        if self._peek() == "^":
            self.pos += 1
            return pow_(base, self._factor())
        return base

    def _base(self) -> Expr:
        c = self._peek()
        if c == "":
            raise ParseError("unexpected end of input", self.pos)
        if c == "(":
            self.pos += 1
            e = self._expr()
            if self._peek() != ")":
                raise ParseError("expected ')'", self.pos)
            self.pos += 1
            return e
        if c.isdigit() or c == ".":
            return self._number()
        if c.isalpha() or c == "_":
            return self._ident()
        raise ParseError(f"unexpected character {c!r}", self.pos)

    def _number(self) -> Expr:
        start = self.pos
        t = self.text
        while self.pos < self.n and t[self.pos].isdigit():
            self.pos += 1
        if self.pos < self.n and t[self.pos] == ".":
            self.pos += 1
            while self.pos < self.n and t[self.pos].isdigit():
                self.pos += 1
        if self.pos < self.n and t[self.pos] in "eE":
            mark = self.pos
            self.pos += 1
            if self.pos < self.n and t[self.pos] in "+-":
                self.pos += 1
            if self.pos < self.n and t[self.pos].isdigit():
                while self.pos < self.n and t[self.pos].isdigit():
                    self.pos += 1
            else:
                self.pos = mark  # not an exponent, e.g. "2e" where e is a name boundary
        token = t[start:self.pos]
        try:
            return Const(float(token))
        except ValueError:
            raise ParseError(f"bad number {token!r}", start) from None

    def _ident(self) -> Expr:
        start = self.pos
        t = self.text
        while self.pos < self.n and (t[self.pos].isalnum() or t[self.pos] == "_"):
            self.pos += 1
        name = t[start:self.pos]
        if self._peek() != "(":
            return Var(name)
        if name not in _FUNCTIONS:
            raise UnknownFunctionError(f"unknown function {name!r}", start)
        self.pos += 1  # consume '('
        args = [self._expr()]
        if self._peek() == ",":
            self.pos += 1
            args.append(self._expr())
        if self._peek() != ")":
            raise ParseError("expected ')'", self.pos)
        self.pos += 1
        if name == "atan2":
            if len(args) != 2:
                raise ParseError("atan2 takes two arguments", start)
            return Atan2(args[0], args[1])
        if len(args) != 1:
            raise ParseError(f"{name} takes one argument", start)
        return unary(name, args[0])


def parse_expr(text: str) -> Expr:
    """Parse ``text`` under standard precedence (see module docstring)."""
    return _Parser(text).parse()

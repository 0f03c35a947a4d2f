"""Small expression trees with exact symbolic differentiation.

Expressions are immutable trees built from constants, variables, sums,
products, powers and a fixed set of unary functions.  They can be parsed
from strings, differentiated to any order, substituted into each other and
compiled into vectorised numpy callables.

>>> e = parse("sinh(r)^2 + r")
>>> str(e.diff("r"))
'2 * sinh(r) * cosh(r) + 1'
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ParseError

__all__ = [
    "Expr",
    "Const",
    "Var",
    "Add",
    "Mul",
    "Pow",
    "Func",
    "FUNCTIONS",
    "NONSMOOTH",
    "parse",
    "const",
    "var",
    "func",
    "as_expr",
]

# name -> numpy source template
FUNCTIONS = {
    "sin": "np.sin({})",
    "cos": "np.cos({})",
    "tan": "np.tan({})",
    "sinh": "np.sinh({})",
    "cosh": "np.cosh({})",
    "tanh": "np.tanh({})",
    "coth": "(1.0 / np.tanh({}))",
    "exp": "np.exp({})",
    "log": "np.log({})",
    "sqrt": "np.sqrt({})",
    "abs": "np.abs({})",
    "sign": "np.sign({})",
    "pos": "np.maximum({}, 0.0)",
    "step": "np.where({} > 0.0, 1.0, 0.0)",
}

# functions that are not C^1 at zero of their argument
NONSMOOTH = frozenset({"abs", "sign", "pos", "step"})

_NUMPY_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "coth": lambda x: 1.0 / np.tanh(x),
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "sign": np.sign,
    "pos": lambda x: np.maximum(x, 0.0),
    "step": lambda x: np.where(x > 0.0, 1.0, 0.0),
}


class Expr:
    """Base class of expression nodes."""

    __slots__ = ()

    # -- construction sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, mul(Const(-1.0), as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), mul(Const(-1.0), self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return mul(self, power(as_expr(other), Const(-1.0)))

    def __rtruediv__(self, other):
        return mul(as_expr(other), power(self, Const(-1.0)))

    def __pow__(self, other):
        return power(self, as_expr(other))

    def __rpow__(self, other):
        return power(as_expr(other), self)

    def __neg__(self):
        return mul(Const(-1.0), self)

    # -- interface -------------------------------------------------------------
    def diff(self, name: str, order: int = 1) -> "Expr":
        out = self
        for _ in range(order):
            out = _diff(out, name)
        return out

    def subs(self, mapping) -> "Expr":
        mapping = {k: as_expr(v) for k, v in mapping.items()}
        return _subs(self, mapping)

    def variables(self) -> frozenset:
        return _variables(self)

    def is_const(self) -> bool:
        return isinstance(self, Const)

    def nonsmooth_arguments(self) -> list:
        """Arguments of every non-C^1 function call in the tree."""
        found = []
        _collect_nonsmooth(self, found)
        return found

    def to_source(self) -> str:
        return _source(self)

    def compile(self, variables=("r",)):
        """Return a vectorised callable ``f(*arrays)`` in the given variable order."""
        return _compile(self, tuple(variables))

    def __call__(self, **env):
        names = tuple(sorted(self.variables()))
        missing = [n for n in names if n not in env]
        if missing:
            raise KeyError(f"missing values for variables {missing}")
        return self.compile(names)(*(env[n] for n in names))

    def __str__(self):
        return _format(self, 0)


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: float

    def __repr__(self):
        return f"Const({self.value!r})"


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str

    def __repr__(self):
        return f"Var({self.name!r})"


@dataclass(frozen=True, slots=True)
class Add(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True, slots=True)
class Mul(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True, slots=True)
class Pow(Expr):
    base: Expr
    exponent: Expr


@dataclass(frozen=True, slots=True)
class Func(Expr):
    name: str
    arg: Expr


ZERO = Const(0.0)
ONE = Const(1.0)


def const(value) -> Const:
    return Const(float(value))


def var(name: str) -> Var:
    return Var(name)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return parse(value)
    if isinstance(value, (int, float, np.integer, np.floating)):
        return Const(float(value))
    raise TypeError(f"cannot convert {type(value).__name__} to an expression")


def _is(e: Expr, value: float) -> bool:
    return isinstance(e, Const) and e.value == value


# -- smart constructors ------------------------------------------------------------


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if isinstance(a, Const):
        # keep constants on the right, reads better
        return Add(b, a)
    return Add(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if isinstance(b, Const):
        a, b = b, a
    if isinstance(a, Const) and isinstance(b, Mul) and isinstance(b.a, Const):
        return mul(Const(a.value * b.a.value), b.b)
    return Mul(a, b)


def power(base: Expr, exponent: Expr) -> Expr:
    if _is(exponent, 0.0):
        return ONE
    if _is(exponent, 1.0):
        return base
    if _is(base, 1.0):
        return ONE
    if isinstance(base, Const) and isinstance(exponent, Const):
        with np.errstate(all="ignore"):
            value = np.power(base.value, exponent.value)
        if np.isfinite(value):
            return Const(float(value))
    return Pow(base, exponent)


def func(name: str, arg) -> Expr:
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    arg = as_expr(arg)
    if isinstance(arg, Const):
        with np.errstate(all="ignore"):
            value = _NUMPY_FUNCS[name](np.float64(arg.value))
        if np.isfinite(value):
            return Const(float(value))
    return Func(name, arg)


# -- differentiation -----------------------------------------------------------------


def _diff(e: Expr, x: str) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == x else ZERO
    if isinstance(e, Add):
        return add(_diff(e.a, x), _diff(e.b, x))
    if isinstance(e, Mul):
        return add(mul(_diff(e.a, x), e.b), mul(e.a, _diff(e.b, x)))
    if isinstance(e, Pow):
        db = _diff(e.exponent, x)
        da = _diff(e.base, x)
        if _is(db, 0.0):
            if _is(da, 0.0):
                return ZERO
            n = e.exponent
            return mul(mul(n, power(e.base, add(n, Const(-1.0)))), da)
        # general case: d(a^b) = a^b (b' log a + b a'/a)
        inner = add(
            mul(db, func("log", e.base)),
            mul(e.exponent, mul(da, power(e.base, Const(-1.0)))),
        )
        return mul(e, inner)
    if isinstance(e, Func):
        du = _diff(e.arg, x)
        if _is(du, 0.0):
            return ZERO
        return mul(_outer_derivative(e.name, e.arg), du)
    raise TypeError(e)


def _outer_derivative(name: str, u: Expr) -> Expr:
    if name == "sin":
        return func("cos", u)
    if name == "cos":
        return mul(Const(-1.0), func("sin", u))
    if name == "tan":
        return add(ONE, power(func("tan", u), Const(2.0)))
    if name == "sinh":
        return func("cosh", u)
    if name == "cosh":
        return func("sinh", u)
    if name == "tanh":
        return add(ONE, mul(Const(-1.0), power(func("tanh", u), Const(2.0))))
    if name == "coth":
        return add(ONE, mul(Const(-1.0), power(func("coth", u), Const(2.0))))
    if name == "exp":
        return func("exp", u)
    if name == "log":
        return power(u, Const(-1.0))
    if name == "sqrt":
        return mul(Const(0.5), power(func("sqrt", u), Const(-1.0)))
    if name == "abs":
        return func("sign", u)
    if name == "pos":
        return func("step", u)
    if name in ("sign", "step"):
        return ZERO
    raise ValueError(name)


# -- substitution / inspection ---------------------------------------------------------


def _subs(e: Expr, mapping) -> Expr:
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Const):
        return e
    if isinstance(e, Add):
        return add(_subs(e.a, mapping), _subs(e.b, mapping))
    if isinstance(e, Mul):
        return mul(_subs(e.a, mapping), _subs(e.b, mapping))
    if isinstance(e, Pow):
        return power(_subs(e.base, mapping), _subs(e.exponent, mapping))
    if isinstance(e, Func):
        return func(e.name, _subs(e.arg, mapping))
    raise TypeError(e)


@lru_cache(maxsize=4096)
def _variables(e: Expr) -> frozenset:
    if isinstance(e, Var):
        return frozenset({e.name})
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, (Add, Mul)):
        return _variables(e.a) | _variables(e.b)
    if isinstance(e, Pow):
        return _variables(e.base) | _variables(e.exponent)
    if isinstance(e, Func):
        return _variables(e.arg)
    raise TypeError(e)


def _collect_nonsmooth(e: Expr, out: list):
    if isinstance(e, Func):
        if e.name in NONSMOOTH:
            out.append(e.arg)
        _collect_nonsmooth(e.arg, out)
    elif isinstance(e, (Add, Mul)):
        _collect_nonsmooth(e.a, out)
        _collect_nonsmooth(e.b, out)
    elif isinstance(e, Pow):
        _collect_nonsmooth(e.base, out)
        _collect_nonsmooth(e.exponent, out)


# -- code generation -------------------------------------------------------------------------


def _source(e: Expr) -> str:
    if isinstance(e, Const):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Add):
        return f"({_source(e.a)} + {_source(e.b)})"
    if isinstance(e, Mul):
        return f"({_source(e.a)} * {_source(e.b)})"
    if isinstance(e, Pow):
        if isinstance(e.exponent, Const):
            p = e.exponent.value
            if p == 2.0:
                s = _source(e.base)
                return f"({s} * {s})"
            if p == -1.0:
                return f"(1.0 / {_source(e.base)})"
            if p == 0.5:
                return f"np.sqrt({_source(e.base)})"
        return f"np.power({_source(e.base)}, {_source(e.exponent)})"
    if isinstance(e, Func):
        return FUNCTIONS[e.name].format(_source(e.arg))
    raise TypeError(e)


@lru_cache(maxsize=2048)
def _compile(e: Expr, variables: tuple):
    extra = _variables(e) - set(variables)
    if extra:
        raise KeyError(f"expression uses unbound variables {sorted(extra)}")
    args = ", ".join(variables)
    body = _source(e)
    code = (
        f"def _f({args}):\n"
        f"    with np.errstate(all='ignore'):\n"
        f"        return {body}\n"
    )
    namespace = {"np": np}
    exec(compile(code, "<driftlab-expr>", "exec"), namespace)
    raw = namespace["_f"]

    def evaluate(*values):
        arrays = [np.asarray(v, dtype=float) for v in values]
        shape = np.broadcast_shapes(*(a.shape for a in arrays)) if arrays else ()
        out = np.asarray(raw(*arrays), dtype=float)
        if out.shape != shape:
            out = np.broadcast_to(out, shape).copy()
        return out

    evaluate.source = body
    return evaluate


# -- printing -----------------------------------------------------------------------------------

_PREC = {"add": 1, "mul": 2, "unary": 3, "pow": 4, "atom": 5}


def _fmt_number(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _format(e: Expr, parent: int) -> str:
    if isinstance(e, Const):
        s = _fmt_number(e.value)
        return f"({s})" if e.value < 0 and parent > _PREC["add"] else s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Func):
        return f"{e.name}({_format(e.arg, 0)})"
    if isinstance(e, Add):
        left = _format(e.a, _PREC["add"])
        b = e.b
        if isinstance(b, Const) and b.value < 0:
            s = f"{left} - {_fmt_number(-b.value)}"
        elif isinstance(b, Mul) and isinstance(b.a, Const) and b.a.value < 0:
            s = f"{left} - {_format(mul(Const(-b.a.value), b.b), _PREC['mul'])}"
        else:
            s = f"{left} + {_format(b, _PREC['add'])}"
        return f"({s})" if parent > _PREC["add"] else s
    if isinstance(e, Mul):
        if isinstance(e.a, Const) and e.a.value < 0:
            s = f"-{_format(mul(Const(-e.a.value), e.b), _PREC['mul'])}"
            return f"({s})" if parent > _PREC["add"] else s
        if isinstance(e.b, Pow) and _is(e.b.exponent, -1.0):
            s = f"{_format(e.a, _PREC['mul'])} / {_format(e.b.base, _PREC['unary'])}"
        else:
            s = f"{_format(e.a, _PREC['mul'])} * {_format(e.b, _PREC['mul'])}"
        return f"({s})" if parent > _PREC["mul"] else s
    if isinstance(e, Pow):
        if _is(e.exponent, -1.0):
            s = f"1 / {_format(e.base, _PREC['unary'])}"
            return f"({s})" if parent > _PREC["mul"] else s
        s = f"{_format(e.base, _PREC['atom'])}^{_format(e.exponent, _PREC['atom'])}"
        return f"({s})" if parent >= _PREC["pow"] else s
    raise TypeError(e)


# -- parser ---------------------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\*\*|[-+*/^(),]))"
)

_CONSTANTS = {"pi": math.pi, "e": math.e}


def _tokenize(text: str):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        start = m.start(kind)
        value = m.group(kind)
        if value == "**":
            value = "^"
        tokens.append((kind, value, start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str, variables):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.variables = variables

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, got, pos = self.take()
        if got != value:
            what = "end of input" if kind == "end" else repr(got)
            raise ParseError(f"expected {value!r} but found {what}", pos, self.text)

    def parse(self) -> Expr:
        e = self.expr()
        kind, value, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {value!r}", pos, self.text)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            e = e * rhs if op == "*" else e / rhs
        return e

    def unary(self) -> Expr:
        if self.peek()[1] == "-":
            self.take()
            return -self.unary()
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return power(base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, value, pos = self.take()
        if kind == "num":
            return Const(float(value))
        if kind == "id":
            if self.peek()[1] == "(":
                if value not in FUNCTIONS:
                    raise ParseError(f"unknown function {value!r}", pos, self.text)
                self.take()
                arg = self.expr()
                self.expect(")")
                return func(value, arg)
            if value in FUNCTIONS:
                raise ParseError(f"function {value!r} needs an argument", pos, self.text)
            if self.variables is not None and value not in self.variables:
                if value in _CONSTANTS:
                    return Const(_CONSTANTS[value])
                raise ParseError(
                    f"unknown variable {value!r}; allowed: {', '.join(sorted(self.variables))}",
                    pos,
                    self.text,
                )
            if self.variables is None and value in _CONSTANTS:
                return Const(_CONSTANTS[value])
            return Var(value)
        if value == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "end":
            raise ParseError("unexpected end of input", pos, self.text)
        raise ParseError(f"unexpected token {value!r}", pos, self.text)


def parse(text: str, variables=None) -> Expr:
    """Parse ``text`` into an expression.

    ``variables`` restricts the admissible free names (``pi`` and ``e`` are
    always constants unless listed).  Raises :class:`ParseError` carrying the
    offending character offset.
    """
    if not isinstance(text, str):
        raise ParseError(f"expected an expression string, got {type(text).__name__}")
    if not text.strip():
        raise ParseError("empty expression", 0, text)
    return _Parser(text, None if variables is None else frozenset(variables)).parse()

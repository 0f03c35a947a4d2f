import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from driftlab import expr as ex
from driftlab.errors import ParseError

SMOOTH = ["sin", "cos", "sinh", "cosh", "tanh", "exp"]


@st.composite
def expressions(draw, depth=3):
    """Random smooth expression source in r."""
    if depth == 0 or draw(st.booleans()):
        return draw(st.sampled_from(["r", "2", "0.5", "r^2", "3*r"]))
    kind = draw(st.sampled_from(["add", "mul", "func", "pow"]))
    a = draw(expressions(depth - 1))
    if kind == "func":
        return f"{draw(st.sampled_from(SMOOTH))}({a})"
    if kind == "pow":
        return f"({a})^{draw(st.integers(1, 3))}"
    b = draw(expressions(depth - 1))
    return f"({a}) {'+' if kind == 'add' else '*'} ({b})"


def sympy_of(text):
    return sp.sympify(text.replace("^", "**"), locals={"r": sp.Symbol("r")})


@given(expressions(), st.integers(1, 2))
def test_derivative_matches_sympy(text, order):
    e = ex.parse(text, ("r",))
    x = np.linspace(0.1, 1.2, 7)
    ours = np.broadcast_to(e.diff("r", order).compile(("r",))(x), x.shape)
    ref = sp.lambdify(sp.Symbol("r"), sp.diff(sympy_of(text), sp.Symbol("r"), order), "numpy")(x)
    ref = np.broadcast_to(ref, x.shape)
    assert np.allclose(ours, ref, rtol=1e-9, atol=1e-9)


@given(expressions())
def test_string_round_trip(text):
    e = ex.parse(text, ("r",))
    again = ex.parse(str(e), ("r",))
    x = np.linspace(0.0, 1.0, 5)
    assert np.allclose(np.broadcast_to(e.compile(("r",))(x), x.shape), np.broadcast_to(again.compile(("r",))(x), x.shape))


def test_docstring_example():
    assert str(ex.parse("sinh(r)^2 + r").diff("r")) == "2 * sinh(r) * cosh(r) + 1"


def test_precedence_and_unary_minus():
    f = ex.parse("-r^2 + 2*r/4").compile(("r",))
    assert f(3.0) == pytest.approx(-9 + 1.5)


def test_constants():
    assert ex.parse("pi", ()).compile(())() == pytest.approx(math.pi)


@pytest.mark.parametrize("text, offset", [("sinh(", 5), ("r +* 2", 3), ("foo(r)", 0), ("r)", 1)])
def test_parse_error_offsets(text, offset):
    with pytest.raises(ParseError) as info:
        ex.parse(text, ("r",))
    assert info.value.offset == offset
    assert f"offset {offset}" in str(info.value)


def test_unknown_variable():
    with pytest.raises(ParseError):
        ex.parse("x + 1", ("r",))


def test_substitution_and_nonsmooth_tracking():
    e = ex.parse("abs(s - 1) + s", ("s",)).subs({"s": ex.parse("log(w)", ("w",))})
    assert e.variables() == frozenset({"w"})
    assert len(e.nonsmooth_arguments()) == 1

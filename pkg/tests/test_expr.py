import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gammabdm.expr import Expression, ExpressionError

VARS = ["x", "t", "xi", "tau", "absxi"]


def test_arithmetic_and_functions():
    f = Expression.parse("1 + 0.3*cos(x) - exp(-t**2) / 2", VARS)
    assert f(x=0.0, t=0.0) == pytest.approx(0.8)
    assert Expression.parse("2j * i", []).evaluate({}) == -2
    assert Expression.parse("pi", [])() == pytest.approx(math.pi)
    g = Expression.parse("where(x > 0, 1, -1)", ["x"])
    np.testing.assert_array_equal(g(x=np.array([-1.0, 2.0])), [-1, 1])
    assert Expression.parse("step(x) * sqrt(abs(x))", ["x"])(x=4.0) == 2.0


def test_names_and_dependencies():
    f = Expression.parse("tau**2 / absxi**2 + sin(x)", VARS)
    assert f.names == {"tau", "absxi", "x"}
    assert f.depends_on("tau") and not f.depends_on("t")
    assert Expression.parse(3, VARS).names == set()


@pytest.mark.parametrize("bad", [
    "__import__('os')",
    "x.real",
    "x[0]",
    "lambda: 1",
    "y + 1",
    "open('f')",
    "x if t else xi",
    "1 +",
    "[x]",
    "x == 1",
])
def test_rejects_outside_grammar(bad):
    with pytest.raises(ExpressionError):
        Expression.parse(bad, VARS)


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_matches_python(a, b):
    f = Expression.parse("x * t - x / (1 + t**2) + cos(x)", ["x", "t"])
    assert f(x=a, t=b) == pytest.approx(a * b - a / (1 + b * b) + math.cos(a))

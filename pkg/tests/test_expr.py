import math

import numpy as np
import pytest

from lyhcheck.expr import Expr, ExpressionError
from lyhcheck.geometry import make_torus_grid


@pytest.mark.parametrize("src,x,y,t,expected", [
    ("1 + 2*3", 0, 0, 0, 7.0),
    ("2^3", 0, 0, 0, 8.0),
    ("-x + t", 1.5, 0, 2.0, 0.5),
    ("sin(pi/2) * exp(0) + log(1)", 0, 0, 0, 1.0),
    ("cos(x)*sin(y)", 0.0, math.pi / 2, 0, 1.0),
])
def test_evaluates(src, x, y, t, expected):
    assert Expr.parse(src)(np.array(x, float), np.array(y, float), t) == pytest.approx(expected)


@pytest.mark.parametrize("src", ["__import__('os')", "x.real", "abs(x)", "sin(x, y)", "z + 1", "[1]", "x if t else y",
                                 "'a'", "", "1 +", "True", "x // 2", "lambda: 0"])
def test_rejects(src):
    with pytest.raises(ExpressionError):
        Expr.parse(src)


def test_time_and_constant_detection():
    assert Expr.parse("sin(x) * t").depends_on_t
    assert not Expr.parse("sin(x)").depends_on_t
    assert Expr.parse("2*pi").is_constant
    assert not Expr.parse("y").is_constant


def test_normalized_is_whitespace_insensitive():
    assert Expr.parse("1+  sin( x )").normalized() == Expr.parse("1 + sin(x)").normalized()
    assert Expr.parse("x^2").normalized() == Expr.parse("x**2").normalized()


def test_on_grid_checks_dimension_and_finiteness():
    g1 = make_torus_grid(1, [2 * math.pi], [16])
    with pytest.raises(ExpressionError):
        Expr.parse("sin(y)").on_grid(g1)
    with pytest.raises(ExpressionError):
        Expr.parse("log(sin(x))").on_grid(g1)
    assert Expr.parse("3").on_grid(g1).shape == (16,)

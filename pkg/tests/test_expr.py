import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlslab.symbolic import EvaluationError, ParseError, parse_symbol
from nlslab.symbolic.expr import Binary, Num, evaluate, parse, to_text, tokenize


def value(text, x1=0.0, x2=0.0, x3=0.0):
    return float(evaluate(parse(text), x1, x2, x3))


@pytest.mark.parametrize("text, expected", [
    ("1 + 2*3", 7.0),
    ("(1 + 2)*3", 9.0),
    ("2^3^2", 512.0),
    ("-2^2", -4.0),
    ("(-2)^2", 4.0),
    ("8/4/2", 1.0),
    ("1 - 2 - 3", -4.0),
    ("2*pi", 2 * math.pi),
    ("sech(0) + tanh(0) + sqrt(4)", 3.0),
    ("1e-3*1000", 1.0),
    ("+.5 + -.5", 0.0),
])
def test_precedence_and_literals(text, expected):
    assert value(text) == pytest.approx(expected, rel=1e-15)


def test_variables():
    assert value("x1 - 2*x2 + x3^2", 1.0, 2.0, 3.0) == pytest.approx(6.0)


def test_constant_folding():
    tree = parse("2*3 + exp(0)*x1")
    assert isinstance(tree, Binary)
    assert tree.left == Num(6.0)
    assert isinstance(parse("2^10 - 1"), Num)


@pytest.mark.parametrize("text, offset", [
    ("1 + (x1 -", 8),
    ("1 +", 2),
    ("(1 + 2", 5),
    ("1 2", 2),
    ("sin 1", 4),
    ("", 0),
])
def test_parse_errors_carry_offsets(text, offset):
    with pytest.raises(ParseError) as err:
        parse(text)
    assert err.value.offset == offset


def test_unknown_identifier():
    with pytest.raises(ParseError) as err:
        parse("1 + y")
    assert err.value.offset == 4
    with pytest.raises(ParseError):
        tokenize("1 $ 2")


def test_division_by_zero_is_an_evaluation_error():
    c = parse_symbol("1/(x1 - x3)")
    with pytest.raises(EvaluationError) as err:
        c(np.array([1.0, 2.0]), 0.0, np.array([0.5, 2.0]))
    assert err.value.point is not None
    with pytest.raises(EvaluationError):
        value("1/0")


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_rendering_round_trip(x1, x2, x3):
    text = "1 + 0.5*exp(-((x1-2*x2+x3)^2)/8) - x2/(1 + x1^2)"
    again = parse(to_text(parse(text)))
    assert float(evaluate(again, x1, x2, x3)) == pytest.approx(value(text, x1, x2, x3), rel=1e-14)

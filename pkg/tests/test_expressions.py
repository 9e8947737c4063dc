import math

import pytest

from finsler import diffengine as fd
from finsler.errors import ExpressionError
from finsler.expressions import Expression


def test_evaluates_on_floats():
    expr = Expression('sqrt(y1^2 + y2^2) + 0.2*x1*y1', 2)
    assert expr([1.0, 0.0], [3.0, 4.0]) == pytest.approx(5.6)


def test_unary_minus_binds_looser_than_power():
    assert Expression('-x1^2', 1)([3.0]) == pytest.approx(-9.0)


def test_power_is_right_associative():
    assert Expression('2^3^2', 1)([0.0]) == pytest.approx(512.0)


def test_constants_and_functions():
    expr = Expression('pow(x1, 3) + cos(pi) + log(e) + exp(0) + tan(0) + sin(0)', 1)
    assert expr([2.0]) == pytest.approx(8.0 - 1.0 + 1.0 + 1.0)


def test_division_and_grouping():
    assert Expression('(x1 + 1) / (x2 - 1) * 2', 2)([3.0, 3.0]) == pytest.approx(4.0)


def test_evaluates_on_jets():
    expr = Expression('x1^3', 1)
    derivatives = fd.derivatives_1d(lambda z: expr([z]), 2.0, 2)
    assert derivatives[1] == pytest.approx(12.0)
    assert derivatives[2] == pytest.approx(12.0)


def test_non_integer_power_on_jets():
    expr = Expression('x1^1.5', 1)
    derivatives = fd.derivatives_1d(lambda z: expr([z]), 4.0, 1)
    assert derivatives[1] == pytest.approx(1.5 * math.sqrt(4.0))


def test_uses_y():
    assert Expression('x1*y2', 2).uses_y
    assert not Expression('x1*x2', 2).uses_y


# Rejections

@pytest.mark.parametrize('text', ['', 'x1 +', 'foo(x1)', 'z', 'sqrt(x1, x2)', '(x1'])
def test_malformed_expressions_raise(text):
    with pytest.raises(ExpressionError):
        Expression(text, 2)


def test_variable_beyond_dimension_raises():
    with pytest.raises(ExpressionError):
        Expression('x3 + x1', 2)


def test_y_variables_rejected_for_point_functions():
    with pytest.raises(ExpressionError):
        Expression('x1 * y1', 2, allow=('x',))

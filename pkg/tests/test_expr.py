import cmath

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chernforms.expr import ExpressionError, parse
from chernforms.jets import Chart


def test_arithmetic_and_caret_power():
    e = parse("2*z1^2 - z2/4 + 1", 2)
    assert e.evaluate([1.5, 2.0]) == pytest.approx(5.0)


def test_constants_functions_and_roots():
    e = parse("exp(i*pi) + root(3, 1)", 0)
    assert e.evaluate([]) == pytest.approx(-1 + cmath.exp(2j * cmath.pi / 3))
    assert parse("sqrt(4) + log(1)", 0).evaluate([]) == pytest.approx(2)


def test_holomorphy_detection():
    assert parse("z1*z2 + exp(z1)", 2).holomorphic
    assert not parse("z1*zb1", 1).holomorphic
    assert not parse("conj(z1)", 1).holomorphic


def test_evaluation_on_jets():
    chart = Chart(np.array([[0.5, 0.2j]]), 2)
    z = [chart.z(0), chart.z(1)]
    zb = [chart.zb(0), chart.zb(1)]
    out = parse("(1 + z1*zb1)^(-2)", 2).evaluate(z, zb)
    assert out.value()[0] == pytest.approx((1 + 0.25) ** -2)


@pytest.mark.parametrize("text, column", [
    ("z1 +* 2", None),
    ("z3", 1),
    ("foo(z1)", 1),
    ("z1.real", 1),
    ("z1 + exp", 6),
    ("'a'", 1),
    ("exp(z1, z2)", 1),
    ("", None),
])
def test_malformed_expressions(text, column):
    with pytest.raises(ExpressionError) as info:
        parse(text, 2)
    if column is not None:
        assert info.value.column == column


def test_conjugates_need_values():
    with pytest.raises(ExpressionError):
        parse("zb1", 1).evaluate([1.0])


@given(st.integers(-5, 5), st.integers(0, 4),
       st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))
def test_canonical_form_round_trips(a, k, z):
    e = parse(f"{a}*z1^{k} + z1", 1)
    again = parse(e.canonical(), 1)
    assert again.canonical() == e.canonical()
    assert again.evaluate([z]) == pytest.approx(e.evaluate([z]))

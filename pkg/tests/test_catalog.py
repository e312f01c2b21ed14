import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nsdde import catalog as cat
from nsdde.errors import ConfigError, ModelError


@pytest.mark.parametrize("kind", range(6))
def test_derivative_matches_finite_difference(kind):
    u = np.linspace(-2, 2, 41)
    h = 1e-6
    fd = (cat.phi(kind, u + h) - cat.phi(kind, u - h)) / (2 * h)
    np.testing.assert_allclose(cat.dphi(kind, u), fd, rtol=1e-6, atol=1e-7)


@given(st.floats(-1e3, 1e3, allow_nan=False), st.floats(-1e3, 1e3, allow_nan=False))
def test_lipschitz_constants(a, b):
    for kind, lip in cat.FACTOR_LIPSCHITZ.items():
        if math.isfinite(lip):
            lhs = abs(float(cat.phi(kind, np.array(a)) - cat.phi(kind, np.array(b))))
            assert lhs <= lip * abs(a - b) * (1 + 1e-12) + 1e-12


def test_parse_example_drift():
    t = cat.parse_terms("[-6, -12]*x; [-1, -2]*x^5; [-1/2, -1]*sin(y)", 2)
    assert t.n_terms == 3
    x, y = np.array([1.0]), np.array([1.0])
    assert t.value(x, y, 1)[0] == pytest.approx(-(6 + 1 + 0.5 * math.sin(1)))
    assert t.value(x, y, 2)[0] == pytest.approx(-2 * (6 + 1 + 0.5 * math.sin(1)))


def test_scalar_coefficient_broadcasts():
    t = cat.parse_terms("-0.5*sin(y)", 3)
    np.testing.assert_array_equal(t.coef[0], [-0.5] * 3)


def test_product_of_x_and_y_factors():
    t = cat.parse_terms("2*x^3*rat(y)", 1)
    assert t.value(np.array([2.0]), np.array([1.0]), 1)[0] == pytest.approx(2 * 8 * 0.5)


def test_zero_and_empty():
    assert cat.parse_terms("0", 2).n_terms == 0
    assert cat.parse_terms("", 2).n_terms == 0


def test_format_round_trip():
    text = "[-6, -12]*x; [-1, -2]*x^5; -0.5*sin(y); 2*x^3*rat(y)"
    t = cat.parse_terms(text, 2)
    again = cat.parse_terms(t.format(), 2)
    np.testing.assert_array_equal(again.coef, t.coef)
    np.testing.assert_array_equal(again.kind_x, t.kind_x)
    np.testing.assert_array_equal(again.kind_y, t.kind_y)


@pytest.mark.parametrize("text", ["2*z", "[1, 2, 3]*x", "x*x^3", "abc", "1*cos(x)"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        cat.parse_terms(text, 2)


def test_neutral_must_not_depend_on_x():
    with pytest.raises(ModelError):
        cat.CatalogCoefficients(cat.parse_terms("0.1*x", 1), cat.TermTable.empty(1), cat.TermTable.empty(1))


def test_lipschitz_in_y():
    assert cat.parse_terms("[1/6, 1/12]*sin(y)", 2).lipschitz_in_y() == pytest.approx(1 / 6)
    assert cat.parse_terms("0.1*sin(y); 0.2*y", 1).lipschitz_in_y() == pytest.approx(0.3)
    assert math.isinf(cat.parse_terms("0.1*y^3", 1).lipschitz_in_y())

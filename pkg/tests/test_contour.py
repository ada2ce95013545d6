import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdyson.contour import Contour, QuadratureRule, gml_contour, integrate, order_compare
from cdyson.errors import CoincidentInsertions, InsertionOutOfRange, NonFiniteIntegrand, NotOnContour


def test_order_on_segment():
    c = Contour((0, 1))
    assert order_compare(c, 0.8, 0.2) == "succeeds"
    assert order_compare(c, 0.2, 0.8) == "precedes"
    assert order_compare(c, 0.4, 0.4) == "equal"
    with pytest.raises(NotOnContour):
        order_compare(c, 0.5 + 0.1j, 0.2)


def test_order_on_gml_contour_is_descending_real_order():
    ts = [-0.5, 0.0, 0.5]
    c = gml_contour(2.0, 0.2, ts)
    for a in ts:
        for b in ts:
            if a != b:
                assert order_compare(c, a, b) == ("succeeds" if a > b else "precedes")


def test_gml_contour_shapes():
    assert gml_contour(1.0, 0.1).vertices == (-1 + 0.1j, 1 - 0.1j)
    c = gml_contour(2.0, 0.2, [0.5, -0.5])
    assert np.allclose(c.vertices, [-2 + 0.4j, -0.5, 0.5, 2 - 0.4j])
    with pytest.raises(InsertionOutOfRange):
        gml_contour(1.0, 0.1, [1.5])
    with pytest.raises(CoincidentInsertions):
        gml_contour(1.0, 0.1, [0.2, 0.2])
    with pytest.raises(ValueError):
        gml_contour(1.0, 0.0)


def test_contour_validation():
    with pytest.raises(ValueError):
        Contour((0,))
    with pytest.raises(ValueError):
        Contour((0, 1, 1))
    with pytest.raises(ValueError):
        Contour((0, 2, 1))  # folds back
    with pytest.raises(ValueError):
        Contour((0, 2, 2 + 1j, 1 - 1j))  # crosses itself


def test_integration_examples():
    I = np.eye(2)
    z, zp = 1.0 - 0.5j, -0.3 + 0.2j
    assert np.allclose(integrate(Contour((zp, z)), lambda s: I), (z - zp) * I)
    assert np.allclose(integrate(Contour((0, 1 + 1j)), lambda s: s * I), 1j * I, atol=1e-14)
    mu = 3.0
    val = integrate(Contour((0, 2)), lambda s: np.exp(1j * mu * s) * I)
    assert np.abs(val - (np.exp(2j * mu) - 1) / (1j * mu) * I).max() <= 1e-12


def test_integration_is_path_independent_for_entire_integrand():
    f = lambda s: np.array([[np.exp(-1j * s) * s ** 2]])
    a = integrate(Contour((-1, 1 - 1j)), f)
    b = integrate(Contour((-1, 0.2 + 0.3j, 1.5 - 0.2j, 1 - 1j)), f)
    assert abs(a - b).max() <= 1e-13


def test_non_finite_integrand():
    with pytest.raises(NonFiniteIntegrand):
        integrate(Contour((0, 1)), lambda s: np.array([[np.inf]]))


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 24), st.lists(st.floats(-2, 2), min_size=1, max_size=24))
def test_integration_matrix_exact_on_polynomials(q, coeffs):
    rule = QuadratureRule(q)
    coeffs = coeffs[:q]  # degree <= q-1 is integrated exactly
    x = rule.nodes
    p = np.polynomial.Polynomial(coeffs)
    anti = p.integ(lbnd=-1)
    scale = max(1.0, float(np.max(np.abs(coeffs))))
    assert np.allclose(rule.integration_matrix @ p(x), anti(x), atol=1e-11 * scale * q)


def test_rule_validation_and_doubling():
    with pytest.raises(ValueError):
        QuadratureRule(1)
    assert QuadratureRule(8).doubled().q == 16
    assert np.isclose(QuadratureRule(8).weights.sum(), 2.0)

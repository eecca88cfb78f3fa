import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smero.errors import CenterMismatch
from smero.laurent import (
    TruncatedLaurentSeries,
    add,
    detour_integral,
    differentiate,
    mul,
    punctured_line_integral,
    residue,
    semicircle_integral,
)

coeff = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


@st.composite
def laurent(draw, lo=-4, hi=2, size=(3, 12)):
    m = draw(st.integers(lo, hi))
    n = draw(st.integers(*size))
    return TruncatedLaurentSeries(0.0, m, draw(st.lists(coeff, min_size=n, max_size=n)))


def test_add_matches_termwise_sum(rng):
    a = TruncatedLaurentSeries(0.0, -3, rng.normal(size=12) + 1j * rng.normal(size=12))
    b = TruncatedLaurentSeries(0.0, -1, rng.normal(size=12) + 1j * rng.normal(size=12))
    c = add(a, b)
    assert c.min_degree == -3 and c.max_degree == min(a.max_degree, b.max_degree)
    for k in range(c.min_degree, c.max_degree + 1):
        expect = (a.coeff(k) if a.min_degree <= k else 0) + (b.coeff(k) if b.min_degree <= k else 0)
        assert c.coeff(k) == pytest.approx(expect, abs=1e-14)


def test_mul_matches_double_loop(rng):
    a = TruncatedLaurentSeries(0.0, -2, rng.normal(size=9) + 1j * rng.normal(size=9))
    b = TruncatedLaurentSeries(0.0, -1, rng.normal(size=7) + 1j * rng.normal(size=7))
    c = mul(a, b)
    assert c.min_degree == -3
    assert c.max_degree == min(a.max_degree + b.min_degree, b.max_degree + a.min_degree)
    for k in range(c.min_degree, c.max_degree + 1):
        expect = 0j
        for i in range(a.min_degree, a.max_degree + 1):
            j = k - i
            if b.min_degree <= j <= b.max_degree:
                expect += a.coeff(i) * b.coeff(j)
        assert c.coeff(k) == pytest.approx(expect, abs=1e-12)


def test_second_derivative_matches_finite_difference(rng):
    a = TruncatedLaurentSeries(0.0, -2, rng.normal(size=10))
    d2 = differentiate(differentiate(a))
    # eighth-order central stencil
    w = [-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560]
    h, x = 1e-3, 0.1
    fd = sum(wi * a(x + (i - 4) * h) for i, wi in enumerate(w)) / h**2
    assert abs(d2(x) - fd) < 1e-6 * abs(d2(x))


def test_center_mismatch():
    with pytest.raises(CenterMismatch):
        mul(TruncatedLaurentSeries(0.0, 0, [1.0]), TruncatedLaurentSeries(1.0, 0, [1.0]))


def test_admissible_r1_product_has_no_residue():
    f = TruncatedLaurentSeries.from_dict({-1: 1.0, 1: 2.0, 2: 0.3}, max_degree=6)
    g = TruncatedLaurentSeries.from_dict({-1: -0.5j, 1: 1.0, 3: 4.0}, max_degree=6)
    assert residue(mul(f, g)) == 0


@pytest.mark.parametrize("orientation", ["upper", "lower"])
@pytest.mark.parametrize("rho", [0.05, 0.3, 1.0])
def test_semicircle_of_inverse_square(rho, orientation):
    a = TruncatedLaurentSeries.monomial(-2)
    sign = 1 if orientation == "upper" else -1
    theta = np.linspace(math.pi, 0, 20001) if sign > 0 else np.linspace(-math.pi, 0, 20001)
    y = rho * np.exp(1j * theta)
    dy = np.gradient(y)
    numeric = np.sum(a(y) * dy)
    assert semicircle_integral(a, rho, orientation) == pytest.approx(-2 / rho, rel=1e-14)
    assert abs(numeric - (-2 / rho)) < 1e-4 / rho


@given(laurent())
@settings(max_examples=60, deadline=None)
def test_orientations_differ_by_residue(a):
    up = semicircle_integral(a, 0.4, "upper")
    lo = semicircle_integral(a, 0.4, "lower")
    assert abs((up - lo) - (-2j * math.pi * residue(a))) <= 1e-12 * (1 + np.sum(np.abs(a.coeffs)) * 100)
    if residue(a) == 0:
        assert up == lo


@given(laurent(), st.floats(0.01, 0.5))
@settings(max_examples=60, deadline=None)
def test_detour_is_independent_of_radius(a, rho):
    direct = punctured_line_integral(a, rho, 1.0, negative_only=False) + semicircle_integral(a, rho)
    scale = np.sum(np.abs(a.coeffs)) * rho ** min(a.min_degree, 0)
    assert abs(detour_integral(a, 1.0) - direct) <= 1e-10 * scale


@given(laurent(), laurent(), laurent())
@settings(max_examples=60, deadline=None)
def test_mul_algebra(a, b, c):
    ab, ba = mul(a, b), mul(b, a)
    assert ab.min_degree == ba.min_degree and ab.max_degree == ba.max_degree
    assert np.allclose(ab.coeffs, ba.coeffs, atol=1e-9)
    left, right = mul(mul(a, b), c), mul(a, mul(b, c))
    hi = min(left.max_degree, right.max_degree)
    assert np.allclose(left.window(left.min_degree, hi), right.window(left.min_degree, hi), rtol=1e-9, atol=1e-7)
    bc = TruncatedLaurentSeries(0.0, b.min_degree, c.coeffs[: len(b.coeffs)]) if len(c.coeffs) >= len(b.coeffs) else b
    d1 = mul(a, add(b, bc))
    d2 = add(mul(a, b), mul(a, bc))
    hi = min(d1.max_degree, d2.max_degree)
    assert np.allclose(d1.window(d1.min_degree, hi), d2.window(d1.min_degree, hi), rtol=1e-9, atol=1e-8)

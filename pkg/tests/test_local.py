import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import admissible_u, local_op, series
from smero.errors import FirstOrderPolePresent, PoleTooStrong, UnsupportedOrder
from smero.laurent import differentiate, mul
from smero.local import (
    LocalOperatorData,
    classify_pole,
    frobenius_basis,
    indicial_exponents,
    integer_r,
    is_s_meromorphic_at_pole,
    negative_subspace,
    parity_window,
)
from smero.oracles import monodromy_deviation

ALPHAS = (1.0, -2.5 + 1j, 4j)


def ode_residual(op, psi, alpha):
    """Coefficients of -psi'' + (u - alpha) psi on the window both factors justify."""
    u = series({0: -alpha}, max_degree=op.u_coeffs.max_degree) + op.u_coeffs
    return mul(u, psi) - differentiate(differentiate(psi))


def test_indicial_exponents():
    assert sorted(indicial_exponents(6.0), key=lambda z: z.real) == pytest.approx([-2.0, 3.0])
    assert integer_r(12.0) == 3
    assert integer_r(5.0) is None


@pytest.mark.parametrize("r, exps, dim", [(1, [-1], 1), (2, [-2], 1), (3, [-3, -1], 2)])
def test_negative_subspace(r, exps, dim):
    assert negative_subspace(r) == (exps, dim)
    assert parity_window(r)[: len(exps)] == exps


def test_frobenius_basis_two_over_y2():
    op = local_op({-2: 2.0}, max_degree=30)
    res = frobenius_basis(op, 1.0, 30)
    assert res.ok
    assert res.singular.leading_degree(1e-14) == -1
    assert res.regular.leading_degree(1e-14) == 2
    for psi in (res.singular, res.regular):
        resid = ode_residual(op, psi, 1.0)
        assert np.max(np.abs(resid.coeffs)) < 1e-10 * np.max(np.abs(psi.coeffs))
    assert monodromy_deviation(op.u_coeffs, [1.0]) < 1e-6


def test_frobenius_log_obstruction():
    op = local_op({-2: 2.0, 1: 1.0}, max_degree=30)
    res = frobenius_basis(op, 1.0, 30)
    assert not res.ok
    assert res.obstruction.order == 2
    assert monodromy_deviation(op.u_coeffs, [1.0]) > 1e-3


@pytest.mark.parametrize(
    "terms, verdict, r, failed",
    [
        ({-2: 2.0}, True, 1, "None"),
        ({-2: 6.0, 0: 1.0, 2: 1.0}, True, 2, "None"),
        ({-2: 2.0, 1: 1.0}, False, 1, "OddCoefficientNonzero"),
        ({-2: 2.5}, False, None, "NonIntegerIndicial"),
    ],
)
def test_certificates(terms, verdict, r, failed):
    cert = is_s_meromorphic_at_pole(local_op(terms, max_degree=12))
    assert (cert.verdict, cert.r, cert.failed_condition) == (verdict, r, failed)
    if failed == "OddCoefficientNonzero":
        assert cert.failed_order == 1


def test_certificate_agrees_with_monodromy_for_examples():
    good = local_op({-2: 6.0, 0: 1.0, 2: 1.0}, max_degree=12)
    bad = local_op({-2: 2.0, 1: 1.0}, max_degree=12)
    assert monodromy_deviation(good.u_coeffs, ALPHAS) < 1e-6
    assert monodromy_deviation(bad.u_coeffs, ALPHAS) > 1e-3


def test_first_order_pole_reported_as_odd_coefficient():
    cert = is_s_meromorphic_at_pole(local_op({-2: 2.0, -1: 0.5}, max_degree=8))
    assert not cert.verdict and cert.failed_order == -1
    with pytest.raises(FirstOrderPolePresent):
        frobenius_basis(local_op({-2: 2.0, -1: 0.5}, max_degree=8), 0.0, 12)


def test_pole_too_strong():
    with pytest.raises(PoleTooStrong):
        LocalOperatorData.from_terms({-3: 1.0, -2: 2.0}, max_degree=6)


def test_only_second_order():
    with pytest.raises(UnsupportedOrder):
        classify_pole(local_op({-2: 2.0}), n=3)


@pytest.mark.parametrize("r", [1, 2, 3])
def test_admissible_parts_have_trivial_monodromy(r, rng):
    for _ in range(3):
        op = local_op(admissible_u(r, rng))
        assert is_s_meromorphic_at_pole(op).verdict
        assert monodromy_deviation(op.u_coeffs, rng.normal(size=5) * 3 + 3j * rng.normal(size=5)) < 1e-6


@given(st.integers(1, 3), st.integers(0, 2**32 - 1), st.complex_numbers(max_magnitude=8))
@settings(max_examples=40, deadline=None)
def test_frobenius_residual_vanishes(r, seed, alpha):
    op = local_op(admissible_u(r, np.random.default_rng(seed), degree=16))
    res = frobenius_basis(op, alpha, 18)
    assert res.ok
    for psi in (res.singular, res.regular):
        resid = ode_residual(op, psi, alpha)
        assert np.max(np.abs(resid.coeffs)) <= 1e-10 * max(1.0, np.max(np.abs(psi.coeffs)))


@given(st.integers(1, 3), st.integers(0, 2**32 - 1), st.data())
@settings(max_examples=40, deadline=None)
def test_structural_and_frobenius_checks_agree(r, seed, data):
    rng = np.random.default_rng(seed)
    terms = admissible_u(r, rng)
    if data.draw(st.booleans()):
        terms[data.draw(st.sampled_from(list(range(1, 2 * r, 2))))] = 1e-3
    op = local_op(terms)
    cert = is_s_meromorphic_at_pole(op)
    # Frobenius alone, without the structural shortcut
    frob = all(frobenius_basis(op, a, 2 * r + 8).ok for a in ALPHAS)
    assert cert.verdict == frob

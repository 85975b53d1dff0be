import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conetrace._errors import SingularMetricError, TruncationWarning, UnsupportedSymbolError
from conetrace.fuchs_algebra import (
    ConormalPolynomial,
    FuchsOperator,
    ModePolynomial,
    RadialSeries,
    build_cone_laplacian,
    conormal,
    euler_operator,
    fuchs_compose,
    identity_operator,
    mellin_symbol,
    principal_symbol_b,
    random_operator,
)
from conetrace.spectral import CrossSection


def test_mode_polynomial_horner_matches_polyval():
    p = ModePolynomial([1.0, -2.0, 0.5])
    assert p(3.0) == pytest.approx(1 - 6 + 4.5)
    assert np.allclose(p(np.array([0.0, 1.0])), [1.0, -0.5])


def test_radial_series_truncates_products():
    a = RadialSeries.from_scalars([1.0, 1.0], truncation_order=3)
    b = a * a * a * a  # (1 + r)^4 truncated after r^3
    got = [c(0.0).real for c in b.coefficients]
    assert got[:4] == [1.0, 4.0, 6.0, 4.0]
    assert b.overflow


def test_reciprocal_of_one_plus_r_alternates():
    inv = RadialSeries.from_scalars([1.0, 1.0], truncation_order=8).reciprocal()
    assert [c(0.0).real for c in inv.coefficients] == [(-1.0) ** k for k in range(9)]


def test_flat_laplacian_coefficients_n1():
    A = build_cone_laplacian(1)
    assert A.order == 2
    assert A.coeffs[2].allclose(RadialSeries.constant(1.0))
    assert A.coeffs[1].is_zero(1e-15)


def test_analyst_laplacian_n2_has_a1_minus_one():
    A = build_cone_laplacian(2)
    assert A.coeffs[1].at_zero()(0.0) == pytest.approx(-1.0)


def test_conformal_profile_one_plus_r():
    A = build_cone_laplacian(1, G_profile=[1.0, 1.0])
    # a_1 = -r G'/G = -r/(1+r) = -r + r^2 - r^3 + ...
    a1 = [c(0.0).real for c in A.coeffs[1].coefficients]
    expected = [0.0] + [(-1.0) ** k for k in range(1, 17)]
    assert np.allclose(a1, expected, atol=1e-14)


def test_degenerate_profile_rejected():
    with pytest.raises(SingularMetricError):
        build_cone_laplacian(1, G_profile=[0.0, 1.0])


def test_geometer_sign_flips_every_coefficient():
    an = build_cone_laplacian(3)
    ge = build_cone_laplacian(3, sign="geometer")
    for a, g in zip(an.coeffs, ge.coeffs):
        assert (a + g).is_zero(1e-15)


@pytest.mark.parametrize("n, mu, expected", [(1, 4.0, [-4.0, 0.0, 1.0]), (3, 0.0, [0.0, -2.0, 1.0])])
def test_conormal_of_laplacian(n, mu, expected):
    p = conormal(build_cone_laplacian(n), mu)
    assert np.allclose(p.coefficients, expected)


def test_identity_conormal_is_one():
    assert np.allclose(conormal(identity_operator(), 2.0).coefficients, [1.0])


def test_euler_squared_conormal():
    E = euler_operator()
    # r^{-1} D r^{-1} D = r^{-2} (D + 1) D
    assert np.allclose(conormal(fuchs_compose(E, E), 0.0).coefficients, [0.0, 1.0, 1.0])


def test_identity_is_neutral():
    rng = np.random.default_rng(3)
    A = random_operator(rng, 2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        B = fuchs_compose(identity_operator(), A)
    for a, b in zip(A.coeffs, B.coeffs):
        assert a.allclose(b)


def test_laplacian_squared_conormal():
    L = build_cone_laplacian(1)
    L2 = fuchs_compose(L, L)
    for mu in (0.0, 1.0, 9.0):
        p = conormal(L, mu)
        assert conormal(L2, mu).allclose(p.shifted(2.0) * p, 1e-12)


def test_truncation_overflow_warns():
    A = FuchsOperator(1, (RadialSeries.from_scalars([0.0, 0.0, 1.0], 2), RadialSeries.constant(1.0, 2)))
    with pytest.warns(TruncationWarning):
        B = fuchs_compose(A, A)
    assert B.truncated


def test_mellin_symbol_at_tip_is_conormal():
    A = build_cone_laplacian(2, G_profile=[1.0, 0.3])
    h = mellin_symbol(A)
    assert h.at_tip(5.0).allclose(conormal(A, 5.0))
    assert h(0.0, 2.0 + 1.0j, 5.0) == pytest.approx(conormal(A, 5.0)(2.0 + 1.0j))


def test_principal_symbol_values():
    assert principal_symbol_b(build_cone_laplacian(1), 0.3, 3.0, 4.0) == pytest.approx(-25.0)
    assert principal_symbol_b(build_cone_laplacian(1, sign="geometer"), 0.0, 3.0, 4.0) == pytest.approx(25.0)


def test_principal_symbol_rejects_excess_mu_power():
    bad = FuchsOperator(1, (RadialSeries([ModePolynomial([0.0, 1.0])]), RadialSeries.constant(1.0)))
    with pytest.raises(UnsupportedSymbolError):
        principal_symbol_b(bad, 0.0, 1.0, 1.0)


def test_json_round_trip():
    A = build_cone_laplacian(CrossSection.circle(2.0), G_profile=[1.0, 0.5, 0.25], sign="geometer")
    B = FuchsOperator.from_json(A.to_json())
    assert B.order == A.order and B.sign == "geometer"
    for a, b in zip(A.coeffs, B.coeffs):
        assert a.allclose(b, 0.0)


def test_json_rejects_unknown_keys():
    data = build_cone_laplacian(1).to_json()
    data["extra"] = 1
    with pytest.raises(ValueError):
        FuchsOperator.from_json(data)


def test_vanishing_leading_coefficient_rejected():
    with pytest.raises(ValueError):
        FuchsOperator(1, (RadialSeries.constant(1.0), RadialSeries.constant(0.0)))


# -- properties ---------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(0, 3), st.integers(0, 3), st.floats(0.0, 30.0))
def test_conormal_composition_identity(seed, m1, m2, mu):
    rng = np.random.default_rng(seed)
    A1, A2 = random_operator(rng, m1), random_operator(rng, m2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        C = fuchs_compose(A2, A1)
    lhs = conormal(C, mu)
    rhs = conormal(A2, mu).shifted(m1) * conormal(A1, mu)
    scale = max(1.0, float(np.max(np.abs(rhs.coefficients))))
    assert lhs.allclose(rhs, 1e-10 * scale)


@settings(max_examples=25, deadline=None)
@given(seeds, st.floats(0.0, 10.0), st.floats(0.05, 0.5))
def test_composition_is_associative(seed, mu, r):
    rng = np.random.default_rng(seed)
    A, B, C = (random_operator(rng, k, radial_terms=2, truncation_order=10) for k in (1, 2, 1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        left = fuchs_compose(fuchs_compose(A, B), C)
        right = fuchs_compose(A, fuchs_compose(B, C))
    for a, b in zip(left.coeffs, right.coeffs):
        va, vb = a(r, mu), b(r, mu)
        assert abs(va - vb) <= 1e-9 * max(1.0, abs(va))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 5.0), st.floats(-5.0, 5.0), st.floats(0.0, 5.0), st.floats(0.1, 4.0))
def test_principal_symbol_is_homogeneous(r, rho, s, lam):
    A = build_cone_laplacian(2, G_profile=[1.0, 0.4])
    base = principal_symbol_b(A, r, rho, s)
    assert principal_symbol_b(A, r, lam * rho, lam * s) == pytest.approx(lam**2 * base, rel=1e-12, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=5), st.floats(-2, 2), st.floats(-2, 2))
def test_shifted_polynomial_evaluates_at_shift(coeffs, a, z):
    p = ConormalPolynomial(coeffs)
    assert p.shifted(a)(z) == pytest.approx(p(z + a), rel=1e-9, abs=1e-9)


def test_shift_law_for_powers_of_r():
    # D (r^a u) = r^a (D - a) u, checked on u = r^b: both sides equal (-(a+b)) r^{a+b}
    a, b = 1.5, -0.25
    D_of_product = -(a + b)
    rhs = (-b) - a
    assert math.isclose(D_of_product, rhs)

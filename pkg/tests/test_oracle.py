import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conetrace._errors import ContourError, TailBoundError, UnsupportedOperatorError
from conetrace.fuchs_algebra import build_cone_laplacian
from conetrace.oracle import (
    Contour,
    EigenvalueList,
    ModelCone,
    bessel_zero,
    bessel_zeros_below,
    dunford_heat_trace,
    eigenvalues_exact_cone,
    eigenvalues_fd,
    heat_trace_sum,
    indicial_orders,
)
from conetrace.spectral import CrossSection

LAMBDA_MIN_DISK = 5.783185962946785  # j_{0,1}^2


@pytest.mark.parametrize("nu, k", [(0.0, 1), (2.5, 3), (10.0, 1), (48.0, 7), (0.5, 40)])
def test_bessel_zero_against_mpmath(nu, k):
    assert bessel_zero(nu, k) == pytest.approx(float(mpmath.besseljzero(nu, k)), rel=2e-15)


def test_bessel_zero_extremes():
    assert bessel_zero(500.0, 3) == pytest.approx(535.5024868582939, rel=1e-14)
    assert bessel_zero(2.0, 100000) == pytest.approx(314161.62154750124, rel=1e-14)
    with pytest.raises(ValueError):
        bessel_zero(501.0, 1)


def test_zeros_below_are_complete():
    z = bessel_zeros_below(1.0, 30.0)
    ref = [float(mpmath.besseljzero(1, k)) for k in range(1, 10)]
    assert np.allclose(z, [r for r in ref if r < 30.0], rtol=1e-14)


def test_indicial_orders_circle():
    model = ModelCone(CrossSection.circle(2.0))
    orders = indicial_orders(model, count=4)
    assert [nu for _, nu in orders] == pytest.approx([0.0, 0.5, 1.0, 1.5])


def test_disk_lowest_eigenvalue():
    eigs = eigenvalues_exact_cone(ModelCone(CrossSection.circle(1.0)), 50.0)
    assert eigs.lambdas[0] == pytest.approx(LAMBDA_MIN_DISK, abs=1e-12)
    assert eigs.multiplicities[0] == 1


def test_model_cone_rejects_r_dependent_operator():
    cs = CrossSection.circle(1.0)
    with pytest.raises(UnsupportedOperatorError):
        ModelCone(cs, build_cone_laplacian(cs, G_profile=[1.0, 1.0], sign="geometer"))


@pytest.mark.parametrize("c", [0.5, 1.0, 1.5])
def test_fem_eigenvalues_within_their_error_estimates(c):
    model = ModelCone(CrossSection.circle(c))
    fd = eigenvalues_fd(model, 4096, 10)
    exact = eigenvalues_exact_cone(model, fd.lambdas[-1] * 1.01)
    ex = exact.expanded()[:fd.total_count]
    assert np.all(np.abs(fd.expanded() - ex) <= np.repeat(fd.errors, fd.multiplicities))


def test_weyl_fit_recovers_area_coefficient():
    eigs = eigenvalues_exact_cone(ModelCone(CrossSection.circle(1.0)), 2.0e4)
    a, _ = eigs.weyl_fit()
    assert a == pytest.approx(0.25, rel=2e-3)  # area/(4 pi) with area pi


def test_single_eigenvalue_trace():
    eigs = EigenvalueList([1.0], [1])
    assert heat_trace_sum(eigs, 1.0).value == pytest.approx(math.exp(-1.0))


def test_tail_bound_raises_when_requested():
    eigs = eigenvalues_exact_cone(ModelCone(CrossSection.circle(1.0)), 100.0)
    assert heat_trace_sum(eigs, 1.0).tail_bound < 1e-40
    with pytest.raises(TailBoundError):
        heat_trace_sum(eigs, 1e-3, tol=1e-10)


def test_dunford_matches_sum():
    eigs = eigenvalues_exact_cone(ModelCone(CrossSection.circle(1.0)), 4000.0)
    for t in (0.05, 0.5):
        direct = heat_trace_sum(eigs, t).value
        assert dunford_heat_trace(eigs, Contour(math.pi / 4, 0.5), t) == pytest.approx(direct, abs=1e-11)
        assert dunford_heat_trace(eigs, Contour(math.pi / 4, 0.5), t, power=2) == pytest.approx(direct, abs=1e-10)


def test_contour_must_enclose_spectrum():
    eigs = EigenvalueList([0.2, 1.0], [1, 1])
    with pytest.raises(ContourError):
        dunford_heat_trace(eigs, Contour(math.pi / 4, 0.5), 1.0)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(1.0, 50.0), min_size=1, max_size=8), st.floats(0.05, 2.0), st.floats(0.2, 1.3))
def test_dunford_phi_invariance(lams, t, phi):
    eigs = EigenvalueList(sorted(lams), [1] * len(lams))
    ref = heat_trace_sum(eigs, t).value
    assert dunford_heat_trace(eigs, Contour(phi, 0.5), t) == pytest.approx(ref, abs=1e-11)


@settings(max_examples=20, deadline=None)
@given(st.floats(1e-3, 1.0), st.floats(1.01, 4.0))
def test_trace_is_decreasing_in_t(t, factor):
    eigs = eigenvalues_exact_cone(ModelCone(CrossSection.circle(1.0)), 3000.0)
    assert heat_trace_sum(eigs, t * factor).value < heat_trace_sum(eigs, t).value

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conetrace._errors import IncompleteStripError, PoleError
from conetrace.fuchs_algebra import build_cone_laplacian, conormal, identity_operator
from conetrace.spectral import (
    CrossSection,
    Sector,
    WeightLine,
    boundary_spectrum,
    check_parameter_ellipticity,
    check_weight_ellipticity,
    parametrix_conormal_correction,
)


def _points(entries):
    return [(round(e.z.real, 9), e.algebraic_multiplicity) for e in entries]


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_flat_cone_boundary_spectrum(c):
    cs = CrossSection.circle(c)
    A = build_cone_laplacian(cs)
    entries = boundary_spectrum(A, cs, (-3.2, 3.2))
    expected = sorted({j / c for j in range(0, 8) if j / c <= 3.2} | {-j / c for j in range(0, 8) if j / c <= 3.2})
    got = [e.z.real for e in entries]
    assert np.allclose(got, expected, atol=1e-10)
    for e in entries:
        assert abs(e.z.imag) < 1e-12
        assert e.algebraic_multiplicity == 2
        # the conormal polynomial vanishes at each point for its mode
        mu = cs.mode(e.mode_index).mu
        assert abs(conormal(A, mu)(e.z)) < 1e-10


def test_identity_has_no_boundary_spectrum():
    cs = CrossSection.circle(1.0)
    assert boundary_spectrum(identity_operator(), cs, (-5, 5)) == []


def test_explicit_three_dimensional_cross_section():
    cs = CrossSection.explicit(3, [(0.0, 1), (3.0, 4), (15.0, 6)])
    A = build_cone_laplacian(cs)
    entries = boundary_spectrum(A, cs, (-2.5, 4.0))
    # z^2 - 2z - mu = 0: mu=0 -> 0, 2 ; mu=3 -> -1, 3 ; mu=15 -> -3, 5 (outside)
    assert _points(entries) == [(-1.0, 4), (0.0, 1), (2.0, 1), (3.0, 4)]


def test_explicit_list_ending_inside_strip_raises():
    cs = CrossSection.explicit(3, [(0.0, 1), (3.0, 4)])
    with pytest.raises(IncompleteStripError):
        boundary_spectrum(build_cone_laplacian(cs), cs, (-2.5, 4.0))


def test_explicit_cap_too_small_raises():
    cs = CrossSection.circle(1.0)
    A = build_cone_laplacian(cs)
    with pytest.raises(IncompleteStripError):
        boundary_spectrum(A, cs, (-6, 6), mode_cap=2, lookahead=2)


def test_weight_line_position():
    assert WeightLine(0.5, 1).real_part == 0.5
    assert WeightLine(0.0, 3).real_part == 2.0


@pytest.mark.parametrize("gamma, ok, margin", [(0.5, True, 0.5), (1.0, False, 0.0), (0.25, True, 0.25)])
def test_weight_ellipticity_flat_cone(gamma, ok, margin):
    cs = CrossSection.circle(1.0)
    verdict, dist = check_weight_ellipticity(build_cone_laplacian(cs), cs, gamma)
    assert verdict is ok
    assert dist == pytest.approx(margin, abs=1e-12)


def test_weight_ellipticity_empty_spectrum():
    cs = CrossSection.circle(1.0)
    assert check_weight_ellipticity(identity_operator(), cs, 0.5) == (True, math.inf)


def test_sector_distance():
    sec = Sector(math.pi / 4, 0.5)
    assert sec.distance(-1.0)[()] == 0.0
    assert sec.distance(2.0)[()] == pytest.approx(2.0 * math.sin(math.pi / 4))
    assert sec.distance_truncated(-0.1)[()] == pytest.approx(0.4)


def test_parameter_ellipticity_flat_cone():
    cs = CrossSection.circle(1.0)
    rep = check_parameter_ellipticity(build_cone_laplacian(cs, sign="geometer"), cs, Sector(math.pi / 4, 0.5), 0.5)
    assert rep.interior_ok and rep.weight_line_ok and rep.model_cone_ok and rep.overall
    js = rep.to_json()
    assert js["overall"] is True and js["condition_iii"]["mode_cap"] >= 1


def test_parameter_ellipticity_fails_on_weight_line():
    cs = CrossSection.circle(1.0)
    rep = check_parameter_ellipticity(build_cone_laplacian(cs, sign="geometer"), cs, Sector(math.pi / 4, 0.5), 1.0)
    assert rep.interior_ok and not rep.weight_line_ok and not rep.overall


def test_analyst_sign_fails_interior_condition():
    cs = CrossSection.circle(1.0)
    rep = check_parameter_ellipticity(build_cone_laplacian(cs), cs, Sector(math.pi / 4, 0.5), 0.5)
    assert not rep.interior_ok


def test_parametrix_correction_solves_identity():
    A = build_cone_laplacian(1)
    f = parametrix_conormal_correction(A, 4.0, lambda z: 0.0 * z)
    p = conormal(A, 4.0)
    z = np.array([0.3 + 1j, 5.0 - 2j])
    assert np.allclose(p(z - 2) * f(z), 1.0)
    with pytest.raises(PoleError) as err:
        f(4.0)  # z - m = 2 is a root of z^2 - 4
    assert err.value.root == pytest.approx(2.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3.0, 3.0), st.floats(0.05, 1.0))
def test_weight_margin_is_distance_to_integer_lattice(gamma, c_inv):
    c = 1.0 / c_inv
    cs = CrossSection.circle(c)
    _, margin = check_weight_ellipticity(build_cone_laplacian(cs), cs, gamma)
    beta = 1.0 - gamma
    # spectrum is {+-j/c}; nearest point to beta
    nearest = min(abs(beta - k / c) for k in range(-int(10 * c) - 5, int(10 * c) + 6))
    assert margin == pytest.approx(nearest, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(-1.5, 1.5), st.floats(0.0, 1.0))
def test_wider_strip_never_loses_points(lo, width):
    cs = CrossSection.circle(1.3)
    A = build_cone_laplacian(cs)
    narrow = {round(e.z.real, 9) for e in boundary_spectrum(A, cs, (lo, lo + width))}
    wide = {round(e.z.real, 9) for e in boundary_spectrum(A, cs, (lo - 1, lo + width + 1))}
    assert narrow <= wide

import math
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conetrace._errors import TruncationWarning
from conetrace.fuchs_algebra import build_cone_laplacian, euler_operator, identity_operator
from conetrace.mellin import LogGrid, RadialFunction, apply_direct, bump, fd_weights, mellin_transform, op_mellin_apply

GRID = LogGrid.from_radii(0.1, 10.0, 1024)


def test_grid_geometry():
    g = LogGrid(-1.0, 1.0, 17)
    assert g.h == 0.125 and g.length == 2.0
    assert g.trapezoid_weights().sum() == pytest.approx(2.0)
    with pytest.raises(ValueError):
        LogGrid(0.0, 1.0, 8)


def test_fd_weights_second_derivative():
    w = fd_weights(2, np.array([-1.0, 0.0, 1.0]))
    assert np.allclose(w, [1.0, -2.0, 1.0])


def test_mellin_transform_of_gaussian_in_log_r():
    # u(e^s) = exp(-s^2): (M u)(z) = sqrt(pi) exp(z^2/4)
    g = LogGrid(-12.0, 12.0, 1201)
    u = RadialFunction(g, np.exp(-g.s**2))
    for z in (0.5, 1.0 + 2.0j, -0.3j):
        assert mellin_transform(u, z) == pytest.approx(math.sqrt(math.pi) * np.exp(z * z / 4), rel=1e-12)


def test_mellin_transform_warns_on_truncated_support():
    u = RadialFunction(GRID, np.ones(GRID.N))
    with pytest.warns(TruncationWarning):
        mellin_transform(u, 0.5)


def test_identity_symbol_reproduces_input():
    u = bump(GRID, 0.0, 0.9 * GRID.length / 2)
    v = op_mellin_apply(identity_operator(), u)
    assert np.max(np.abs(v.values - u.values)) < 1e-12


def test_euler_operator_matches_direct_derivative():
    u = bump(GRID, 0.0, 0.9 * GRID.length / 2)
    a = op_mellin_apply(euler_operator(), u)
    b = apply_direct(euler_operator(), u, half_stencil=8)
    assert np.max(np.abs(a.values - b.values)) < 1e-6


@pytest.mark.parametrize("beta", [-1.0, 0.0, 1.0])
def test_laplacian_quantization_matches_direct_action(beta):
    L = math.log(10.0)
    grid = LogGrid.from_radii(0.1, 10.0, 3072)
    A = build_cone_laplacian(1)
    u = bump(grid, 0.05 * L, 0.9 * L)
    a = op_mellin_apply(A, u, beta=beta, mu=4.0)
    b = apply_direct(A, u, mu=4.0, half_stencil=8)
    assert np.max(np.abs(a.values - b.values)) < 1e-5


def test_support_flags():
    u = bump(GRID, 0.0, 1.0)
    assert u.support_ok
    assert not RadialFunction(GRID, np.ones(GRID.N)).support_ok


FINE = LogGrid.from_radii(0.1, 10.0, 2048)


@settings(max_examples=10, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-0.5, 0.5))
def test_quantization_is_linear(a, b, beta):
    u1 = bump(FINE, -0.2, 1.8)
    u2 = bump(FINE, 0.3, 1.7)
    A = build_cone_laplacian(1)

    def op(u):
        return op_mellin_apply(A, u, beta=beta, mu=1.0).values

    lhs = op(a * u1 + b * u2)
    rhs = a * op(u1) + b * op(u2)
    # the contour cut-off adapts to the input, so linearity holds to truncation accuracy
    assert np.max(np.abs(lhs - rhs)) <= 1e-7 * max(1.0, np.max(np.abs(rhs)))


@settings(max_examples=15, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(0.6, 1.4))
def test_mellin_transform_shift_rule(z, k):
    # M[r^k u](z) = M[u](z + k)
    g = LogGrid(-14.0, 14.0, 1401)
    u = RadialFunction(g, np.exp(-g.s**2))
    v = RadialFunction(g, np.exp(-g.s**2) * g.r**k)
    assert mellin_transform(v, z) == pytest.approx(mellin_transform(u, z + k), rel=1e-11)

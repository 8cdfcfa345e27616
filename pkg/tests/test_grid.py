import numpy as np
import pytest

from ipm1d.errors import DomainError, ResolutionError, UnsupportedOrderError
from ipm1d.grid import (
    AngularGrid,
    GridFunction,
    cumulative_integral,
    differentiate,
    grid_function,
    integrate,
    jet_matrix,
    taylor_jet,
)


@pytest.fixture
def grid64():
    return AngularGrid(L=1.0, n=64)


def test_node_layout(grid64):
    assert grid64.nodes[0] == 0.0
    assert grid64.nodes[-1] == grid64.L
    assert np.all(np.diff(grid64.nodes) > 0)


def test_quadrature_of_one_is_L():
    for L in (0.7, 1.0, 1.5):
        g = AngularGrid(L=L, n=48)
        one = grid_function(g, lambda t: np.ones_like(t))
        assert abs(integrate(one) - L) <= 1e-12 * L


def test_quadrature_uniform_kind():
    g = AngularGrid(L=1.2, n=401, kind="uniform")
    f = grid_function(g, lambda t: np.cos(2 * t))
    exact = 0.5 * np.sin(2.4)
    assert abs(integrate(f) - exact) < 1e-10


def test_derivative_polynomial_exactness(grid64):
    # degree <= n-2 polynomials differentiate exactly on the clustered grid
    rng = np.random.default_rng(0)
    coeffs = rng.standard_normal(grid64.n - 1)
    poly = np.polynomial.Polynomial(coeffs)
    f = grid_function(grid64, poly)
    df = differentiate(f, 1)
    exact = poly.deriv()(grid64.nodes)
    scale = np.max(np.abs(exact))
    assert np.max(np.abs(df.values - exact)) <= 1e-9 * scale


def test_derivative_sin2theta(grid64):
    f = grid_function(grid64, lambda t: np.sin(2 * t), parity="odd")
    df = differentiate(f, 1)
    assert df.parity == "even"
    assert np.max(np.abs(df.values - 2 * np.cos(2 * grid64.nodes))) <= 1e-9


def test_fourth_derivative_theta4(grid64):
    f = grid_function(grid64, lambda t: t**4)
    d4 = differentiate(f, 4)
    assert np.max(np.abs(d4.values - 24.0)) <= 1e-8


def test_derivative_order_errors(grid64):
    f = grid_function(grid64, lambda t: t**2)
    with pytest.raises(UnsupportedOrderError):
        differentiate(f, 6)
    tiny = AngularGrid(L=1.0, n=6)
    with pytest.raises(ResolutionError):
        differentiate(grid_function(tiny, lambda t: t**2), 3)


def test_integrate_theta_cubed():
    g = AngularGrid(L=1.3, n=64)
    f = grid_function(g, lambda t: t**3, parity="odd")
    assert abs(integrate(f, 0.0, 1.0) - 0.25) <= 1e-10


def test_integrate_endpoint_interpolation():
    # off-node bounds go through the spectral antiderivative
    g = AngularGrid(L=1.4, n=96)
    f = grid_function(g, lambda t: np.cos(t) ** 2 * np.sin(2 * t), parity="odd")
    coarse = integrate(f, 0.0, 1.0)
    fine = integrate(f.resample(g.with_n(192)), 0.0, 1.0)
    assert abs(coarse - fine) <= 1e-10


def test_integrate_domain_error(grid64):
    f = grid_function(grid64, lambda t: t)
    with pytest.raises(DomainError):
        integrate(f, 0.5, 0.2)


def test_quadrature_spectral_decay():
    exact = 0.5 * (1 - np.cos(2 * 1.5))
    errs = []
    for n in (8, 16, 32):
        g = AngularGrid(L=1.5, n=n)
        f = grid_function(g, lambda t: np.sin(2 * t), parity="odd")
        errs.append(abs(integrate(f) - exact))
    assert errs[1] <= max(0.1 * errs[0], 1e-14)
    assert errs[2] <= max(0.1 * errs[1], 1e-14)


def test_differentiate_then_integrate_roundtrip(grid64):
    f = grid_function(grid64, lambda t: np.cos(2 * t))
    back = cumulative_integral(differentiate(f, 1))
    expect = f.values - f.values[0]
    assert np.max(np.abs(back.values - expect)) <= 1e-11


def test_taylor_jet_quadratic(grid64):
    f = grid_function(grid64, lambda t: 3.0 + t**2)
    jet = taylor_jet(f, 2)
    assert np.allclose(jet, [3.0, 0.0, 2.0], atol=1e-10)
    assert jet[1] == 0.0


def test_taylor_jet_cos(grid64):
    f = grid_function(grid64, np.cos)
    jet = taylor_jet(f, 4)
    assert np.allclose(jet, [1.0, 0.0, -1.0, 0.0, 1.0], atol=1e-7)
    assert jet[1] == 0.0 and jet[3] == 0.0


def test_taylor_jet_odd_parity(grid64):
    f = grid_function(grid64, lambda t: np.sin(2 * t), parity="odd")
    jet = taylor_jet(f, 3)
    assert jet[0] == 0.0 and jet[2] == 0.0
    assert abs(jet[1] - 2.0) < 1e-8
    assert abs(jet[3] + 8.0) < 1e-5


def test_taylor_jet_of_remainder_vanishes(grid64):
    # jet of f - P2 f through order 2 is zero for smooth even f
    f = grid_function(grid64, np.cos)
    jet = taylor_jet(f, 2)
    rem = GridFunction(grid64, f.values - (jet[0] + 0.5 * jet[2] * grid64.nodes**2))
    assert np.max(np.abs(taylor_jet(rem, 2))) <= 1e-8


def test_taylor_jet_condition_reported(grid64):
    f = grid_function(grid64, np.cos)
    jet, cond = taylor_jet(f, 4, with_cond=True)
    assert np.isfinite(cond) and cond >= 1.0


def test_jet_matrix_matches_taylor_jet(grid64):
    f = grid_function(grid64, lambda t: np.cos(2 * t))
    mat = jet_matrix(grid64, 2)
    assert np.allclose(mat @ f.values, taylor_jet(f, 2), atol=1e-12)


def test_interpolation_matches_function():
    g = AngularGrid(L=1.2, n=80)
    f = grid_function(g, lambda t: np.exp(-t) * np.cos(3 * t))
    pts = np.linspace(0, g.L, 313)
    assert np.max(np.abs(f(pts) - np.exp(-pts) * np.cos(3 * pts))) < 1e-12


def test_parity_algebra(grid64):
    even = grid_function(grid64, np.cos)
    odd = grid_function(grid64, np.sin, parity="odd")
    assert (even * odd).parity == "odd"
    assert (odd * odd).parity == "even"
    assert differentiate(even, 1).parity == "odd"


def test_grid_validation():
    with pytest.raises(DomainError):
        AngularGrid(L=2.0, n=32)
    with pytest.raises(DomainError):
        AngularGrid(L=-0.5, n=32)
    with pytest.raises(ResolutionError):
        AngularGrid(L=1.0, n=2)

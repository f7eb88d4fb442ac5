import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drheat.geometry import SpaceParams
from drheat.spherical import (
    SERIES_RADIUS, SphericalError, c_function, eigen_residual, hc_series, phi_lambda, phi_series,
    plancherel_density, plancherel_density_fit,
)

SPACES = [SpaceParams(2, 0), SpaceParams(2, 1), SpaceParams(4, 3), SpaceParams(8, 1)]


def h3_phi(lam, r):
    # k = 0, m = 2: the radial equation reduces to (2 sinh(r/2) phi)'' = -lam^2 (2 sinh(r/2) phi)
    return np.sin(lam * r) / (2 * lam * np.sinh(r / 2))


@pytest.mark.parametrize("lam", [0.25, 0.5, 1.0, 2.0, 4.0])
def test_h3_closed_form(lam):
    r = np.linspace(0.01, 30, 400)
    ev = phi_lambda(SpaceParams(2, 0), lam, r)
    np.testing.assert_allclose(ev.phi, h3_phi(lam, r), atol=1e-8, rtol=0)


def test_closed_form_candidate_solves_ode():
    # the candidate is checked against the ODE itself, independent of the solver
    p = SpaceParams(2, 0)
    lam, h = 1.3, 1e-4
    r = np.array([0.5, 1.0, 3.0, 7.0])
    f = lambda x: h3_phi(lam, x)
    d1 = (f(r + h) - f(r - h)) / (2 * h)
    d2 = (f(r + h) - 2 * f(r) + f(r - h)) / h**2
    res = d2 + (1 / np.tanh(r / 2)) * d1 + (lam**2 + 0.25) * f(r)
    assert np.max(np.abs(res)) < 1e-6


@pytest.mark.parametrize("p", SPACES, ids=str)
def test_normalization_and_symmetry(p):
    for lam in [0.7, 3.0, 0.4j * p.Q]:
        ev = phi_lambda(p, lam, np.array([0.0, 0.5, 2.0, 8.0]))
        assert ev.phi[0] == 1 and ev.dphi[0] == 0
        ev_neg = phi_lambda(p, -lam, ev.r_grid)
        np.testing.assert_allclose(ev.phi, ev_neg.phi, rtol=1e-14)


@pytest.mark.parametrize("p", SPACES, ids=str)
def test_ground_state_is_constant(p):
    ev = phi_lambda(p, 0.5j * p.Q, np.linspace(0, 30, 61))
    np.testing.assert_allclose(ev.phi, 1, atol=1e-10)


@pytest.mark.parametrize("p", SPACES[:2], ids=str)
@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0, 4.0, "imag"])
def test_eigen_residual(p, lam):
    lam = 0.3j * p.Q if lam == "imag" else lam
    r = np.linspace(SERIES_RADIUS + 3e-3, 30, 300)
    ev = phi_lambda(p, lam, r)
    res = eigen_residual(p, ev)
    assert np.nanmax(res) <= 1e-8


def test_series_start():
    p = SpaceParams(4, 3)
    lam = 1.7
    phi, dphi = phi_series(p, lam, 0.0)
    assert phi == 1 and dphi == 0
    r = 2e-3
    ev = phi_lambda(p, lam, np.array([0.0, 0.01, 0.02]))
    # leading term 1 - (lam^2 + Q^2/4) r^2 / (2n)
    assert math.isclose(phi_series(p, lam, r)[0], 1 - (lam**2 + p.Q**2 / 4) * r**2 / (2 * p.n), rel_tol=1e-8)
    np.testing.assert_allclose(ev.phi[1:], phi_series(p, lam, ev.r_grid[1:])[0], rtol=1e-9)


def test_invalid_grid_and_lambda():
    p = SpaceParams(2, 1)
    with pytest.raises(ValueError):
        phi_lambda(p, 1.0, np.array([0.0, 1.0, 0.5]))
    with pytest.raises(ValueError):
        phi_lambda(p, 1 + 1j, np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        plancherel_density(p, np.array([0.0, 1.0]))


@pytest.mark.parametrize("p", SPACES, ids=str)
def test_density_routes_agree(p):
    lams = np.array([0.5, 1.0, 2.0, 4.0])
    gamma_route = plancherel_density(p, lams)
    fit_route = np.array([plancherel_density_fit(p, float(l)) for l in lams])
    np.testing.assert_allclose(fit_route, gamma_route, rtol=1e-6)


def test_density_verify_flags_disagreement():
    p = SpaceParams(2, 1)
    plancherel_density(p, np.array([1.0]), verify=True)
    with pytest.raises(SphericalError):
        plancherel_density(p, np.array([1.0]), verify=True, rtol=1e-17)


@pytest.mark.parametrize("p", SPACES, ids=str)
def test_density_small_lambda_quadratic(p):
    ratio = plancherel_density(p, 1e-3) / plancherel_density(p, 2e-3)
    assert abs(ratio / 0.25 - 1) < 0.05


def test_h3_density_is_quadratic():
    p = SpaceParams(2, 0)
    lams = np.linspace(0.5, 5, 7)
    fit = np.array([plancherel_density_fit(p, float(l)) for l in lams])
    np.testing.assert_allclose(fit / lams**2, (fit / lams**2)[0], rtol=1e-6)


@pytest.mark.parametrize("p", SPACES, ids=str)
def test_harish_chandra_expansion_reproduces_phi(p):
    lam = 1.3
    r = np.array([0.8, 2.0, 5.0, 12.0])
    g_plus, _ = hc_series(p, lam, r)
    g_minus, _ = hc_series(p, -lam, r)
    e = np.exp((1j * lam - p.Q / 2) * r)
    recon = np.real(c_function(p, lam) * e * g_plus + c_function(p, -lam) * np.conj(e) * g_minus)
    np.testing.assert_allclose(recon, phi_lambda(p, lam, r).phi, rtol=1e-9, atol=1e-13)


def test_hc_series_rejects_origin():
    with pytest.raises(ValueError):
        hc_series(SpaceParams(2, 1), 1.0, 0.0)


@settings(max_examples=25, deadline=None)
@given(lam=st.floats(0.05, 6.0), r=st.floats(0.0, 25.0))
def test_phi_bounded_by_one(lam, r):
    # |phi_lambda| <= phi_0 <= 1 for real lambda
    p = SpaceParams(2, 1)
    ev = phi_lambda(p, lam, np.array([0.0, r]) if r > 0 else np.array([0.0]))
    assert np.all(np.abs(ev.phi) <= 1 + 1e-10)

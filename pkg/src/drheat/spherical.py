"""Spherical functions of a Damek-Ricci space.

phi_lambda is the radial eigenfunction of the Laplace-Beltrami operator,

    phi'' + (A'/A) phi' + (lambda^2 + Q^2/4) phi = 0,   phi(0) = 1,

computed by a power-series start near the regular singular point r = 0 and an
adaptive Runge-Kutta integration beyond it. In terms of Jacobi functions,
phi_lambda(r) = phi^{(alpha,beta)}_{2 lambda}(r/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import loggamma

from .geometry import SpaceParams, volume_log_derivative

SERIES_RADIUS = 1e-3
ODE_RTOL = 1e-12


class SphericalError(RuntimeError):
    pass


@dataclass
class SphericalEval:
    lam: complex
    r_grid: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    _dense: object = field(default=None, repr=False)


def _eigenvalue(params: SpaceParams, lam) -> np.ndarray:
    lam = np.asarray(lam)
    return lam * lam + params.Q**2 / 4


def _series_coeffs(params: SpaceParams, omega):
    # phi = 1 + c2 r^2 + c4 r^4 near 0, where A'/A = (n-1)/r + b r + O(r^3)
    n = params.n
    b = (params.m + params.k) / 12 + params.k / 4
    c2 = -omega / (2 * n)
    c4 = omega * (2 * b + omega) / (8 * n * (n + 2))
    return c2, c4


def phi_series(params: SpaceParams, lam, r):
    """Fourth-order Taylor start for (phi, phi') valid for small r."""
    c2, c4 = _series_coeffs(params, _eigenvalue(params, lam))
    r = np.asarray(r)
    return 1 + c2 * r**2 + c4 * r**4, 2 * c2 * r + 4 * c4 * r**3


def _rhs_psi(params: SpaceParams, lam_sq):
    # psi = e^{Qr/2} phi satisfies psi'' + (a - Q) psi' + (lam^2 + Q^2/2 - a Q/2) psi = 0
    Q = params.Q
    half = len(lam_sq)

    def rhs(r, y):
        a = float(volume_log_derivative(params, r))
        psi, dpsi = y[:half], y[half:]
        return np.concatenate([dpsi, -(a - Q) * dpsi - (lam_sq + Q * Q / 2 - a * Q / 2) * psi])

    return rhs


def _solve_block(params: SpaceParams, lams, r_end: float, rtol: float = ODE_RTOL):
    """Integrate psi for several spectral parameters at once on [r0, r_end].

    lams must have real lam^2 (lambda real or purely imaginary).
    Returns the dense-output object of solve_ivp for the stacked state.
    """
    lams = np.atleast_1d(np.asarray(lams))
    lam_sq = np.real(lams * lams).astype(float)
    Q = params.Q
    r0 = SERIES_RADIUS
    phi0, dphi0 = phi_series(params, lams, r0)
    phi0 = np.real(phi0).astype(float)
    dphi0 = np.real(dphi0).astype(float)
    e = math.exp(Q * r0 / 2)
    y0 = np.concatenate([e * phi0, e * (dphi0 + Q * phi0 / 2)])
    sol = integrate.solve_ivp(
        _rhs_psi(params, lam_sq), (r0, max(r_end, r0 * 1.0001)), y0,
        method="DOP853", rtol=rtol, atol=1e-14 * rtol, dense_output=True,
    )
    if sol.status != 0:
        raise SphericalError(f"spherical-function ODE failed: {sol.message}")
    return sol.sol


def _eval_block(params: SpaceParams, lams, dense, r):
    """(phi, phi') arrays of shape (len(lams), len(r)) from a block solution."""
    lams = np.atleast_1d(np.asarray(lams))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    N = len(lams)
    phi = np.empty((N, r.size))
    dphi = np.empty((N, r.size))
    small = r < SERIES_RADIUS
    if np.any(small):
        p, dp = phi_series(params, lams[:, None], r[small][None, :])
        phi[:, small] = np.real(p)
        dphi[:, small] = np.real(dp)
    if np.any(~small):
        rr = r[~small]
        y = dense(rr)
        e = np.exp(-params.Q * rr / 2)
        psi, dpsi = y[:N], y[N:]
        phi[:, ~small] = e * psi
        dphi[:, ~small] = e * (dpsi - params.Q * psi / 2)
    return phi, dphi


def phi_lambda(params: SpaceParams, lam, r_grid, rtol: float = ODE_RTOL) -> SphericalEval:
    """Spherical function phi_lambda and its derivative on r_grid.

    lam may be real or purely imaginary (given as a complex number).
    """
    lam = complex(lam)
    if abs(lam.real) > 0 and abs(lam.imag) > 0:
        raise ValueError("lambda must be real or purely imaginary")
    r_grid = np.asarray(r_grid, dtype=float)
    if np.any(np.diff(r_grid) <= 0) or r_grid[0] < 0:
        raise ValueError("r_grid must be non-negative and strictly increasing")
    key = np.array([lam.real if lam.imag == 0 else 1j * lam.imag])
    dense = _solve_block(params, key, float(r_grid[-1]) + 0.01, rtol=rtol)
    phi, dphi = _eval_block(params, key, dense, r_grid)
    return SphericalEval(lam, r_grid, phi[0], dphi[0], dense)


def eigen_residual(params: SpaceParams, ev: SphericalEval, h: float = 1e-3) -> np.ndarray:
    """|phi'' + (A'/A) phi' + (lam^2 + Q^2/4) phi| on the grid points r >= r0 + 2h.

    phi'' is a five-point difference of the solver's phi'; grid points closer
    to the series region are returned as NaN.
    """
    r = ev.r_grid
    out = np.full(r.shape, np.nan)
    ok = (r >= SERIES_RADIUS + 2 * h) & (r <= ev.r_grid[-1] + 0.01 - 2 * h)
    if not np.any(ok):
        return out
    rr = r[ok]
    key = np.array([ev.lam.real if ev.lam.imag == 0 else 1j * ev.lam.imag])

    def dphi_at(x):
        return _eval_block(params, key, ev._dense, x)[1][0]

    d2 = (-dphi_at(rr + 2 * h) + 8 * dphi_at(rr + h) - 8 * dphi_at(rr - h) + dphi_at(rr - 2 * h)) / (12 * h)
    omega = float(np.real(_eigenvalue(params, ev.lam)))
    phi, dphi = _eval_block(params, key, ev._dense, rr)
    out[ok] = np.abs(d2 + volume_log_derivative(params, rr) * dphi[0] + omega * phi[0])
    return out


# ---------------------------------------------------------------- c-function

def log_c_function(params: SpaceParams, lam):
    """log c(lambda) for complex lambda, with c(lambda) = c_Jacobi(2 lambda).

    c_Jacobi(mu) = 2^{rho - i mu} Gamma(alpha+1) Gamma(i mu)
                   / (Gamma((i mu + rho)/2) Gamma((i mu + alpha - beta + 1)/2)),
    rho = alpha + beta + 1 = Q. With this normalization
    phi_lambda(r) ~ c(lambda) e^{(i lambda - Q/2) r} + c(-lambda) e^{(-i lambda - Q/2) r}.
    """
    al, be, Q = params.jacobi_alpha, params.jacobi_beta, params.Q
    iz = 2j * np.asarray(lam, dtype=complex)
    return (
        (Q - iz) * math.log(2)
        + loggamma(al + 1)
        + loggamma(iz)
        - loggamma((iz + Q) / 2)
        - loggamma((iz + al - be + 1) / 2)
    )


def c_function(params: SpaceParams, lam):
    return np.exp(log_c_function(params, lam))


def plancherel_density(params: SpaceParams, lam, verify: bool = False, rtol: float = 1e-6):
    """|c(lambda)|^{-2} from the Gamma-function formula.

    With verify=True, each value is cross-checked against the independent
    large-r asymptotic fit of the ODE solution and a SphericalError is raised
    on disagreement beyond rtol.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("plancherel_density requires lambda > 0")
    dens = np.exp(-2 * np.real(log_c_function(params, lam)))
    if verify:
        for lv, dv in zip(np.atleast_1d(lam), np.atleast_1d(dens)):
            fit = plancherel_density_fit(params, float(lv))
            if abs(fit / dv - 1) > rtol:
                raise SphericalError(
                    f"Plancherel density routes disagree at lambda={lv}: gamma formula {dv}, asymptotic fit {fit}"
                )
    return dens


def asymptotic_coefficient(params: SpaceParams, lam: float, window=(30.0, 40.0), samples: int = 400) -> complex:
    """Least-squares fit of e^{Qr/2} phi_lambda(r) = 2 Re[c e^{i lambda r}] on a far window."""
    r = np.linspace(window[0], window[1], samples)
    ev = phi_lambda(params, lam, np.concatenate([[0.0], r]), rtol=1e-13)
    psi = np.exp(params.Q * r / 2) * ev.phi[1:]
    basis = np.column_stack([np.cos(lam * r), np.sin(lam * r)])
    (p, q), *_ = np.linalg.lstsq(basis, psi, rcond=None)
    # 2 Re[c e^{i lam r}] = 2 Re c cos - 2 Im c sin
    return complex(p / 2, -q / 2)


def plancherel_density_fit(params: SpaceParams, lam: float, **kw) -> float:
    """|c(lambda)|^{-2} from the fitted large-r amplitude of the ODE solution."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    c = asymptotic_coefficient(params, lam, **kw)
    return 1.0 / abs(c) ** 2


# ------------------------------------------------- Harish-Chandra expansion

def hc_series(params: SpaceParams, lam, r, tol: float = 1e-17, max_terms: int = 4000):
    """Harish-Chandra function Phi_lambda(r) = e^{(i lambda - Q/2) r} g(lambda, r).

    g = sum_j G_j e^{-j r} with G_0 = 1 and
    G_j j (j - 2 i lambda) = sum_{l=1}^{j} a_l (j - l - kappa) G_{j-l},
    a_l = m + 2k (l even), m (l odd), kappa = i lambda - Q/2.
    Converges for r > 0; poles only at lambda = -i j/2.
    lam and r broadcast. Returns (g, dg/dr).
    """
    lam = np.asarray(lam, dtype=complex)
    r = np.asarray(r, dtype=float)
    lam, r = np.broadcast_arrays(lam, r)
    if np.any(r <= 0):
        raise ValueError("Harish-Chandra series requires r > 0")
    kappa = 1j * lam - params.Q / 2
    z = np.exp(-r)
    even_w, odd_w = params.m + 2 * params.k, params.m
    P = [np.zeros(lam.shape, complex), np.zeros(lam.shape, complex)]
    G = np.ones(lam.shape, complex)
    P[0] += -kappa * G
    g = G.copy()
    dg = np.zeros(lam.shape, complex)
    zj = np.ones(r.shape)
    small_run = 0
    for j in range(1, max_terms):
        G = (even_w * P[j % 2] + odd_w * P[(j + 1) % 2]) / (j * (j - 2j * lam))
        P[j % 2] = P[j % 2] + (j - kappa) * G
        zj = zj * z
        term = G * zj
        g = g + term
        dg = dg - j * term
        if np.all(np.abs(term) * (j + 1) <= tol * np.abs(g)):
            small_run += 1
            if small_run >= 3:
                break
        else:
            small_run = 0
    else:
        raise SphericalError("Harish-Chandra series did not converge; r too small")
    return g, dg

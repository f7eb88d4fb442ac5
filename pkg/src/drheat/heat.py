"""Heat kernel of a Damek-Ricci space by inverse spherical transform.

    d^i/dt^i h_t(r) = C  int_0^inf (-w)^i e^{-w t} phi_lambda(r) |c(lambda)|^{-2} d lambda,
    w = lambda^2 + Q^2/4.

Two quadrature routes are used:

* ``inversion`` (real axis): phi_lambda from the ODE solver, Gauss-Legendre in
  lambda on [0, lambda_max]. Used for r < ``r_switch``.
* ``inversion-contour``: phi_lambda = c(lambda) Phi_lambda + c(-lambda) Phi_{-lambda}
  turns the integral into int_R e^{-w t} Phi_lambda(r) / c(-lambda) d lambda,
  whose integrand is holomorphic in the upper half plane. The contour is moved
  to the saddle Im lambda = r / 2t, which removes the e^{-r^2/4t} cancellation
  that makes the real-axis sum useless for large r^2/t.

The constant C is calibrated once by unit mass at t = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import erfc

from .geometry import (
    SpaceParams,
    log_volume_density,
    volume_density,
    volume_log_derivative,
)
from .spherical import (
    _eval_block,
    _solve_block,
    hc_series,
    log_c_function,
    plancherel_density,
)

R_SWITCH = 1.0
T_CALIBRATION = 1.0


class KernelError(RuntimeError):
    pass


@dataclass
class KernelEval:
    t: float
    r: float
    order: int
    value: float
    oracle: str
    quad_meta: dict = field(default_factory=dict)


@lru_cache(maxsize=64)
def _gauss_legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


def _nodes(lo: float, hi: float, n: int):
    x, w = _gauss_legendre(n)
    half = (hi - lo) / 2
    return lo + half * (x + 1), half * w


def lambda_max(params: SpaceParams, t: float, i: int = 0) -> float:
    return params.Q / 2 + (12 + 2 * i) / math.sqrt(t)


def _node_count(span: float, t: float, r: float) -> int:
    # Gaussian width 1/sqrt(t) plus oscillation e^{i lambda r} on the real axis
    n = 48 + 2.5 * span * math.sqrt(t) + 1.2 * span * r
    return int(min(2048, 8 * math.ceil(n / 8)))


def _radial_gl(f, r_max: float, rtol: float = 1e-10, panels: int = 8, order: int = 24):
    """Composite Gauss-Legendre on [0, r_max] for a vectorized f, with panel doubling."""
    prev = None
    for _ in range(8):
        edges = np.linspace(0.0, r_max, panels + 1)
        x, w = _gauss_legendre(order)
        mid = (edges[:-1] + edges[1:]) / 2
        half = (edges[1:] - edges[:-1]) / 2
        nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        weights = (half[:, None] * w[None, :]).ravel()
        val = float(np.sum(weights * f(nodes)))
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            return val, abs(val - prev)
        prev = val
        panels *= 2
    raise KernelError(f"radial Gauss-Legendre failed to converge (last change {abs(val - prev)})")


class HeatKernel:
    """Inversion oracle for h_t(r), its time derivatives and radial gradient."""

    def __init__(self, params: SpaceParams, r_switch: float = R_SWITCH, verify_density: bool = True):
        self.params = params
        self.r_switch = r_switch
        self._C = None
        self._block_cache: dict = {}
        if verify_density:
            plancherel_density(params, np.array([0.5, 1.0, 2.0]), verify=True)

    # -------------------------------------------------------------- constants
    @property
    def theoretical_normalization(self) -> float:
        """2^k / (2 pi |S^{n-1}|), the Plancherel constant for this scaling of the metric."""
        p = self.params
        return 2.0**p.k / (2 * math.pi * p.sphere_area)

    @property
    def normalization(self) -> float:
        if self._C is None:
            self._C = 1.0
            R = self.mass_radius(T_CALIBRATION)
            mass, _ = _radial_gl(
                lambda r: self.profile(T_CALIBRATION, r) * volume_density(self.params, r), R
            )
            self._C = 1.0 / (self.params.sphere_area * mass)
        return self._C

    def mass_radius(self, t: float) -> float:
        """Radius beyond which h_t A carries less than ~1e-14 of the mass."""
        Q = self.params.Q
        return Q * t + 2 * math.sqrt(t) * 8.5 + 4.0 + self.params.n

    # ---------------------------------------------------------- real axis
    def _real_axis_block(self, t: float, n: int, i_max: int, r_top: float):
        key = (t, n, i_max)
        hit = self._block_cache.get(key)
        if hit is not None and hit[0] >= r_top:
            return hit[1:]
        Lam = lambda_max(self.params, t, i_max)
        lam, w = _nodes(0.0, Lam, n)
        dense = _solve_block(self.params, lam, max(r_top, self.r_switch) + 0.01, rtol=1e-11)
        if len(self._block_cache) > 256:
            self._block_cache.clear()
        self._block_cache[key] = (max(r_top, self.r_switch), lam, w, dense)
        return lam, w, dense

    def _real_axis(self, t, r, orders, grad, n):
        p = self.params
        i_max = max(orders)
        lam, w, dense = self._real_axis_block(t, n, i_max, float(np.max(r)))
        phi, dphi = _eval_block(p, lam, dense, r)
        omega = lam**2 + p.Q**2 / 4
        base = w * np.exp(-lam**2 * t) * plancherel_density(p, np.maximum(lam, 1e-300))
        vals = np.array([((-omega) ** i * base) @ phi for i in orders])
        dvals = ((base @ dphi)[None, :]) if grad else None
        log_scale = np.full(r.shape, -p.Q**2 * t / 4)
        return vals, dvals, log_scale

    # ------------------------------------------------------------- contour
    def _contour(self, t, r, orders, grad, n):
        p = self.params
        Q = p.Q
        i_max = max(orders)
        X = lambda_max(p, t, i_max)
        x, w = _nodes(0.0, X, n)
        eta = r / (2 * t)
        lam = x[:, None] + 1j * eta[None, :]
        omega = lam * lam + Q * Q / 4
        kappa = 1j * lam - Q / 2
        log_scale = -Q * Q * t / 4 - r * r / (4 * t) - Q * r / 2
        E = -omega * t + kappa * r[None, :] - log_c_function(p, -lam) - log_scale[None, :]
        g, dg = hc_series(p, lam, np.broadcast_to(r[None, :], lam.shape))
        core = np.exp(E) * g
        vals = np.array([2 * np.real(w @ ((-omega) ** i * core)) for i in orders])
        dvals = None
        if grad:
            dcore = np.exp(E) * (kappa * g + dg)
            dvals = 2 * np.real(w @ dcore)[None, :]
        return vals, dvals, log_scale

    # --------------------------------------------------------------- driver
    def _evaluate(self, t, r, orders=(0,), grad=False, refine: int = 1):
        """Scaled values: result = vals * exp(log_scale) * C.

        Returns (vals[len(orders), M], dvals[1, M] or None, log_scale[M], oracle[M]).
        """
        if t <= 0:
            raise ValueError("t must be positive")
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r < 0):
            raise ValueError("r must be non-negative")
        orders = tuple(int(i) for i in orders)
        M = r.size
        vals = np.empty((len(orders), M))
        dvals = np.empty((1, M)) if grad else None
        scale = np.empty(M)
        # real axis only where the e^{-r^2/4t} cancellation is mild
        use_real = (r < self.r_switch) & ~((r >= 0.2) & (r * r / (4 * t) > 2.0))
        oracle = np.where(use_real, "inversion", "inversion-contour")
        i_max = max(orders)
        span = lambda_max(self.params, t, i_max)
        if np.any(use_real):
            n = _node_count(span, t, self.r_switch) * refine
            v, d, s = self._real_axis(t, r[use_real], orders, grad, n)
            vals[:, use_real], scale[use_real] = v, s
            if grad:
                dvals[:, use_real] = d
        if np.any(~use_real):
            rc = r[~use_real]
            n = _node_count(span, t, 0.0) * refine
            v, d, s = self._contour(t, rc, orders, grad, n)
            vals[:, ~use_real], scale[~use_real] = v, s
            if grad:
                dvals[:, ~use_real] = d
        return vals, dvals, scale, oracle

    # ------------------------------------------------------------ public API
    def profile(self, t: float, r, i: int = 0) -> np.ndarray:
        """d^i h_t / dt^i at the radii r (vectorized)."""
        vals, _, scale, _ = self._evaluate(t, r, (i,))
        return self.normalization * vals[0] * np.exp(scale)

    def log_abs(self, t: float, r, orders=(0,)):
        """(log|d^i h_t(r)|, sign) for each requested order; safe against underflow."""
        vals, _, scale, _ = self._evaluate(t, r, orders)
        with np.errstate(divide="ignore"):
            return np.log(np.abs(vals)) + scale + math.log(self.normalization), np.sign(vals)

    def log_abs_gradient(self, t: float, r):
        _, dvals, scale, _ = self._evaluate(t, r, (0,), grad=True)
        with np.errstate(divide="ignore"):
            return np.log(np.abs(dvals[0])) + scale + math.log(self.normalization), np.sign(dvals[0])

    def gradient_profile(self, t: float, r) -> np.ndarray:
        """d/dr h_t(r) (vectorized)."""
        _, dvals, scale, _ = self._evaluate(t, r, (0,), grad=True)
        return self.normalization * dvals[0] * np.exp(scale)

    def evaluate(self, t: float, r: float, i: int = 0) -> KernelEval:
        """Single evaluation with quadrature metadata and error estimate."""
        C = self.normalization
        vals, _, scale, oracle = self._evaluate(t, [r], (i,))
        fine, _, _, _ = self._evaluate(t, [r], (i,), refine=2)
        value = C * fine[0, 0] * math.exp(scale[0])
        est = C * abs(fine[0, 0] - vals[0, 0]) * math.exp(scale[0])
        p = self.params
        Lam = lambda_max(p, t, i)
        gauss = math.sqrt(math.pi / (4 * t)) * erfc(Lam * math.sqrt(t))
        if oracle[0] == "inversion":
            # Gaussian tail beyond lambda_max, |phi| <= 1 on the real axis
            tail = (
                C * math.exp(-p.Q**2 * t / 4) * float(plancherel_density(p, Lam))
                * (Lam**2 + p.Q**2 / 4) ** i * gauss
            )
        else:
            # on the shifted contour the integrand is e^{-x^2 t} times a slowly varying factor
            lam = Lam + 1j * r / (2 * t)
            g, _ = hc_series(p, lam, r)
            amp = abs((lam * lam + p.Q**2 / 4) ** i * g * np.exp(-log_c_function(p, -lam)))
            tail = 2 * C * math.exp(scale[0]) * float(amp) * gauss
        n = _node_count(Lam, t, self.r_switch if oracle[0] == "inversion" else 0.0) * 2
        meta = {"lambda_max": Lam, "nodes": n, "est_error": float(est), "tail_bound": float(tail)}
        if tail > 1e-10 * abs(value) and abs(value) > 0:
            raise KernelError(f"spectral tail bound {tail:g} exceeds 1e-10 of value {value:g}")
        return KernelEval(t, r, i, value, str(oracle[0]), meta)

    def table(self, t: float, r, i: int = 0):
        """(value, est_error, oracle) arrays at the radii r.

        est_error is the change under doubling of the spectral node count.
        """
        C = self.normalization
        vals, _, scale, oracle = self._evaluate(t, r, (i,))
        fine, _, _, _ = self._evaluate(t, r, (i,), refine=2)
        w = C * np.exp(scale)
        return w * fine[0], w * np.abs(fine[0] - vals[0]), oracle

    def mass(self, t: float) -> float:
        R = self.mass_radius(t)
        m, _ = _radial_gl(lambda r: self.profile(t, r) * volume_density(self.params, r), R)
        return self.params.sphere_area * m


@lru_cache(maxsize=16)
def get_kernel(params: SpaceParams) -> HeatKernel:
    """Shared HeatKernel per space (calibration is done once)."""
    return HeatKernel(params)


def heat_kernel(params: SpaceParams, t: float, r: float, i: int = 0) -> KernelEval:
    return get_kernel(params).evaluate(t, r, i)


def gradient_kernel(params: SpaceParams, t: float, r: float) -> float:
    """d/dr h_t(r); the norm of the gradient of the radial kernel is its absolute value."""
    if r <= 0:
        raise ValueError("gradient_kernel requires r > 0")
    return float(get_kernel(params).gradient_profile(t, [r])[0])


# ---------------------------------------------------------- degenerate case

def exact_h3(t, r):
    """Heat kernel of real hyperbolic 3-space with curvature -1/4 (m=2, k=0)."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    half = r / 2
    shape = np.where(half > 0, half / np.sinh(np.where(half > 0, half, 1.0)), 1.0)
    return (4 * np.pi * t) ** -1.5 * shape * np.exp(-t / 4 - r * r / (4 * t))


def heat_equation_residual(u, params: SpaceParams, t, r, ht: float = 1e-4, hr: float = 1e-3):
    """Residual of u_t - u_rr - (A'/A) u_r by fourth-order differences.

    Normalized by the largest of the three terms, since u_t itself vanishes
    where the kernel switches from decaying to growing in t. ht and hr are
    scaled down where the Gaussian factor varies fast (small t, large r).
    """
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    ht = ht * t / (t + r * r / (4 * t))
    hr = hr / (1 + r / (2 * t))
    def d1(f, x, h):
        return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)

    def d2(f, x, h):
        return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h)

    ut = d1(lambda s: u(s, r), t, ht)
    ur = d1(lambda s: u(t, s), r, hr)
    urr = d2(lambda s: u(t, s), r, hr)
    drift = volume_log_derivative(params, r) * ur
    res = ut - urr - drift
    return np.abs(res) / np.maximum.reduce([np.abs(ut), np.abs(urr), np.abs(drift)])


# ------------------------------------------------------------- PDE cross-check

@dataclass
class PDEResult:
    r: np.ndarray
    u: np.ndarray
    reference: np.ndarray
    max_rel_dev: float
    mass_drift: float
    t0: float
    t_final: float


def heat_pde_crosscheck(
    params: SpaceParams,
    t_final: float,
    r_grid=None,
    t0: float = 0.05,
    kernel: HeatKernel | None = None,
    rtol: float = 1e-8,
) -> PDEResult:
    """Method-of-lines solve of u_t = u_rr + (A'/A) u_r from the oracle profile at t0.

    The PDE is integrated for v = log u,

        v_t = v_rr + v_r^2 + (A'/A) v_r,

    so that relative accuracy holds where u is exponentially small. At r = 0
    the symmetric limit v_t = n v_rr is used; at the outer edge v''' = 0.
    Deviation from the oracle is measured on the inner half of the grid.
    """
    kernel = kernel or get_kernel(params)
    if r_grid is None:
        r_grid = np.linspace(0.0, 16.0, 1601)
    r = np.asarray(r_grid, dtype=float)
    h = r[1] - r[0]
    if r[0] != 0 or np.any(np.abs(np.diff(r) - h) > 1e-9 * h):
        raise ValueError("r_grid must be uniform and start at 0")
    v0, _ = kernel.log_abs(t0, r)
    v0 = v0[0]
    n = params.n
    a = np.zeros_like(r)
    a[1:] = volume_log_derivative(params, r[1:])
    N = r.size
    inner = r <= r[-1] / 2
    logA = log_volume_density(params, r[1:])

    def log_mass(v):
        f = np.zeros_like(v)
        f[1:] = np.exp(v[1:] + logA)
        return integrate.simpson(f, x=r) * params.sphere_area

    mass0 = log_mass(v0)
    if t_final == t0:
        return PDEResult(r, np.exp(v0), np.exp(v0), 0.0, 0.0, t0, t_final)
    if t_final < t0:
        raise ValueError("t_final must be >= t0")

    def rhs(_, v):
        ext = np.empty(N + 1)
        ext[:N] = v
        ext[N] = 3 * v[-1] - 3 * v[-2] + v[-3]
        out = np.empty(N)
        out[0] = n * 2 * (v[1] - v[0]) / (h * h)
        vm, vc, vp = ext[:-2], ext[1:-1], ext[2:]
        vr = (vp - vm) / (2 * h)
        out[1:] = (vp - 2 * vc + vm) / (h * h) + vr * vr + a[1:] * vr
        return out

    from scipy.sparse import diags

    sparsity = diags([1, 1, 1], [-1, 0, 1], shape=(N, N)).tolil()
    sparsity[-1, -3] = 1
    sol = integrate.solve_ivp(
        rhs, (t0, t_final), v0, method="BDF", rtol=rtol, atol=rtol, jac_sparsity=sparsity.tocsr()
    )
    if sol.status != 0:
        raise KernelError(f"method-of-lines integration failed: {sol.message}")
    v = sol.y[:, -1]
    ref, _ = kernel.log_abs(t_final, r)
    ref = ref[0]
    dev = float(np.max(np.abs(np.expm1(v[inner] - ref[inner]))))
    drift = abs(log_mass(v) - mass0)
    return PDEResult(r, np.exp(v), np.exp(ref), dev, drift, t0, t_final)

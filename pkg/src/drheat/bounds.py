"""Estimate machinery for time derivatives of the heat kernel.

Covers the iterated-integral (Grigor'yan) bound, one step of parameter
propagation from bounds on f and f'' to a bound on f', the (beta, gamma)
recurrence with its closed-form limit, and the empirical constant of the
final derivative estimate.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from .geometry import SpaceParams
from .heat import HeatKernel, get_kernel


def lambda_eps(eps: float) -> float:
    if not 0 < eps < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {eps}")
    return (1 - eps) / (1 + eps)


# ------------------------------------------------------------- recurrence

@dataclass
class RecurrenceTable:
    epsilon: float
    lambda_eps: float
    L: int
    I: int
    beta_table: np.ndarray
    gamma_table: np.ndarray


def _fill(weight: float, L: int, I: int) -> np.ndarray:
    # row l needs row l-1 up to column i+1, so row 0 is allocated I+L wide
    width = I + L + 1
    row = np.zeros(width)
    row[0] = 1.0
    out = np.empty((L + 1, I + 1))
    out[0] = row[: I + 1]
    for ell in range(1, L + 1):
        w = width - ell
        new = np.empty(w)
        new[0] = 1.0
        new[1:w] = 0.5 * (weight * row[0:w - 1] + row[2:w + 1])
        row = new
        out[ell] = row[: I + 1]
    return out


def recurrence_table(eps: float, L: int, I: int) -> RecurrenceTable:
    """Tables of beta_l^i and gamma_l^i for 0 <= l <= L, 0 <= i <= I.

    beta_l^i  = (beta_{l-1}^{i-1} + beta_{l-1}^{i+1}) / 2,
    gamma_l^i = (lam * gamma_{l-1}^{i-1} + gamma_{l-1}^{i+1}) / 2,
    with row 0 equal to (1, 0, 0, ...) and column 0 identically 1.
    """
    if L < 1 or I < 1:
        raise ValueError("L and I must be at least 1")
    lam = lambda_eps(eps)
    return RecurrenceTable(eps, lam, L, I, _fill(1.0, L, I), _fill(lam, L, I))


def recurrence_limit(eps: float, i: int) -> float:
    """lim_l gamma_l^i = (1 - sqrt(1 - lambda_eps))^i; beta has limit 1."""
    return (1 - math.sqrt(1 - lambda_eps(eps))) ** i


# ---------------------------------------------------------- Grigor'yan bound

def grigoryan_exponent(params: SpaceParams) -> float:
    """(n - 3)/2, the power of (1 + t) in the on-diagonal bound."""
    return (params.n - 3) / 2


def grigoryan_f(params: SpaceParams, t):
    t = np.asarray(t, dtype=float)
    return t ** (params.n / 2) * (1 + t) ** (-grigoryan_exponent(params))


def _f_iterated(params: SpaceParams, i: int, t: float) -> float:
    if i == 0:
        return float(grigoryan_f(params, t))
    # Cauchy's formula for repeated integration, rescaled to [0, 1]
    val, err = integrate.quad(
        lambda u: (1 - u) ** (i - 1) * float(grigoryan_f(params, t * u)),
        0.0, 1.0, epsabs=0.0, epsrel=1e-12, limit=200,
    )
    if err > 1e-9 * abs(val):
        raise integrate.IntegrationWarning(f"f_{i}({t}) quadrature error {err}")
    return t**i * val / math.factorial(i - 1)


def grigoryan_f_sequence(params: SpaceParams, i_max: int, t_grid) -> np.ndarray:
    """Array of shape (i_max + 1, len(t_grid)) with f_0 = f and f_i = int_0^t f_{i-1}."""
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0):
        raise ValueError("t_grid must be positive")
    return np.array([[_f_iterated(params, i, t) for t in t_grid] for i in range(i_max + 1)])


def grigoryan_bound(params: SpaceParams, i: int, t) -> np.ndarray:
    """1 / sqrt(f(t) f_{2i}(t))."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    f0 = grigoryan_f(params, t)
    f2i = np.array([_f_iterated(params, 2 * i, s) for s in t])
    return 1 / np.sqrt(f0 * f2i)


# --------------------------------------------------- parameter propagation

@dataclass(frozen=True)
class BoundParams:
    """Bound c t^-alpha (1+t)^beta (1+r)^gamma exp(-D t - B r - C r^2/4t)."""

    alpha: float
    beta: float
    gamma: float
    D: float
    B: float
    C: float

    def __post_init__(self):
        if not self.alpha > self.beta >= 0:
            raise ValueError(f"need alpha > beta >= 0, got alpha={self.alpha}, beta={self.beta}")
        if min(self.D, self.B, self.C) < 0:
            raise ValueError("D, B, C must be non-negative")

    def log_shape(self, t, r):
        t = np.asarray(t, dtype=float)
        r = np.asarray(r, dtype=float)
        return (
            -self.alpha * np.log(t) + self.beta * np.log1p(t) + self.gamma * np.log1p(r)
            - self.D * t - self.B * r - self.C * r * r / (4 * t)
        )


class HypothesisError(ValueError):
    pass


def porper_propagate(p: BoundParams, p_star: BoundParams, eps: float) -> BoundParams:
    """Bound on f' from bounds p on f and p_star on f''.

    p_star carries the same (alpha, beta, gamma) as p; the bound on f'' is
    read as t^-2 times the p_star shape. Returns (alpha+1, beta, gamma, (D+D*)/2, (B+B*)/2, (C* + C lam_eps)/2).
    """
    if (p.alpha, p.beta, p.gamma) != (p_star.alpha, p_star.beta, p_star.gamma):
        raise HypothesisError("p and p_star must share alpha, beta, gamma")
    if not (p.D >= p_star.D and p.B >= p_star.B and p.C >= p_star.C):
        raise HypothesisError("requires D >= D*, B >= B*, C >= C*")
    lam = lambda_eps(eps)
    return BoundParams(
        p.alpha + 1, p.beta, p.gamma,
        (p.D + p_star.D) / 2, (p.B + p_star.B) / 2, (p_star.C + p.C * lam) / 2,
    )


def synthetic_f(p: BoundParams, t, r):
    """The model function t^-alpha (1+t)^beta (1+r)^gamma e^{-Dt - Br - Cr^2/4t}."""
    return np.exp(p.log_shape(t, r))


@dataclass
class CertificateReport:
    constant: float
    refined_constant: float
    relative_change: float
    argmax_t: float
    argmax_r: float
    hypothesis_constant: float
    refined_hypothesis_constant: float

    @property
    def hypothesis_stable(self) -> bool:
        return abs(self.refined_hypothesis_constant / self.hypothesis_constant - 1) < 0.05

    @property
    def passed(self) -> bool:
        return (
            math.isfinite(self.constant) and self.relative_change < 0.05
            and math.isfinite(self.hypothesis_constant) and self.hypothesis_stable
        )


def porper_certificate(
    p: BoundParams,
    p_star: BoundParams,
    eps: float,
    t_range=(1e-2, 50.0),
    r_range=(0.0, 20.0),
    points: int = 41,
) -> CertificateReport:
    """Empirical constant of |d/dt synthetic_f| against the propagated bound.

    Derivatives are central differences with step 1e-4 t. The constant is the
    grid maximum of |f'| / bound, recomputed on a 2x refined grid. The same
    scan of |f| / p and |f''| / p_star measures how well the synthetic function
    meets the hypotheses; a drifting hypothesis constant means it does not.
    """
    out = porper_propagate(p, p_star, eps)

    def scan(npts):
        t = np.geomspace(*t_range, npts)[:, None]
        r = np.linspace(*r_range, npts)[None, :]
        h = 1e-4 * t
        f0 = synthetic_f(p, t, r)
        fp = synthetic_f(p, t + h, r)
        fm = synthetic_f(p, t - h, r)
        d1 = (fp - fm) / (2 * h)
        d2 = (fp - 2 * f0 + fm) / (h * h)
        with np.errstate(divide="ignore"):
            ratio = np.log(np.abs(d1)) - out.log_shape(t, r)
            hyp = np.maximum(
                np.log(f0) - p.log_shape(t, r),
                np.log(np.abs(d2)) - (p_star.log_shape(t, r) - 2 * np.log(t)),
            )
        idx = np.unravel_index(np.argmax(ratio), ratio.shape)
        return math.exp(ratio[idx]), float(t[idx[0], 0]), float(r[0, idx[1]]), math.exp(np.max(hyp))

    c, tm, rm, hc = scan(points)
    c2, _, _, hc2 = scan(2 * points - 1)
    return CertificateReport(c, c2, abs(c2 / c - 1), tm, rm, hc, hc2)


# ------------------------------------------------------- main estimate check

@dataclass
class GridSpec:
    t_min: float
    t_max: float
    r_min: float
    r_max: float
    points: int

    def grids(self, refine: int = 1):
        """Log-spaced t and uniform r; refinement nests the coarse grid."""
        n = (self.points - 1) * refine + 1
        return np.geomspace(self.t_min, self.t_max, n), np.linspace(self.r_min, self.r_max, n)


@dataclass
class Theorem1Report:
    epsilon: float
    i: int
    c_min: float
    argmax_t: float
    argmax_r: float
    grid_spec: dict
    refined_c_min: float = float("nan")
    relative_change: float = float("nan")

    @property
    def passed(self) -> bool:
        return math.isfinite(self.c_min) and self.relative_change < 0.05

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def kernel_log_grid(kernel: HeatKernel, t_grid, r_grid, orders=(0,)) -> np.ndarray:
    """log|d^i h_t(r)| on the tensor grid, shape (len(orders), len(t), len(r))."""
    out = np.empty((len(orders), len(t_grid), len(r_grid)))
    for j, t in enumerate(t_grid):
        la, _ = kernel.log_abs(float(t), r_grid, orders)
        out[:, j, :] = la
    return out


def gaussian_exponent(params: SpaceParams, t, r):
    """Q^2 t/4 + Q r/2 + r^2/4t."""
    Q = params.Q
    return Q * Q * t / 4 + Q * r / 2 + r * r / (4 * t)


def theorem1_log_ratio(params: SpaceParams, eps: float, i: int, t, r, log_abs):
    """log of |d^i h| / [t^{-n/2-i} e^{-(1-eps)(Q^2 t/4 + Q r/2 + r^2/4t)}]."""
    return log_abs + (params.n / 2 + i) * np.log(t) + (1 - eps) * gaussian_exponent(params, t, r)


def theorem1_check(
    params: SpaceParams,
    eps: float,
    i: int,
    grid: GridSpec,
    kernel: HeatKernel | None = None,
    refine: bool = True,
) -> Theorem1Report:
    """Empirical constant of the derivative estimate on a (t, r) grid.

    With refine=True the scan is repeated on the 2x refined (nested) grid and
    the relative change of c_min is recorded.
    """
    if i not in (0, 1, 2, 3):
        raise ValueError("derivative order must be in {0, 1, 2, 3}")
    kernel = kernel or get_kernel(params)

    def scan(ref):
        t, r = grid.grids(ref)
        la = kernel_log_grid(kernel, t, r, (i,))[0]
        ratio = theorem1_log_ratio(params, eps, i, t[:, None], r[None, :], la)
        idx = np.unravel_index(np.argmax(ratio), ratio.shape)
        return math.exp(ratio[idx]), float(t[idx[0]]), float(r[idx[1]])

    c, tm, rm = scan(1)
    rep = Theorem1Report(eps, i, c, tm, rm, asdict(grid))
    if refine:
        c2, _, _ = scan(2)
        rep.refined_c_min = c2
        rep.relative_change = abs(c2 / c - 1)
    return rep


@dataclass
class DominanceReport:
    i: int
    constant: float
    refined_constant: float
    argmax_t: float
    argmax_r: float

    @property
    def relative_change(self) -> float:
        return abs(self.refined_constant / self.constant - 1)

    @property
    def passed(self) -> bool:
        return math.isfinite(self.constant) and self.relative_change < 0.05


def grigoryan_dominance(params: SpaceParams, i: int, grid: GridSpec,
                        kernel: HeatKernel | None = None) -> DominanceReport:
    """Smallest c with |d^i h_t(r)| <= c grigoryan_bound(i, t) on the grid and its 2x refinement."""
    kernel = kernel or get_kernel(params)

    def scan(ref):
        t, r = grid.grids(ref)
        la = kernel_log_grid(kernel, t, r, (i,))[0]
        ratio = la - np.log(grigoryan_bound(params, i, t))[:, None]
        idx = np.unravel_index(np.argmax(ratio), ratio.shape)
        return math.exp(ratio[idx]), float(t[idx[0]]), float(r[idx[1]])

    c, tm, rm = scan(1)
    c2, _, _ = scan(2)
    return DominanceReport(i, c, c2, tm, rm)


# ------------------------------------------------------ two-sided shapes

def log_anker_shape(params: SpaceParams, t, r):
    """log of t^{-3/2}(1+r)(1+(1+r)/t)^{(n-3)/2} e^{-(Q^2 t/4 + Q r/2 + r^2/4t)}."""
    n = params.n
    return (
        -1.5 * np.log(t) + np.log1p(r) + (n - 3) / 2 * np.log1p((1 + r) / t)
        - gaussian_exponent(params, t, r)
    )


def log_heat_upper_shape(params: SpaceParams, t, r):
    """log of t^{-n/2}(1+t)^{(n-3)/2}(1+r)^{(n-1)/2} e^{-(...)}."""
    n = params.n
    return (
        -n / 2 * np.log(t) + (n - 3) / 2 * np.log1p(t) + (n - 1) / 2 * np.log1p(r)
        - gaussian_exponent(params, t, r)
    )


def log_gradient_shape(params: SpaceParams, t, r):
    """log of t^{-(n+2)/2}(1+t)^{(n-1)/2}(1+r)^{(n-1)/2} e^{-(...)}."""
    n = params.n
    return (
        -(n + 2) / 2 * np.log(t) + (n - 1) / 2 * np.log1p(t) + (n - 1) / 2 * np.log1p(r)
        - gaussian_exponent(params, t, r)
    )


@dataclass
class BandReport:
    low: float
    high: float
    refined_low: float = float("nan")
    refined_high: float = float("nan")
    extra: dict = field(default_factory=dict)

    @property
    def band_ratio(self) -> float:
        return self.high / self.low if self.low > 0 else math.inf

    @property
    def drift(self) -> float:
        if not (self.low > 0 and self.refined_low > 0):
            return math.inf
        return max(abs(self.refined_low / self.low - 1), abs(self.refined_high / self.high - 1))


def band(log_values, log_shape) -> tuple[float, float]:
    ratio = np.exp(log_values - log_shape)
    return float(np.min(ratio)), float(np.max(ratio))


def two_sided_band(params: SpaceParams, grid: GridSpec, which: str = "heat",
                   kernel: HeatKernel | None = None) -> BandReport:
    """Min/max of oracle / shape over the grid and its 2x refinement.

    which="heat" compares h_t with the two-sided heat shape; which="gradient"
    compares |d/dr h_t| with the gradient shape.
    """
    kernel = kernel or get_kernel(params)

    def scan(ref):
        t, r = grid.grids(ref)
        if which == "heat":
            la = kernel_log_grid(kernel, t, r)[0]
            shape = log_anker_shape(params, t[:, None], r[None, :])
        elif which == "gradient":
            la = np.array([kernel.log_abs_gradient(float(s), r)[0] for s in t])
            shape = log_gradient_shape(params, t[:, None], r[None, :])
        else:
            raise ValueError(f"unknown band {which!r}")
        return band(la, shape)

    lo, hi = scan(1)
    lo2, hi2 = scan(2)
    return BandReport(lo, hi, lo2, hi2)

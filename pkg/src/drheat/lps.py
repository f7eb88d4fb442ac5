"""sigma-maximal kernels and the L^p integrability probe.

k_sigma(r) = sup_t e^{sigma t} t^i |d^i h_t(r)/dt^i| is computed by a
log-spaced scan in t followed by golden-section refinement. The sup is split
into a local piece (t < 1) and a global piece (t >= 1); the full kernel is
their pointwise maximum.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np
from scipy import optimize

from .bounds import BandReport
from .geometry import SpaceParams
from .heat import HeatKernel, get_kernel
from .spherical import phi_lambda

T_MIN = 1e-3
PER_DECADE = 64
GOLDEN_XTOL = 1e-7
PIECES = ("full", "local", "global")


class Flag(str, Enum):
    CONVERGENT = "CONVERGENT"
    DIVERGENT = "DIVERGENT"
    INDETERMINATE = "INDETERMINATE"


def t_max(r: float) -> float:
    """Upper end of the t-scan; the sup is reported divergent if it sits here."""
    return max(50.0, 10.0 * r)


def conjugate_exponent(p: float) -> float:
    if p <= 1:
        raise ValueError(f"p must exceed 1, got {p}")
    return p / (p - 1)


def sigma_threshold(Q: float, p: float) -> float:
    """Q^2 / (p p'), symmetric under p <-> p' and largest (Q^2/4) at p = 2."""
    return Q * Q / (p * conjugate_exponent(p))


# ------------------------------------------------------------ k_sigma

@dataclass
class MaximalKernelEval:
    r: float
    sigma: float
    i: int
    value: float
    t_star: float
    piece: str
    divergent: bool = False

    @property
    def log_value(self) -> float:
        return math.log(self.value) if self.value > 0 else -math.inf


def _log_weighted(kernel: HeatKernel, sigma: float, i: int, t: float, r) -> np.ndarray:
    la, _ = kernel.log_abs(t, r, (i,))
    return sigma * t + i * math.log(t) + la[0]


def _scan_piece(kernel, r, sigma, i, piece, per_decade):
    if piece == "local":
        lo, his = T_MIN, np.ones_like(r)
    else:
        lo, his = 1.0, np.array([t_max(x) for x in r])
    hi = float(his.max())
    npts = max(8, int(math.ceil(per_decade * math.log10(hi / lo)))) + 1
    t = np.geomspace(lo, hi, npts)
    G = np.full((npts, r.size), -np.inf)
    for j, tj in enumerate(t):
        live = tj <= his * (1 + 1e-12)
        if np.any(live):
            G[j, live] = _log_weighted(kernel, sigma, i, float(tj), r[live])

    # h_t decays like e^{-Q^2 t/4} at large t, so any larger sigma wins eventually
    beyond_gap = piece != "local" and sigma > kernel.params.Q ** 2 / 4
    out = []
    for c, rc in enumerate(r):
        col = G[:, c]
        last = int(np.searchsorted(t, his[c] * (1 + 1e-12))) - 1
        j = int(np.argmax(col[: last + 1]))
        if piece != "local" and (j == last or beyond_gap):
            # still rising at T_max: e^{sigma t} is not beaten by the kernel decay
            out.append(MaximalKernelEval(float(rc), sigma, i, math.inf, float(t[last]), piece, True))
            continue
        if piece == "local" and j == 0:
            # still rising as t -> 0: on-diagonal blow-up
            out.append(MaximalKernelEval(float(rc), sigma, i, math.inf, float(t[0]), piece, True))
            continue
        if j == 0 or j == last:
            out.append(MaximalKernelEval(float(rc), sigma, i, math.exp(col[j]), float(t[j]), piece))
            continue

        def neg(x, rc=rc):
            v = _log_weighted(kernel, sigma, i, math.exp(x), np.array([rc]))[0]
            return -v if np.isfinite(v) else math.inf

        x0, x1, x2 = np.log(t[j - 1]), np.log(t[j]), np.log(t[j + 1])
        res = optimize.minimize_scalar(
            neg, bracket=(x0, x1, x2), method="golden", options={"xtol": GOLDEN_XTOL}
        )
        best, tbest = (-res.fun, math.exp(res.x)) if -res.fun >= col[j] else (col[j], t[j])
        out.append(MaximalKernelEval(float(rc), sigma, i, math.exp(best), float(tbest), piece))
    return out


def k_sigma_profile(
    params: SpaceParams,
    r,
    sigma: float,
    i: int = 0,
    piece: str = "global",
    kernel: HeatKernel | None = None,
    per_decade: int = PER_DECADE,
) -> list[MaximalKernelEval]:
    """k_sigma at every radius in r (vectorized scan, per-radius refinement)."""
    if piece not in PIECES:
        raise ValueError(f"piece must be one of {PIECES}, got {piece!r}")
    if i < 0:
        raise ValueError("derivative order must be non-negative")
    kernel = kernel or get_kernel(params)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if piece != "full":
        return _scan_piece(kernel, r, sigma, i, piece, per_decade)
    loc = _scan_piece(kernel, r, sigma, i, "local", per_decade)
    glo = _scan_piece(kernel, r, sigma, i, "global", per_decade)
    out = []
    for a, b in zip(loc, glo):
        w = a if a.value >= b.value else b
        out.append(MaximalKernelEval(w.r, sigma, i, w.value, w.t_star, "full", a.divergent or b.divergent))
    return out


def k_sigma(params: SpaceParams, r: float, sigma: float, i: int = 0, piece: str = "full",
            kernel: HeatKernel | None = None) -> MaximalKernelEval:
    """sup over the chosen t-range of e^{sigma t} t^i |d^i h_t(r)/dt^i|."""
    return k_sigma_profile(params, [r], sigma, i, piece, kernel)[0]


def global_lemma_bound(params: SpaceParams, r, sigma: float, eps: float):
    """e^{-(1-eps) Q r/2} e^{-(1-eps) r sqrt(Q^2/4 - sigma/(1-eps))}."""
    if not 0 < eps < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {eps}")
    Q = params.Q
    disc = Q * Q / 4 - sigma / (1 - eps)
    if disc < 0:
        raise ValueError(f"sigma={sigma} must be below (1-eps) Q^2/4 = {(1 - eps) * Q * Q / 4}")
    r = np.asarray(r, dtype=float)
    return np.exp(-(1 - eps) * r * (Q / 2 + math.sqrt(disc)))


# ------------------------------------------------- spherical asymptotics

def spherical_asymptote(params: SpaceParams, p: float, r):
    """e^{-Q r/p'} for 1 <= p < 2 and (1+r) e^{-Q r/2} for p = 2."""
    if not 1 <= p <= 2:
        raise ValueError(f"p must lie in [1, 2], got {p}")
    r = np.asarray(r, dtype=float)
    Q = params.Q
    if p == 2:
        return (1 + r) * np.exp(-Q * r / 2)
    return np.exp(-Q * (1 - 1 / p) * r)


def spherical_band(params: SpaceParams, p: float, r_grid) -> BandReport:
    """Range of phi_{i(1/p - 1/2)Q}(r) / spherical_asymptote(p, r) on r_grid."""
    r_grid = np.asarray(r_grid, dtype=float)
    lam = 1j * (1 / p - 0.5) * params.Q
    ev = phi_lambda(params, lam, r_grid)
    ratio = ev.phi / spherical_asymptote(params, p, r_grid)
    return BandReport(float(ratio.min()), float(ratio.max()))


# -------------------------------------------------------- L^p probe

def analytic_exponent(Q: float, p: float, sigma: float, eps: float = 0.0) -> float:
    """Q/p - (1-2eps) Q/2 - (1-2eps) sqrt(Q^2/4 - sigma/(1-2eps)).

    Negative means the tail integral converges. A negative radicand means the
    t-sup itself is infinite, reported as +inf.
    """
    a = 1 - 2 * eps
    disc = Q * Q / 4 - sigma / a
    if disc < 0:
        return math.inf
    return Q / p - a * Q / 2 - a * math.sqrt(disc)


def analytic_flag(Q: float, p: float, sigma: float) -> Flag:
    """Sign of the exponent in the limit eps -> 0."""
    p = p if p <= 2 else conjugate_exponent(p)
    return Flag.CONVERGENT if analytic_exponent(Q, p, sigma) < 0 else Flag.DIVERGENT


@dataclass
class LpReport:
    p: float
    sigma: float
    threshold: float
    flag: str
    value: float
    partial_values: dict
    increment_ratio: float
    integrand: str
    analytic_exponent: float
    analytic_flag: str
    t_star_profile: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _gl_panels(a: float, b: float, width: float, order: int = 6):
    x, w = np.polynomial.legendre.leggauss(order)
    n = max(1, int(math.ceil((b - a) / width - 1e-9)))
    edges = np.linspace(a, b, n + 1)
    mid = (edges[:-1] + edges[1:]) / 2
    half = (edges[1:] - edges[:-1]) / 2
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def lp_integral(
    params: SpaceParams,
    p: float,
    sigma: float,
    i: int = 0,
    r_max: float = 40.0,
    integrand: str = "oracle",
    eps: float = 1e-3,
    kernel: HeatKernel | None = None,
) -> LpReport:
    """Integral of the global kernel against the spherical weight, with a growth test.

    Computes int_0^1 r^{n-1} k(r) dr + int_1^{R} e^{Q r/p} w(r) k(r) dr, where
    w = 1 + r at p = 2 and 1 otherwise, for R in {r_max/4, r_max/2, r_max}.
    The ratio of the last increment to the previous one decides the flag:
    below 0.9 CONVERGENT, above 1.1 DIVERGENT, else INDETERMINATE.
    integrand="oracle" uses the global sigma-maximal kernel; "lemma" uses the
    global_lemma_bound with the given eps; eps must be small for the
    10/20/40 increment test to resolve rates near the threshold. p > 2 is mapped to p' by duality.
    """
    if p <= 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if p > 2:
        p = conjugate_exponent(p)
    if integrand not in ("oracle", "lemma"):
        raise ValueError(f"integrand must be 'oracle' or 'lemma', got {integrand!r}")
    Q = params.Q
    thr = sigma_threshold(Q, p)
    marks = (r_max / 4, r_max / 2, r_max)
    r_in, w_in = _gl_panels(0.0, 1.0, 1.0, order=12)
    r_out, w_out = _gl_panels(1.0, r_max, 0.5)
    r_all = np.concatenate([r_in, r_out])
    profile: list = []
    if integrand == "oracle":
        evals = k_sigma_profile(params, r_all, sigma, i, "global", kernel)
        k = np.array([e.value for e in evals])
        divergent = any(e.divergent for e in evals)
        profile = [[e.r, e.t_star, e.value] for e in evals]
    else:
        try:
            k = global_lemma_bound(params, r_all, sigma, eps)
            divergent = False
        except ValueError:
            k = np.full(r_all.shape, math.inf)
            divergent = True

    a_exp = analytic_exponent(Q, p, sigma)
    a_flag = analytic_flag(Q, p, sigma).value
    if divergent:
        return LpReport(p, sigma, thr, Flag.DIVERGENT.value, math.inf,
                        {str(m): math.inf for m in marks}, math.inf, integrand, a_exp, a_flag, profile)

    k_in, k_out = k[: r_in.size], k[r_in.size:]
    inner = float(np.sum(w_in * r_in ** (params.n - 1) * k_in))
    weight = np.exp(Q * r_out / p) * ((1 + r_out) if p == 2 else 1.0)
    contrib = w_out * weight * k_out
    partial = {str(m): inner + float(np.sum(contrib[r_out <= m])) for m in marks}
    v = list(partial.values())
    inc1, inc2 = v[1] - v[0], v[2] - v[1]
    ratio = inc2 / inc1 if inc1 > 0 else math.inf
    if ratio < 0.9:
        flag = Flag.CONVERGENT
    elif ratio > 1.1:
        flag = Flag.DIVERGENT
    else:
        flag = Flag.INDETERMINATE
    return LpReport(p, sigma, thr, flag.value, v[-1], partial, ratio, integrand, a_exp, a_flag, profile)


def profile_csv(evals: list[MaximalKernelEval]) -> str:
    """CSV rows (r, sigma, i, piece, value, t_star, divergent) with 17 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "sigma", "i", "piece", "value", "t_star", "divergent"])
    for e in evals:
        w.writerow([f"{e.r:.17g}", f"{e.sigma:.17g}", e.i, e.piece,
                    f"{e.value:.17g}", f"{e.t_star:.17g}", int(e.divergent)])
    return buf.getvalue()

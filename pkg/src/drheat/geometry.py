"""The solvable group S = N x| R^+ and its ball model.

Elements are stored in solvable coordinates (X, Z, a). All maps accept batched
inputs: X of shape (..., m), Z of shape (..., k), a of shape (...).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special

from .htype import HTypeAlgebra, bracket, build_htype, j_map


@dataclass(frozen=True)
class SpaceParams:
    """Derived constants of the Damek-Ricci space built on an (m, k) H-type group."""

    m: int
    k: int

    def __post_init__(self):
        if self.m < 1 or self.k < 0:
            raise ValueError(f"invalid dimensions m={self.m}, k={self.k}")

    @property
    def n(self) -> int:
        return self.m + self.k + 1

    @property
    def Q(self) -> float:
        return self.m / 2 + self.k

    @property
    def jacobi_alpha(self) -> float:
        return (self.m + self.k - 1) / 2

    @property
    def jacobi_beta(self) -> float:
        return (self.k - 1) / 2

    @property
    def sphere_area(self) -> float:
        """Area of the unit sphere S^{n-1}; converts radial integrals to volume integrals."""
        n = self.n
        return 2 * math.pi ** (n / 2) / math.gamma(n / 2)

    @classmethod
    def from_algebra(cls, alg: HTypeAlgebra) -> "SpaceParams":
        return cls(alg.m, alg.k)


@dataclass(frozen=True)
class GroupElement:
    X: np.ndarray
    Z: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "X", np.asarray(self.X, dtype=float))
        object.__setattr__(self, "Z", np.asarray(self.Z, dtype=float))
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        if np.any(self.a <= 0):
            raise ValueError("group element requires a > 0")

    @classmethod
    def identity(cls, alg: HTypeAlgebra) -> "GroupElement":
        return cls(np.zeros(alg.m), np.zeros(alg.k), 1.0)


@dataclass(frozen=True)
class BallPoint:
    Xp: np.ndarray
    Zp: np.ndarray
    lp: np.ndarray

    @property
    def norm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.Xp**2, -1) + np.sum(self.Zp**2, -1) + self.lp**2)


def _check(alg: HTypeAlgebra, g: GroupElement):
    if g.X.shape[-1:] != (alg.m,) or g.Z.shape[-1:] != (alg.k,):
        raise ValueError(
            f"element dimensions (X: {g.X.shape}, Z: {g.Z.shape}) do not match m={alg.m}, k={alg.k}"
        )


def multiply(alg: HTypeAlgebra, g: GroupElement, h: GroupElement) -> GroupElement:
    """(X,Z,a)(X',Z',a') = (X + a^1/2 X', Z + a Z' + 1/2 a^1/2 [X,X'], a a')."""
    _check(alg, g)
    _check(alg, h)
    sa = np.sqrt(g.a)[..., None]
    X = g.X + sa * h.X
    Z = g.Z + g.a[..., None] * h.Z + 0.5 * sa * bracket(alg, g.X, h.X)
    return GroupElement(X, Z, g.a * h.a)


def inverse(alg: HTypeAlgebra, g: GroupElement) -> GroupElement:
    _check(alg, g)
    return GroupElement(-g.X / np.sqrt(g.a)[..., None], -g.Z / g.a[..., None], 1.0 / g.a)


def _cayley_parts(alg, g):
    X2 = np.sum(g.X**2, -1)
    Z2 = np.sum(g.Z**2, -1)
    s = 1 + g.a + X2 / 4
    D = s * s + Z2
    return X2, Z2, s, D


def cayley(alg: HTypeAlgebra, g: GroupElement) -> BallPoint:
    """Cayley transform of g onto the unit ball in s = v + z + R."""
    _check(alg, g)
    X2, Z2, s, D = _cayley_parts(alg, g)
    Xp = (s[..., None] * g.X - j_map(alg, g.Z, g.X)) / D[..., None]
    Zp = 2 * g.Z / D[..., None]
    lp = ((g.a + X2 / 4) ** 2 - 1 + Z2) / D
    return BallPoint(Xp, Zp, lp)


def distance_to_origin(alg: HTypeAlgebra, g: GroupElement) -> np.ndarray:
    """r = log((1+rho)/(1-rho)) with rho the ball-model norm of cayley(g)."""
    _, _, _, D = _cayley_parts(alg, g)
    rho = cayley(alg, g).norm
    # 1 - rho^2 = 4a/D exactly; avoids cancellation near the sphere
    return 2 * np.log1p(rho) - np.log(4 * g.a / D)


def distance(alg: HTypeAlgebra, g: GroupElement, h: GroupElement) -> np.ndarray:
    """Left-invariant geodesic distance d(g, h) = d(e, g^-1 h)."""
    return distance_to_origin(alg, multiply(alg, inverse(alg, g), h))


def volume_density(params: SpaceParams, r):
    """A(r) = 2^{m+k} sinh^{m+k}(r/2) cosh^k(r/2)."""
    r = np.asarray(r, dtype=float)
    mk = params.m + params.k
    return 2.0**mk * np.sinh(r / 2) ** mk * np.cosh(r / 2) ** params.k


def log_volume_density(params: SpaceParams, r):
    r = np.asarray(r, dtype=float)
    mk = params.m + params.k
    with np.errstate(divide="ignore"):
        return mk * np.log(2 * np.sinh(r / 2)) + params.k * np.log(np.cosh(r / 2))


def volume_log_derivative(params: SpaceParams, r):
    """A'(r)/A(r) = (m+k)/2 coth(r/2) + k/2 tanh(r/2)."""
    r = np.asarray(r, dtype=float)
    return 0.5 * (params.m + params.k) / np.tanh(r / 2) + 0.5 * params.k * np.tanh(r / 2)


def haar_density(params: SpaceParams, a):
    """Density of the left Haar measure against dX dZ da."""
    return np.asarray(a, dtype=float) ** (-params.Q - 1)


class QuadratureError(RuntimeError):
    pass


def radial_integral(
    params: SpaceParams,
    f: Callable[[float], float],
    r_max: float,
    rtol: float = 1e-9,
    points=None,
) -> tuple[float, float]:
    """Integrate f(r) A(r) dr over [0, r_max] by adaptive Gauss-Kronrod.

    Returns (value, abs_error_estimate). Multiply by ``params.sphere_area``
    to get the volume integral of the radial function f.
    """
    if r_max <= 0:
        return 0.0, 0.0

    def integrand(r):
        return f(r) * volume_density(params, r)

    pts = None if points is None else [p for p in points if 0 < p < r_max]
    val, err, info = integrate.quad(
        integrand, 0.0, r_max, epsabs=0.0, epsrel=rtol, limit=500, points=pts, full_output=1
    )[:3]
    if err > max(rtol * abs(val), 1e-300) * 10:
        raise QuadratureError(f"radial quadrature did not converge: value={val}, error={err}")
    return val, err


@dataclass
class MonteCarloResult:
    value: float
    stderr: float
    n: int
    seed: int


def haar_monte_carlo(
    alg: HTypeAlgebra,
    f: Callable[[GroupElement], np.ndarray],
    n: int = 200_000,
    seed: int = 0,
    x_scale: float = 2.0,
    z_scale: float = 2.0,
    log_a_box: float = 3.0,
    batch: int = 100_000,
) -> MonteCarloResult:
    """Importance-sampled estimate of the Haar integral of f.

    X, Z are drawn from isotropic Gaussians, log a uniformly from
    [-log_a_box, log_a_box]; samples are weighted by a^{-Q-1} times the inverse
    sampling density (in the variable a). f must vanish where log a leaves the box.
    """
    params = SpaceParams.from_algebra(alg)
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n:
        b = min(batch, n - done)
        X = rng.normal(scale=x_scale, size=(b, alg.m))
        Z = rng.normal(scale=z_scale, size=(b, alg.k))
        la = rng.uniform(-log_a_box, log_a_box, size=b)
        a = np.exp(la)
        log_q = (
            -0.5 * np.sum((X / x_scale) ** 2, -1) - alg.m * math.log(x_scale * math.sqrt(2 * math.pi))
            - 0.5 * np.sum((Z / z_scale) ** 2, -1) - alg.k * math.log(z_scale * math.sqrt(2 * math.pi))
            - math.log(2 * log_a_box)
        )
        # density in a: p(la) dla = p(la)/a da
        w = np.exp(-params.Q * la - log_q)
        vals = f(GroupElement(X, Z, a)) * w
        total += float(np.sum(vals))
        total_sq += float(np.sum(vals**2))
        done += b
    mean = total / n
    var = max(total_sq / n - mean**2, 0.0)
    return MonteCarloResult(mean, math.sqrt(var / n), n, seed)


def invariant_suite(m: int, k: int, samples: int = 1000, seed: int = 0) -> dict[str, float]:
    """Max defects of the H-type and group identities over random samples.

    Checks J_Z^2 = -|Z|^2 I, skew-symmetry, pairwise anticommutation,
    associativity, two-sided inverses, and symmetry of the distance. Group
    elements have |X|, |Z| <= 10 and a in [0.1, 10]; group defects are
    relative to max(1, |component|).
    """
    alg = build_htype(m, k)
    rng = np.random.default_rng(seed)
    defects = dict(alg.check())

    Z = rng.normal(size=(samples, k))
    X = rng.normal(size=(samples, m))
    JJX = j_map(alg, Z, j_map(alg, Z, X))
    defects["j_square"] = float(np.max(np.abs(JJX + np.sum(Z**2, -1)[:, None] * X), initial=0.0))

    def ball(dim):
        # uniform direction, radius uniform on [0, 10]
        v = rng.normal(size=(samples, dim))
        nrm = np.linalg.norm(v, axis=-1, keepdims=True)
        return v / np.where(nrm > 0, nrm, 1) * rng.uniform(0, 10, (samples, 1))

    def draw():
        return GroupElement(ball(m), ball(k), np.exp(rng.uniform(math.log(0.1), math.log(10), samples)))

    def gap(g, h):
        # componentwise error relative to max(1, |value|)
        def rel(u, v):
            return np.max(np.abs(u - v) / np.maximum(1.0, np.abs(v)), initial=0.0)
        return float(max(rel(g.X, h.X), rel(g.Z, h.Z), rel(g.a, h.a)))

    g, h, u = draw(), draw(), draw()
    e = GroupElement(np.zeros((samples, m)), np.zeros((samples, k)), np.ones(samples))
    defects["associativity"] = gap(multiply(alg, multiply(alg, g, h), u), multiply(alg, g, multiply(alg, h, u)))
    defects["inverse"] = max(gap(multiply(alg, g, inverse(alg, g)), e), gap(multiply(alg, inverse(alg, g), g), e))
    d1, d2 = distance(alg, g, h), distance(alg, h, g)
    defects["distance_symmetry"] = float(np.max(np.abs(d1 - d2) / np.maximum(1.0, d1)))
    return defects


__all__ = [
    "SpaceParams", "GroupElement", "BallPoint", "multiply", "inverse", "cayley",
    "distance", "distance_to_origin", "volume_density", "log_volume_density",
    "volume_log_derivative", "haar_density", "radial_integral", "haar_monte_carlo",
    "QuadratureError", "build_htype", "invariant_suite",
]

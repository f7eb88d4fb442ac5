"""Heisenberg-type Lie algebras n = v + z with explicit J_Z maps.

The maps J_1..J_k are realized as left multiplication by imaginary units of a
Cayley-Dickson algebra (complex numbers, quaternions, octonions) in the
minimal Clifford module dimension, extended by Bott periodicity for k >= 8
and by block-diagonal repetition to any feasible m.

Sign convention: for (m, k) = (2, 1), J_1 e_1 = +e_2.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# dimension of an irreducible real module of Cl_{0,k}, k = 0..7
_MIN_MODULE_DIM = (1, 2, 4, 4, 8, 8, 8, 8)


class InfeasibleDimensionError(ValueError):
    """No H-type structure exists for the requested (m, k)."""


def min_module_dim(k: int) -> int:
    """Smallest m admitting k anticommuting complex structures on R^m."""
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    q, rem = divmod(k, 8)
    return _MIN_MODULE_DIM[rem] * 16**q


def _cd_mult(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # Cayley-Dickson product (a,b)(c,d) = (ac - d* b, da + b c*)
    n = x.shape[0]
    if n == 1:
        return x * y
    h = n // 2
    a, b = x[:h], x[h:]
    c, d = y[:h], y[h:]
    return np.concatenate([
        _cd_mult(a, c) - _cd_mult(_cd_conj(d), b),
        _cd_mult(d, a) + _cd_mult(b, _cd_conj(c)),
    ])


def _cd_conj(x: np.ndarray) -> np.ndarray:
    out = -x.copy()
    out[0] = x[0]
    return out


@lru_cache(maxsize=None)
def _left_units(dim: int) -> tuple[np.ndarray, ...]:
    """Left multiplication matrices of e_1..e_{dim-1} in the dim-dimensional CD algebra."""
    eye = np.eye(dim)
    mats = []
    for u in range(1, dim):
        L = np.column_stack([_cd_mult(eye[u], eye[j]) for j in range(dim)])
        mats.append(L)
    return tuple(mats)


@lru_cache(maxsize=None)
def _irreducible_generators(k: int) -> tuple[np.ndarray, ...]:
    if k == 0:
        return ()
    if k < 8:
        d = _MIN_MODULE_DIM[k]
        return _left_units(d)[:k]
    # Bott periodicity: Cl_{k} (x) Cl_8 acting on R^d (x) R^16
    inner = _irreducible_generators(k - 8)
    oct_units = _left_units(8)
    sz = np.diag([1.0, -1.0])
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    F = [np.kron(E, sz) for E in oct_units] + [np.kron(np.eye(8), rot)]
    vol = np.eye(16)
    for f in F:
        vol = vol @ f
    d = min_module_dim(k - 8)
    outer = [np.kron(G, vol) for G in inner]
    outer += [np.kron(np.eye(d), f) for f in F]
    return tuple(outer)


@dataclass(frozen=True)
class HTypeAlgebra:
    """An H-type algebra with v = R^m, z = R^k and J[i] = J_{e_i}."""

    m: int
    k: int
    J: tuple[np.ndarray, ...]

    @property
    def J_stack(self) -> np.ndarray:
        """The J maps as a (k, m, m) array."""
        if self.k == 0:
            return np.zeros((0, self.m, self.m))
        return np.stack(self.J)

    def check(self, tol: float = 1e-12) -> dict[str, float]:
        """Max operator-norm defects of the defining identities."""
        eye = np.eye(self.m)
        skew = square = anti = 0.0
        for i, Ji in enumerate(self.J):
            skew = max(skew, np.linalg.norm(Ji + Ji.T, 2))
            square = max(square, np.linalg.norm(Ji @ Ji + eye, 2))
            for Jj in self.J[i + 1:]:
                anti = max(anti, np.linalg.norm(Ji @ Jj + Jj @ Ji, 2))
        return {"skew": skew, "square": square, "anticommute": anti}


def build_htype(m: int, k: int) -> HTypeAlgebra:
    """Construct an H-type algebra with dim v = m and dim z = k.

    Raises:
        InfeasibleDimensionError: if m is not a positive multiple of the
            minimal Clifford-module dimension for k.
    """
    if k < 0:
        raise InfeasibleDimensionError(f"k must be non-negative, got {k}")
    d = min_module_dim(k)
    if m < 1 or m % d:
        smallest = d * max(1, -(-m // d))
        raise InfeasibleDimensionError(
            f"no H-type structure with m={m}, k={k}: m must be a positive multiple "
            f"of {d}; smallest feasible m is {smallest}"
        )
    reps = m // d
    gens = _irreducible_generators(k)
    J = tuple(np.kron(np.eye(reps), G) for G in gens)
    alg = HTypeAlgebra(m=m, k=k, J=J)
    defects = alg.check()
    bad = {name: v for name, v in defects.items() if v > 1e-12}
    if bad:
        raise RuntimeError(f"internal construction failed for (m={m}, k={k}): {bad}")
    return alg


def _check_dims(alg: HTypeAlgebra, Z=None, X=None, Y=None):
    if Z is not None and np.shape(Z)[-1:] != (alg.k,):
        raise ValueError(f"Z must have trailing dimension k={alg.k}, got shape {np.shape(Z)}")
    for V in (X, Y):
        if V is not None and np.shape(V)[-1:] != (alg.m,):
            raise ValueError(f"vector in v must have trailing dimension m={alg.m}, got shape {np.shape(V)}")


def j_map(alg: HTypeAlgebra, Z, X) -> np.ndarray:
    """J_Z X = sum_i Z_i J_i X. Broadcasts over leading axes."""
    Z = np.asarray(Z, dtype=float)
    X = np.asarray(X, dtype=float)
    _check_dims(alg, Z=Z, X=X)
    if alg.k == 0:
        return np.zeros(np.broadcast_shapes(Z.shape[:-1], X.shape[:-1]) + (alg.m,))
    JX = np.einsum("iab,...b->...ia", alg.J_stack, X)
    return np.einsum("...i,...ia->...a", Z, JX)


def bracket(alg: HTypeAlgebra, X, Y) -> np.ndarray:
    """[X, Y] in z, componentwise [X, Y]_i = <J_i X, Y>."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    _check_dims(alg, X=X, Y=Y)
    if alg.k == 0:
        return np.zeros(np.broadcast_shapes(X.shape[:-1], Y.shape[:-1]) + (0,))
    return np.einsum("iab,...b,...a->...i", alg.J_stack, X, Y)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drheat.htype import InfeasibleDimensionError, bracket, build_htype, j_map, min_module_dim

FEASIBLE = [(1, 0), (2, 0), (2, 1), (4, 2), (4, 3), (8, 1), (8, 5), (8, 7), (16, 8), (32, 9), (12, 3)]


def test_min_module_dims():
    assert [min_module_dim(k) for k in range(10)] == [1, 2, 4, 4, 8, 8, 8, 8, 16, 32]
    assert min_module_dim(16) == 256


@pytest.mark.parametrize("m,k", FEASIBLE)
def test_defining_identities(m, k):
    alg = build_htype(m, k)
    assert len(alg.J) == k
    assert all(v <= 1e-12 for v in alg.check().values())


def test_abelian_case():
    alg = build_htype(2, 0)
    assert alg.J == ()
    assert bracket(alg, [1.0, 0.0], [0.0, 1.0]).shape == (0,)
    assert np.all(j_map(alg, np.zeros(0), [1.0, 2.0]) == 0)


def test_heisenberg_sign_convention():
    alg = build_htype(2, 1)
    np.testing.assert_array_equal(alg.J[0], [[0.0, -1.0], [1.0, 0.0]])
    np.testing.assert_allclose(j_map(alg, [1.0], [1.0, 0.0]), [0.0, 1.0])
    np.testing.assert_allclose(bracket(alg, [1.0, 0.0], [0.0, 1.0]), [1.0])


def test_quaternion_triple():
    I, J, K = build_htype(4, 3).J
    np.testing.assert_allclose(I @ J, K, atol=1e-15)
    np.testing.assert_allclose(J @ K, I, atol=1e-15)
    np.testing.assert_allclose(K @ I, J, atol=1e-15)


@pytest.mark.parametrize("m,k", [(3, 1), (4, 4), (16, 9), (0, 0)])
def test_infeasible_names_smallest_m(m, k):
    with pytest.raises(InfeasibleDimensionError, match="smallest feasible m is"):
        build_htype(m, k)


def test_infeasible_message_value():
    with pytest.raises(InfeasibleDimensionError, match="smallest feasible m is 8"):
        build_htype(6, 5)


def test_dimension_mismatch():
    alg = build_htype(4, 3)
    with pytest.raises(ValueError):
        j_map(alg, np.ones(2), np.ones(4))
    with pytest.raises(ValueError):
        bracket(alg, np.ones(4), np.ones(3))


alg_strategy = st.sampled_from(FEASIBLE).map(lambda mk: build_htype(*mk))


@settings(max_examples=60, deadline=None)
@given(alg=alg_strategy, seed=st.integers(0, 2**32 - 1))
def test_algebraic_properties(alg, seed):
    rng = np.random.default_rng(seed)
    Z, Z2 = rng.normal(size=(2, alg.k))
    X, Y = rng.normal(size=(2, alg.m))
    nz = np.linalg.norm(Z)
    # norm identity and J_Z^2 = -|Z|^2
    assert np.isclose(np.linalg.norm(j_map(alg, Z, X)), nz * np.linalg.norm(X), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(j_map(alg, Z, j_map(alg, Z, X)), -nz**2 * X, atol=1e-12 * (1 + nz**2) * np.linalg.norm(X))
    # adjunction <J_Z X, Y> = <Z, [X, Y]>
    assert np.isclose(j_map(alg, Z, X) @ Y, Z @ bracket(alg, X, Y), atol=1e-12 * (1 + nz) * np.linalg.norm(X) * np.linalg.norm(Y))
    # antisymmetry
    np.testing.assert_allclose(bracket(alg, X, Y), -bracket(alg, Y, X), atol=1e-12)
    np.testing.assert_allclose(bracket(alg, X, X), 0, atol=1e-12)
    # polarized anticommutation
    lhs = j_map(alg, Z, j_map(alg, Z2, X)) + j_map(alg, Z2, j_map(alg, Z, X))
    np.testing.assert_allclose(lhs, -2 * (Z @ Z2) * X, atol=1e-11 * (1 + nz * np.linalg.norm(Z2)) * np.linalg.norm(X))


@settings(max_examples=30, deadline=None)
@given(alg=alg_strategy, seed=st.integers(0, 2**32 - 1), s=st.floats(-3, 3), u=st.floats(-3, 3))
def test_bilinearity(alg, seed, s, u):
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=alg.k)
    X, Y = rng.normal(size=(2, alg.m))
    np.testing.assert_allclose(j_map(alg, Z, s * X + u * Y), s * j_map(alg, Z, X) + u * j_map(alg, Z, Y), atol=1e-11)
    np.testing.assert_allclose(j_map(alg, np.zeros(alg.k), X), 0)


def test_batched_j_map_matches_loop():
    alg = build_htype(8, 5)
    rng = np.random.default_rng(1)
    Z = rng.normal(size=(7, 5))
    X = rng.normal(size=(7, 8))
    batched = j_map(alg, Z, X)
    for b in range(7):
        np.testing.assert_allclose(batched[b], sum(Z[b, i] * alg.J[i] @ X[b] for i in range(5)), atol=1e-14)

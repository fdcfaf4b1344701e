import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from cssd.errors import InputError, SizeError
from cssd.tensor import kronecker, mode_product, spectral_norm, svd_reduced, unvec, vec


def brute_kron(A, B):
    pA, nA = A.shape
    pB, nB = B.shape
    out = np.zeros((pA * pB, nA * nB))
    for i in range(pA):
        for j in range(nA):
            for k in range(pB):
                for l in range(nB):
                    out[i * pB + k, j * nB + l] = A[i, j] * B[k, l]
    return out


def test_svd_identity():
    res = svd_reduced(np.eye(3))
    np.testing.assert_allclose(res.s, [1, 1, 1])
    np.testing.assert_allclose(np.abs(res.U), np.eye(3))
    np.testing.assert_allclose(res.U @ np.diag(res.s) @ res.V.T, np.eye(3), atol=1e-14)


def test_svd_column_vector():
    res = svd_reduced(np.array([[3.0], [4.0]]))
    np.testing.assert_allclose(res.s, [5.0])
    np.testing.assert_allclose(np.abs(res.U[:, 0]), [0.6, 0.8])


def test_svd_drops_null_directions():
    M = np.outer([1.0, 2.0, 3.0], [1.0, -1.0])
    res = svd_reduced(M)
    assert res.rank == 1


def test_svd_rejects_nonfinite():
    with pytest.raises(InputError):
        svd_reduced(np.array([[1.0, np.nan]]))


@pytest.mark.parametrize("seed", range(100))
def test_svd_invariants_random(seed):
    g = np.random.default_rng(seed)
    n, r = g.integers(1, 12, size=2)
    M = g.standard_normal((n, r)) * 10.0 ** g.uniform(-3, 3)
    res = svd_reduced(M)
    k = res.rank
    np.testing.assert_allclose(res.U.T @ res.U, np.eye(k), atol=1e-8)
    np.testing.assert_allclose(res.V.T @ res.V, np.eye(k), atol=1e-8)
    assert np.all(np.diff(res.s) <= 0)
    err = np.linalg.norm(res.U @ np.diag(res.s) @ res.V.T - M) / np.linalg.norm(M)
    assert err <= 1e-8


def test_svd_8x3_reconstruction(rng):
    M = rng.standard_normal((8, 3))
    res = svd_reduced(M)
    assert np.linalg.norm(res.U * res.s @ res.V.T - M) / np.linalg.norm(M) <= 1e-8


def test_spectral_norm_examples(rng):
    assert spectral_norm(np.diag([3.0, 1.0])) == pytest.approx(3.0)
    assert spectral_norm(np.zeros((3, 2))) == 0.0
    M = rng.standard_normal((5, 4))
    assert spectral_norm(M) == pytest.approx(svd_reduced(M).s[0], rel=1e-8)


@given(arrays(np.float64, st.tuples(st.integers(1, 7), st.integers(1, 7)), elements=st.floats(-1e3, 1e3)))
def test_spectral_norm_below_frobenius(M):
    # rescale so the squared entries of tiny matrices do not underflow
    peak = np.abs(M).max()
    frob = peak * np.linalg.norm(M / peak) if peak > 0 else 0.0
    assert spectral_norm(M) <= frob * (1 + 1e-12)


def test_kronecker_trivial(rng):
    np.testing.assert_array_equal(kronecker(np.eye(2), np.eye(3)), np.eye(6))
    B = rng.standard_normal((2, 3))
    np.testing.assert_allclose(kronecker(np.array([[2.0]]), B), 2 * B)


def test_kronecker_matches_block_definition(rng):
    A = rng.standard_normal((2, 2))
    B = rng.standard_normal((2, 2))
    np.testing.assert_allclose(kronecker(A, B), brute_kron(A, B), atol=1e-15)
    A = rng.standard_normal((3, 2))
    B = rng.standard_normal((2, 4))
    np.testing.assert_allclose(kronecker(A, B), brute_kron(A, B), atol=1e-15)


def test_kronecker_size_cap():
    with pytest.raises(SizeError):
        kronecker(np.ones((100, 100)), np.ones((100, 100)), max_entries=10**7)


def test_mode_product_identity(rng):
    T = rng.standard_normal((3, 4, 2))
    for mode, n in enumerate(T.shape):
        np.testing.assert_array_equal(mode_product(T, np.eye(n), mode), T)


def test_mode_products_equal_matrix_sandwich(rng):
    X = rng.standard_normal((2, 2))
    A = rng.standard_normal((3, 2))
    C = rng.standard_normal((5, 2))
    out = mode_product(mode_product(X, A, 0), C, 1)
    np.testing.assert_allclose(out, A @ X @ C.T, atol=1e-14)


def test_mode_product_shape_and_mismatch(rng):
    T = rng.standard_normal((3, 4, 5))
    assert mode_product(T, rng.standard_normal((7, 4)), 1).shape == (3, 7, 5)
    with pytest.raises(InputError):
        mode_product(T, rng.standard_normal((7, 3)), 1)


@pytest.mark.parametrize("seed", range(100))
def test_kronecker_vectorization_identity(seed):
    g = np.random.default_rng(seed)
    A1 = g.standard_normal((3, 4))
    A2 = g.standard_normal((2, 5))
    X = g.standard_normal((4, 5))
    lhs = vec(mode_product(mode_product(X, A1, 0), A2, 1))
    rhs = brute_kron(A2, A1) @ vec(X)
    assert np.linalg.norm(lhs - rhs) <= 1e-10


def test_vec_column_major_and_inverse(rng):
    X = np.arange(6.0).reshape(2, 3)
    np.testing.assert_array_equal(vec(X), [0, 3, 1, 4, 2, 5])
    np.testing.assert_array_equal(unvec(vec(X), (2, 3)), X)
    A = rng.standard_normal((3, 2))
    C = rng.standard_normal((4, 3))
    np.testing.assert_allclose(vec(A @ X @ C.T), np.kron(C, A) @ vec(X), atol=1e-12)

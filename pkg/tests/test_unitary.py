import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synvolution.numeric import DomainError, Rng, ShapeError
from synvolution.unitary import (DhhpParams, ScanCoeffs, apply_hessenberg_lower, apply_hessenberg_upper,
                                 conj_transpose_coeffs, dhhp_dense_matrix, dhhp_forward, dhhp_inverse,
                                 fit_unitary_target, givens_coeffs, init_dhhp, pscan, pscan_forward,
                                 stride_permute)


def crandn(rng, shape):
    return rng.normal(shape) + 1j * rng.normal(shape)


def sequential_scan(A, X, Y0):
    Y = np.zeros_like(X)
    prev = Y0
    for t in range(X.shape[1]):
        prev = A[:, t, None] * prev + X[:, t]
        Y[:, t] = prev
    return Y


def random_chain(rng, n):
    return givens_coeffs(*(rng.uniform(0, 2 * np.pi, n - 1) for _ in range(3)))


# -- scan ------------------------------------------------------------------

def test_pscan_prefix_sum():
    out = pscan(np.ones((1, 3)), np.array([[[1.0], [2.0], [3.0]]]) + 0j, np.zeros((1, 1), complex))
    np.testing.assert_allclose(out.ravel(), [1, 3, 6])


def test_pscan_zero_coefficients_forget_history():
    out = pscan(np.zeros((1, 2)) + 0j, np.array([[[5.0], [7.0]]]) + 0j, np.full((1, 1), 9.0 + 0j))
    np.testing.assert_allclose(out.ravel(), [5, 7])


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 13, 31, 64])
def test_pscan_matches_sequential(n):
    rng = Rng(n)
    A, X, Y0 = crandn(rng, (2, n)), crandn(rng, (2, n, 3)), crandn(rng, (2, 3))
    assert np.max(np.abs(pscan(A, X, Y0) - sequential_scan(A, X, Y0))) < 1e-12


def test_scan_coeffs_shape_check():
    with pytest.raises(ShapeError):
        pscan_forward(ScanCoeffs(np.zeros((1, 3)), np.zeros((1, 4, 1)), np.zeros((1, 1))))


# -- Givens blocks ---------------------------------------------------------

def test_givens_examples():
    z = np.zeros(1)
    np.testing.assert_allclose(givens_coeffs(z, z, z).blocks()[0], np.eye(2), atol=1e-15)
    rot = givens_coeffs(z, z, np.array([np.pi])).blocks()[0]
    np.testing.assert_allclose(rot, [[0, -1], [1, 0]], atol=1e-15)
    ct = conj_transpose_coeffs(givens_coeffs(z, z, np.array([np.pi]))).blocks()[0]
    np.testing.assert_allclose(ct, [[0, 1], [-1, 0]], atol=1e-15)


def test_random_blocks_unitary(rng):
    B = random_chain(rng, 20).blocks()
    err = np.einsum("kji,kjl->kil", B.conj(), B) - np.eye(2)
    assert np.max(np.abs(err)) < 1e-12
    c = B[:, 1, 1]
    s = B[:, 1, 0].conj()
    np.testing.assert_allclose(np.abs(c) ** 2 + np.abs(s) ** 2, 1.0, atol=1e-12)


def test_blocks_regenerate_from_angles(rng):
    a, b, g = (rng.uniform(0, 2 * np.pi, 4) for _ in range(3))
    c = np.exp(1j * (a + b) / 2) * np.cos(g / 2)
    s = np.exp(1j * (a - b) / 2) * np.sin(g / 2)
    B = givens_coeffs(a, b, g).blocks()
    np.testing.assert_allclose(B[:, 0, 0], c.conj(), atol=1e-15)
    np.testing.assert_allclose(B[:, 0, 1], -s, atol=1e-15)
    np.testing.assert_allclose(B[:, 1, 0], s.conj(), atol=1e-15)
    np.testing.assert_allclose(B[:, 1, 1], c, atol=1e-15)


def dense_upper(chain, n):
    H = np.eye(n, dtype=complex)
    for j, blk in enumerate(chain.blocks()):
        G = np.eye(n, dtype=complex)
        G[j:j + 2, j:j + 2] = blk
        H = H @ G
    return H


def dense_lower(chain, n):
    H = np.eye(n, dtype=complex)
    for j, blk in enumerate(chain.blocks()):
        G = np.eye(n, dtype=complex)
        G[j:j + 2, j:j + 2] = blk
        H = G @ H
    return H


def test_hessenberg_identity_chain(rng):
    z = np.zeros(4)
    x = crandn(rng, 5)
    np.testing.assert_allclose(apply_hessenberg_upper(givens_coeffs(z, z, z), x), x)
    np.testing.assert_allclose(apply_hessenberg_lower(givens_coeffs(z, z, z), x), x)


@pytest.mark.parametrize("n", [2, 3, 4, 7])
def test_hessenberg_against_dense(n):
    rng = Rng(n)
    chain = random_chain(rng, n)
    x = crandn(rng, (n, 2))
    assert np.max(np.abs(apply_hessenberg_upper(chain, x) - dense_upper(chain, n) @ x)) < 1e-11
    assert np.max(np.abs(apply_hessenberg_lower(chain, x) - dense_lower(chain, n) @ x)) < 1e-11
    assert abs(np.linalg.norm(apply_hessenberg_upper(chain, x)) - np.linalg.norm(x)) < 1e-11


def test_chain_round_trip(rng):
    chain = random_chain(rng, 9)
    x = crandn(rng, 9)
    back = apply_hessenberg_lower(conj_transpose_coeffs(chain), apply_hessenberg_upper(chain, x))
    assert np.max(np.abs(back - x)) < 1e-12


# -- permutation -----------------------------------------------------------

def test_stride_permute_examples():
    x = np.array(list("abcd"), dtype=object)
    np.testing.assert_array_equal(stride_permute(np.arange(4.0), 1), np.arange(4.0))
    assert list(stride_permute(x, 2)) == list("acbd")
    with pytest.raises(DomainError):
        stride_permute(np.arange(12.0), 5)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([(6, 2), (6, 3), (8, 4), (9, 3), (12, 6), (16, 8)]), st.integers(0, 1000))
def test_stride_permute_bijection(nm, seed):
    n, m = nm
    x = Rng(seed).normal(n)
    np.testing.assert_array_equal(stride_permute(stride_permute(x, m), m, inverse=True), x)


# -- full transform --------------------------------------------------------

def test_identity_params():
    x = crandn(Rng(0), (6, 2))
    p = DhhpParams.identity(6)
    np.testing.assert_allclose(dhhp_forward(p, x), x, atol=1e-15)
    np.testing.assert_allclose(dhhp_inverse(p, x), x, atol=1e-15)
    np.testing.assert_allclose(dhhp_dense_matrix(p), np.eye(6), atol=1e-15)


@pytest.mark.parametrize("n,m", [(1, 1), (2, 1), (5, 1), (8, 2), (12, 4), (16, 1), (33, 1), (64, 4)])
def test_forward_inverse_dense(n, m):
    rng = Rng(100 + n)
    p = init_dhhp(n, rng, m)
    x = crandn(rng, (n, 3))
    phi = dhhp_dense_matrix(p)
    y = dhhp_forward(p, x)
    assert np.max(np.abs(y - phi @ x)) < 1e-10
    assert np.max(np.abs(dhhp_inverse(p, x) - phi.conj().T @ x)) < 1e-10
    assert np.max(np.abs(dhhp_inverse(p, y) - x)) < 1e-10
    assert np.linalg.norm(phi @ phi.conj().T - np.eye(n)) < 1e-10
    np.testing.assert_allclose(np.linalg.norm(phi, axis=0), 1.0, atol=1e-11)


def test_batched_input_shape(rng):
    p = init_dhhp(8, rng)
    x = crandn(rng, (3, 8, 2))
    y = dhhp_forward(p, x)
    assert y.shape == x.shape
    np.testing.assert_allclose(y[1], dhhp_forward(p, x[1]), atol=1e-13)
    with pytest.raises(ShapeError):
        dhhp_forward(p, crandn(rng, 7))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 200), st.integers(0, 2**31))
def test_norm_preserved(n, seed):
    rng = Rng(seed)
    p = init_dhhp(n, rng)
    x = crandn(rng, n)
    assert abs(np.linalg.norm(dhhp_forward(p, x)) / np.linalg.norm(x) - 1) < 1e-10


def test_fit_identity_and_two_point_dft():
    _, res = fit_unitary_target(np.eye(3), iters=10)
    assert res < 1e-9
    dft2 = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    p, res = fit_unitary_target(dft2, iters=5000)
    assert res < 1e-3
    assert np.linalg.norm(dhhp_dense_matrix(p) - dft2) == pytest.approx(res, abs=1e-12)


def test_fit_rejects_non_unitary():
    with pytest.raises(DomainError):
        fit_unitary_target(np.ones((2, 2)))

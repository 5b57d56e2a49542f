import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcqr.core_math import (RngStream, check_spd, cholesky, mahalanobis_matrix_norm,
                            psd_sqrt, toeplitz_cov)
from mcqr.errors import DimensionError, InvalidMatrix, NotPositiveDefinite

from conftest import random_spd


def test_psd_sqrt_identity():
    assert np.allclose(psd_sqrt(np.eye(3)), np.eye(3), atol=1e-14)


def test_psd_sqrt_diagonal():
    assert np.allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)


def test_psd_sqrt_reconstructs_two_by_two():
    M = np.array([[2.0, 1.0], [1.0, 2.0]])
    S = psd_sqrt(M)
    # eigen oracle: eigenvalues 3 and 1 with eigenvectors (1, 1) and (1, -1)
    expected = 0.5 * np.array([[np.sqrt(3) + 1, np.sqrt(3) - 1],
                               [np.sqrt(3) - 1, np.sqrt(3) + 1]])
    assert np.allclose(S, expected, atol=1e-14)
    assert np.linalg.norm(S @ S - M) <= 1e-12 * np.linalg.norm(M)


def test_psd_sqrt_rejects_asymmetric():
    with pytest.raises(InvalidMatrix):
        psd_sqrt(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_psd_sqrt_rejects_negative_definite():
    with pytest.raises(InvalidMatrix):
        psd_sqrt(-np.eye(2))


def test_psd_sqrt_clamps_roundoff_negative_eigenvalue():
    v = np.array([1.0, -1.0]) / np.sqrt(2)
    M = np.outer([1.0, 1.0], [1.0, 1.0]) - 1e-14 * np.outer(v, v)
    S = psd_sqrt(M)
    assert np.all(np.isfinite(S))
    assert np.linalg.norm(S @ S - M) <= 1e-8 * np.linalg.norm(M)


def test_check_spd_non_square():
    with pytest.raises(DimensionError):
        check_spd(np.ones((2, 3)))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
def test_psd_sqrt_squares_back(d, seed):
    M = random_spd(np.random.default_rng(seed), d)
    S = psd_sqrt(M)
    assert np.linalg.norm(S @ S - M) <= 1e-8 * np.linalg.norm(M)


def test_mahalanobis_identity_is_frobenius():
    A = np.arange(6.0).reshape(2, 3)
    assert mahalanobis_matrix_norm(A, np.eye(3)) == pytest.approx(np.linalg.norm(A), rel=1e-14)


def test_mahalanobis_zero():
    assert mahalanobis_matrix_norm(np.zeros((2, 2)), np.eye(2)) == 0.0


def test_mahalanobis_direct():
    assert mahalanobis_matrix_norm(np.eye(2), np.diag([4.0, 1.0])) == pytest.approx(np.sqrt(5))


def test_mahalanobis_dimension_mismatch():
    with pytest.raises(DimensionError):
        mahalanobis_matrix_norm(np.ones((2, 3)), np.eye(2))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5), st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_mahalanobis_matches_sqrt_route(d, p, seed):
    gen = np.random.default_rng(seed)
    A = gen.standard_normal((d, p))
    S = random_spd(gen, p)
    ref = np.linalg.norm(A @ psd_sqrt(S))
    assert mahalanobis_matrix_norm(A, S) == pytest.approx(ref, rel=1e-10)


def test_cholesky_examples():
    assert np.allclose(cholesky(np.eye(3)), np.eye(3))
    assert np.allclose(cholesky(np.array([[4.0]])), [[2.0]])
    T = np.array([[1.0, 0.5], [0.5, 1.0]])
    L = cholesky(T)
    assert np.allclose(np.triu(L, 1), 0.0)
    assert np.linalg.norm(L @ L.T - T) <= 1e-12


def test_cholesky_not_pd():
    with pytest.raises(NotPositiveDefinite):
        cholesky(np.array([[1.0, 1.0], [1.0, 1.0]]))


def test_toeplitz():
    assert np.allclose(toeplitz_cov(2), [[1.0, 0.5], [0.5, 1.0]])
    for p in range(1, 65):
        cholesky(toeplitz_cov(p))


def test_rng_stream_determinism():
    a = RngStream(7, 3).standard_normal(10_000)
    b = RngStream(7, 3).standard_normal(10_000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, RngStream(7, 4).standard_normal(10_000))


def test_rng_stream_derive():
    s = RngStream(1)
    assert np.array_equal(s.derive("x", 2).random(5), RngStream(1).derive("x", 2).random(5))
    assert not np.array_equal(s.derive("x", 2).random(5), s.derive("x", 3).random(5))

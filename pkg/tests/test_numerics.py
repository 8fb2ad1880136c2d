"""Kernel tests: hand-computed values plus the documented invariants."""

import numpy as np
import pytest

from jdda.numerics import (
    centered_covariance,
    frobenius_sq,
    masked_sum,
    pairwise_euclidean,
)


def test_pairwise_345_triangle():
    # rows (0,0) and (3,4) are Euclidean distance 5 apart
    h = np.array([[0.0, 0.0], [3.0, 4.0]])
    d = pairwise_euclidean(h)
    assert np.allclose(d, [[0.0, 5.0], [5.0, 0.0]], atol=1e-12)
    d2 = pairwise_euclidean(h, squared=True)
    assert np.allclose(d2, [[0.0, 25.0], [25.0, 0.0]], atol=1e-12)


def test_pairwise_symmetry_and_diagonal_exact():
    rng = np.random.default_rng(11)
    for _ in range(20):
        h = rng.normal(size=(rng.integers(2, 30), rng.integers(1, 8)))
        d = pairwise_euclidean(h)
        assert np.array_equal(d, d.T)
        assert np.all(np.diag(d) == 0.0)
        assert np.all(d >= 0.0)


def test_pairwise_squared_matches_square():
    rng = np.random.default_rng(12)
    for _ in range(10):
        h = rng.normal(size=(15, 4))
        d = pairwise_euclidean(h)
        d2 = pairwise_euclidean(h, squared=True)
        assert np.allclose(d * d, d2, rtol=1e-10, atol=1e-12)


def test_pairwise_translation_invariance():
    rng = np.random.default_rng(13)
    for _ in range(10):
        h = rng.normal(size=(12, 5))
        shift = rng.normal(size=(1, 5)) * 10.0
        assert np.allclose(
            pairwise_euclidean(h), pairwise_euclidean(h + shift),
            rtol=1e-8, atol=1e-8,
        )


def test_pairwise_matches_direct_norms():
    rng = np.random.default_rng(14)
    h = rng.normal(size=(9, 3))
    d = pairwise_euclidean(h)
    for i in range(9):
        for j in range(9):
            assert d[i, j] == pytest.approx(
                np.linalg.norm(h[i] - h[j]), rel=1e-10, abs=1e-10
            )


def test_pairwise_duplicate_rows_zero():
    h = np.array([[1.0, 2.0], [1.0, 2.0], [4.0, 6.0]])
    d = pairwise_euclidean(h)
    assert d[0, 1] == 0.0 and d[1, 0] == 0.0


def test_covariance_identity_rows():
    # rows of I2 have column means (0.5, 0.5); Hc.T @ Hc works out to
    # [[0.5, -0.5], [-0.5, 0.5]]
    cov = centered_covariance(np.eye(2))
    assert np.allclose(cov, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-12)


def test_covariance_symmetric_and_psd():
    rng = np.random.default_rng(21)
    for _ in range(20):
        h = rng.normal(size=(rng.integers(2, 40), rng.integers(1, 10)))
        cov = centered_covariance(h)
        assert np.array_equal(cov, cov.T)
        for _ in range(5):
            x = rng.normal(size=cov.shape[0])
            q = x @ cov @ x
            assert q >= -1e-9 * (x @ x)


def test_covariance_translation_invariance():
    rng = np.random.default_rng(22)
    for _ in range(10):
        h = rng.normal(size=(18, 6))
        shift = rng.normal(size=(1, 6)) * 25.0
        assert np.allclose(
            centered_covariance(h), centered_covariance(h + shift),
            rtol=1e-8, atol=1e-6,
        )


def test_covariance_single_row_is_zero():
    cov = centered_covariance(np.array([[3.0, -7.0, 2.0]]))
    assert np.array_equal(cov, np.zeros((3, 3)))


def test_frobenius_sq_small_matrix():
    assert frobenius_sq(np.array([[1.0, 2.0], [3.0, 4.0]])) == pytest.approx(30.0)


def test_frobenius_sq_equals_masked_sum_of_squares():
    rng = np.random.default_rng(31)
    for _ in range(10):
        a = rng.normal(size=(rng.integers(1, 12), rng.integers(1, 12)))
        lhs = frobenius_sq(a)
        rhs = masked_sum(a * a, np.ones_like(a))
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_masked_sum_off_diagonal():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    mask = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert masked_sum(a, mask) == pytest.approx(5.0)


def test_masked_sum_shape_mismatch():
    with pytest.raises(ValueError):
        masked_sum(np.ones((2, 2)), np.ones((2, 3)))


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        pairwise_euclidean(np.array([[np.nan, 0.0]]))
    with pytest.raises(ValueError):
        centered_covariance(np.array([[np.inf, 0.0]]))


def test_wrong_ndim_rejected():
    with pytest.raises(ValueError):
        pairwise_euclidean(np.zeros(3))
    with pytest.raises(ValueError):
        frobenius_sq(np.zeros((2, 2, 2)))

import numpy as np
import pytest

from drivead.errors import NotPositiveDefiniteError, NumericError
from drivead.numeric import (SeededRng, assert_finite, cholesky, matmul,
                             relu, sigmoid, softmax, solve_spd, tanh)


def test_matmul_matches_triple_loop_oracle():
    rng = SeededRng(0)
    a = rng.normal(size=(7, 5))
    b = rng.normal(size=(5, 3))
    out = matmul(a, b)
    expect = np.zeros((7, 3))
    for i in range(7):
        for j in range(3):
            for k in range(5):
                expect[i, j] += a[i, k] * b[k, j]
    assert np.allclose(out, expect, atol=1e-6)


def test_matmul_shape_mismatch_raises():
    with pytest.raises(ValueError):
        matmul(np.zeros((2, 3)), np.zeros((4, 2)))


def test_cholesky_hand_factorization():
    f = cholesky(np.array([[4.0, 2.0], [2.0, 3.0]]))
    assert np.allclose(f.lower, [[2.0, 0.0], [1.0, np.sqrt(2.0)]], atol=1e-5)
    assert np.allclose(f.reconstruct(), [[4.0, 2.0], [2.0, 3.0]])


def test_cholesky_reconstructs_random_spd():
    rng = SeededRng(1)
    a = rng.normal(size=(6, 6))
    m = a.T @ a + np.eye(6)
    f = cholesky(m)
    assert np.abs(f.reconstruct() - m).max() < 1e-5


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotPositiveDefiniteError):
        cholesky(np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_cholesky_rejects_nonsquare_and_asymmetric():
    with pytest.raises(ValueError):
        cholesky(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        cholesky(np.array([[1.0, 5.0], [0.0, 1.0]]))


def test_solve_spd_residual():
    rng = SeededRng(2)
    a = rng.normal(size=(8, 8))
    m = a.T @ a + np.eye(8)
    b = rng.normal(size=8)
    x = solve_spd(cholesky(m), b)
    assert np.abs(m @ x - b).max() < 1e-5


def test_softmax_direct_evaluation():
    out = softmax(np.array([1.0, 2.0, 3.0]))
    assert np.allclose(out, [0.09003, 0.24473, 0.66524], atol=1e-5)
    assert abs(out.sum() - 1.0) < 1e-12


def test_softmax_is_shift_stable():
    v = np.array([1000.0, 1001.0, 1002.0])
    assert np.allclose(softmax(v), softmax(v - 1000.0))
    assert np.all(np.isfinite(softmax(v)))


def test_activations_reference_points():
    assert abs(sigmoid(0.0) - 0.5) < 1e-12
    assert abs(tanh(0.0)) < 1e-12
    assert relu(-3.0) == 0.0 and relu(2.5) == 2.5


def test_seeded_rng_reproducible_and_distinct():
    a = SeededRng(42).normal(size=100)
    b = SeededRng(42).normal(size=100)
    c = SeededRng(43).normal(size=100)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_seeded_rng_spawn_is_deterministic():
    a = SeededRng(7).spawn().normal(size=10)
    b = SeededRng(7).spawn().normal(size=10)
    assert np.array_equal(a, b)


def test_assert_finite():
    assert_finite(np.ones(3))
    with pytest.raises(NumericError):
        assert_finite(np.array([1.0, np.nan]))
    with pytest.raises(NumericError):
        assert_finite(np.array([np.inf]))

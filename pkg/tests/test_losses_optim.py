import numpy as np
import pytest

import drivead.nn.autodiff as ad
from drivead.nn.layers import Param, Tape
from drivead.nn.losses import (class_weights, l2_regularization, mse_loss,
                               weighted_cross_entropy)
from drivead.nn.optim import Adam, clip_global_norm
from drivead.numeric import SeededRng


def test_mse_matches_direct_summation():
    rng = SeededRng(0)
    pred = rng.normal(size=(3, 5))
    target = rng.normal(size=(3, 5))
    loss = mse_loss(ad.Tensor(pred), target)
    assert abs(float(loss.value) - np.mean((pred - target) ** 2)) < 1e-7


def test_weighted_cross_entropy_uniform_logits():
    # uniform logits over 2 classes with unit weights -> ln 2 per step
    logits = np.zeros((4, 2))
    targets = np.array([0, 1, 0, 1])
    loss = weighted_cross_entropy(ad.Tensor(logits), targets, np.ones(2))
    assert abs(float(loss.value) - np.log(2.0)) < 1e-6


def test_weighted_cross_entropy_applies_target_weight():
    logits = np.zeros((2, 3))
    loss = weighted_cross_entropy(ad.Tensor(logits), np.array([1, 1]),
                                  np.array([1.0, 4.0, 1.0]))
    assert abs(float(loss.value) - 4.0 * np.log(3.0)) < 1e-6


def test_weighted_cross_entropy_rejects_out_of_range_targets():
    with pytest.raises(Exception):
        weighted_cross_entropy(ad.Tensor(np.zeros((2, 3))), np.array([0, 3]),
                               np.ones(3))


def test_class_weights_reference_frequencies():
    # frequency-ratio weighting at k=0.5: background and rarest class
    freqs = np.array([0.8715, 0.0600, 0.0258, 0.0231, 0.0054, 0.0050,
                      0.0027, 0.0023, 0.0020, 0.0008, 0.0014])
    w = class_weights(freqs, 0.5)
    assert abs(w[0] - 1.0712) < 1e-3
    assert abs(w[7] - 20.85) < 1e-1   # 1/sqrt(0.0023)
    assert abs(w[7] - 1.0 / np.sqrt(0.0023)) < 1e-9


def test_class_weights_simple_point():
    assert abs(class_weights(np.array([0.25]), 0.5)[0] - 2.0) < 1e-12


def test_class_weights_k_zero_is_uniform():
    w = class_weights(np.array([0.9, 0.1]), 0.0)
    assert np.allclose(w, 1.0)


def test_class_weights_rejects_bad_inputs():
    with pytest.raises(Exception):
        class_weights(np.array([0.0, 0.5]), 0.5)
    with pytest.raises(Exception):
        class_weights(np.array([0.5]), -1.0)


def test_l2_regularization_matches_direct_sum_and_skips_biases():
    rng = SeededRng(1)
    w = Param("w", rng.normal(size=(3, 3)))
    b = Param("b", rng.normal(size=3), is_bias=True)
    tape = Tape()
    loss = l2_regularization(tape, [w, b])
    assert abs(float(loss.value) - float((w.value ** 2).sum())) < 1e-6


def test_adam_first_step_magnitude():
    # constant gradient: bias-corrected first step has magnitude ~ lr
    p = Param("p", np.zeros(4))
    opt = Adam([p], learning_rate=0.01, epsilon=1e-8)
    p.grad[...] = 7.0
    opt.step()
    assert np.allclose(np.abs(p.value), 0.01, atol=1e-6)


def test_adam_converges_on_quadratic_bowl():
    p = Param("p", np.array([5.0, -3.0]))
    target = np.array([1.0, 2.0])
    opt = Adam([p], learning_rate=0.05, epsilon=1e-8)
    for _ in range(2000):
        opt.zero_grad()
        p.grad[...] = 2 * (p.value - target)
        opt.step()
        if np.abs(p.value - target).max() < 1e-3:
            break
    assert np.abs(p.value - target).max() < 1e-3


def test_clip_global_norm():
    a = Param("a", np.zeros(3))
    b = Param("b", np.zeros(4))
    a.grad[...] = 3.0
    b.grad[...] = 4.0
    total = np.sqrt((a.grad ** 2).sum() + (b.grad ** 2).sum())
    clip_global_norm([a, b], 1.0)
    clipped = np.sqrt((a.grad ** 2).sum() + (b.grad ** 2).sum())
    assert abs(clipped - 1.0) < 1e-9
    # direction preserved
    assert np.allclose(a.grad / clipped, np.full(3, 3.0) / total)


def test_clip_global_norm_noop_below_threshold():
    a = Param("a", np.zeros(2))
    a.grad[...] = 0.1
    clip_global_norm([a], 5.0)
    assert np.allclose(a.grad, 0.1)

"""Loss functions and the class-imbalance weight rule."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad


def mse_loss(pred: ad.Tensor, target: np.ndarray) -> ad.Tensor:
    """Mean of squared differences over all elements."""
    target = np.asarray(target)
    if pred.value.shape != target.shape:
        raise ValueError(f"mse shape mismatch: {pred.value.shape} vs {target.shape}")
    return ad.mean_all(ad.square(ad.sub(pred, ad.Tensor(target))))


def weighted_cross_entropy(logits: ad.Tensor, targets: np.ndarray,
                           weights: np.ndarray) -> ad.Tensor:
    """(1/T) * sum_t weights[s_t] * (-log softmax(logits_t)[s_t]).

    logits may be (T, V) or (B, T, V); targets are flattened to match.
    """
    targets = np.asarray(targets).reshape(-1)
    vocab = logits.value.shape[-1]
    if targets.min(initial=0) < 0 or targets.max(initial=0) >= vocab:
        raise ValueError("target symbol out of vocabulary")
    flat = ad.reshape(logits, (-1, vocab))
    if flat.value.shape[0] != targets.shape[0]:
        raise ValueError("logits/targets length mismatch")
    return ad.softmax_cross_entropy(flat, targets, np.asarray(weights, dtype=np.float64))


def class_weights(freqs: np.ndarray, k: float) -> np.ndarray:
    """w_s = f_s^(-k). Frequencies must be in (0, 1]; smooth zeros upstream."""
    freqs = np.asarray(freqs, dtype=np.float64)
    if np.any(freqs <= 0) or np.any(freqs > 1):
        raise ValueError("frequencies must lie in (0, 1]; apply Laplace smoothing first")
    if k < 0:
        raise ValueError("k must be >= 0")
    return freqs ** (-k)


def l2_regularization(tape, params) -> ad.Tensor:
    """Sum of squared weight entries; biases excluded."""
    total = None
    for p in params:
        if p.is_bias:
            continue
        term = ad.sum_all(ad.square(tape.leaf(p)))
        total = term if total is None else ad.add(total, term)
    if total is None:
        return ad.Tensor(np.float64(0.0))
    return total

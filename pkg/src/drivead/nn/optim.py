"""Adam optimizer and global-norm gradient clipping."""

from __future__ import annotations

import numpy as np


def clip_global_norm(params, max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most max_norm."""
    total = 0.0
    for p in params:
        total += float(np.sum(p.grad.astype(np.float64) ** 2))
    norm = np.sqrt(total)
    if norm > max_norm and norm > 0:
        factor = max_norm / norm
        for p in params:
            p.grad *= factor
    return norm


class Adam:
    """Bias-corrected Adam; defaults follow lr 0.01 / epsilon 0.01."""

    def __init__(self, params, learning_rate=0.01, beta1=0.9, beta2=0.999,
                 epsilon=0.01):
        self.params = list(params)
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step_count = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self):
        self.step_count += 1
        t = self.step_count
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            g = p.grad
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1 ** t)
            v_hat = self.v[i] / (1 - b2 ** t)
            p.value -= (self.learning_rate * m_hat /
                        (np.sqrt(v_hat) + self.epsilon)).astype(p.value.dtype)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

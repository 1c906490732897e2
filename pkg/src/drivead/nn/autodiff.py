"""Reverse-mode automatic differentiation over numpy arrays.

A small tape: every op returns a Tensor holding its value plus
(parent, vjp) pairs; Tensor.backward walks the graph in reverse
topological order accumulating gradients. Only the ops the models
need are implemented -- no broadcasting beyond bias-style adds.
"""

from __future__ import annotations

import numpy as np

from ..errors import SequenceTooShortError
from ..numeric import sigmoid as _sigmoid


class Tensor:
    __slots__ = ("value", "grad", "_parents")

    def __init__(self, value, parents=()):
        self.value = np.asarray(value)
        self.grad = None
        self._parents = parents

    @property
    def shape(self):
        return self.value.shape

    def backward(self):
        order = _topo(self)
        self.grad = np.ones_like(self.value)
        for node in order:
            g = node.grad
            for parent, vjp in node._parents:
                contrib = vjp(g)
                if parent.grad is None:
                    parent.grad = contrib
                else:
                    parent.grad = parent.grad + contrib


def _topo(root):
    """Reverse topological order via iterative post-order DFS."""
    order = []
    seen = {id(root)}
    stack = [(root, 0)]
    while stack:
        node, idx = stack.pop()
        if idx < len(node._parents):
            stack.append((node, idx + 1))
            child = node._parents[idx][0]
            if id(child) not in seen:
                seen.add(id(child))
                stack.append((child, 0))
        else:
            order.append(node)
    order.reverse()
    return order


def _unbroadcast(g, shape):
    """Sum `g` down to `shape` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _t(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def add(a, b):
    a, b = _t(a), _t(b)
    return Tensor(a.value + b.value, (
        (a, lambda g: _unbroadcast(g, a.value.shape)),
        (b, lambda g: _unbroadcast(g, b.value.shape)),
    ))


def sub(a, b):
    a, b = _t(a), _t(b)
    return Tensor(a.value - b.value, (
        (a, lambda g: _unbroadcast(g, a.value.shape)),
        (b, lambda g: _unbroadcast(-g, b.value.shape)),
    ))


def mul(a, b):
    a, b = _t(a), _t(b)
    return Tensor(a.value * b.value, (
        (a, lambda g: _unbroadcast(g * b.value, a.value.shape)),
        (b, lambda g: _unbroadcast(g * a.value, b.value.shape)),
    ))


def scale(a, s: float):
    return Tensor(a.value * s, ((a, lambda g: g * s),))


def matmul(a, b):
    a, b = _t(a), _t(b)
    out = np.matmul(a.value, b.value)

    def ga(g):
        return _unbroadcast(np.matmul(g, np.swapaxes(b.value, -1, -2)), a.value.shape)

    def gb(g):
        return _unbroadcast(np.matmul(np.swapaxes(a.value, -1, -2), g), b.value.shape)

    return Tensor(out, ((a, ga), (b, gb)))


def sigmoid(a):
    y = _sigmoid(a.value).astype(a.value.dtype)
    return Tensor(y, ((a, lambda g: g * y * (1 - y)),))


def tanh(a):
    y = np.tanh(a.value)
    return Tensor(y, ((a, lambda g: g * (1 - y * y)),))


def relu(a):
    mask = a.value > 0
    return Tensor(a.value * mask, ((a, lambda g: g * mask),))


def square(a):
    return Tensor(a.value * a.value, ((a, lambda g: g * 2 * a.value),))


def concat(parts, axis):
    parts = [_t(p) for p in parts]
    out = np.concatenate([p.value for p in parts], axis=axis)
    parents = []
    start = 0
    for p in parts:
        n = p.value.shape[axis]
        sl = [slice(None)] * out.ndim
        sl[axis] = slice(start, start + n)
        parents.append((p, (lambda s: lambda g: g[tuple(s)])(tuple(sl))))
        start += n
    return Tensor(out, tuple(parents))


def stack(parts, axis):
    parts = [_t(p) for p in parts]
    out = np.stack([p.value for p in parts], axis=axis)
    parents = []
    for i, p in enumerate(parts):
        parents.append((p, (lambda j: lambda g: np.take(g, j, axis=axis))(i)))
    return Tensor(out, tuple(parents))


def slice_axis(a, axis, start, stop):
    sl = [slice(None)] * a.value.ndim
    sl[axis] = slice(start, stop)
    sl = tuple(sl)

    def vjp(g):
        full = np.zeros_like(a.value)
        full[sl] = g
        return full

    return Tensor(a.value[sl], ((a, vjp),))


def pad_time(a, before, after):
    """Zero-pad along axis 1 (the time axis of a (B, T, C) sequence)."""
    if before == 0 and after == 0:
        return a
    widths = [(0, 0)] * a.value.ndim
    widths[1] = (before, after)
    t = a.value.shape[1]

    def vjp(g):
        sl = [slice(None)] * g.ndim
        sl[1] = slice(before, before + t)
        return g[tuple(sl)]

    return Tensor(np.pad(a.value, widths), ((a, vjp),))


def reshape(a, shape):
    return Tensor(a.value.reshape(shape), ((a, lambda g: g.reshape(a.value.shape)),))


def mean_all(a):
    n = a.value.size
    return Tensor(np.asarray(a.value.mean(dtype=np.float64), dtype=a.value.dtype),
                  ((a, lambda g: np.full_like(a.value, g / n)),))


def sum_all(a):
    return Tensor(np.asarray(a.value.sum(dtype=np.float64), dtype=a.value.dtype),
                  ((a, lambda g: np.full_like(a.value, g)),))


def embedding(table, idx):
    """Row gather: table (V, e), idx int array (...,) -> (..., e)."""
    idx = np.asarray(idx)
    out = table.value[idx]

    def vjp(g):
        full = np.zeros_like(table.value)
        np.add.at(full, idx.reshape(-1), g.reshape(-1, table.value.shape[1]))
        return full

    return Tensor(out, ((table, vjp),))


def softmax_cross_entropy(logits, targets, weights):
    """Mean over rows of weights[t] * (-log softmax(logits)[t]).

    logits (N, V), targets int (N,), weights (V,). Fused forward/backward
    for stability.
    """
    z = logits.value.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1))
    n = z.shape[0]
    rows = np.arange(n)
    logp_t = z[rows, targets] - logsumexp
    w = weights[targets]
    loss = -(w * logp_t).mean()

    def vjp(g):
        p = np.exp(z - logsumexp[:, None])
        p[rows, targets] -= 1.0
        return (g * (w[:, None] / n) * p).astype(logits.value.dtype)

    return Tensor(np.asarray(loss, dtype=logits.value.dtype), ((logits, vjp),))


def conv1d(x, k, b, stride: int = 1):
    """Valid cross-correlation along time.

    x (B, T, Cin), k (W, Cin, Cout), b (Cout,) -> (B, T', Cout) with
    T' = floor((T - W) / stride) + 1.
    """
    width, c_in, c_out = k.value.shape
    batch, t_in, _ = x.value.shape
    if t_in < width:
        raise SequenceTooShortError(f"sequence length {t_in} < kernel width {width}")
    t_out = (t_in - width) // stride + 1
    hi = (t_out - 1) * stride + 1
    out = np.zeros((batch, t_out, c_out), dtype=x.value.dtype)
    for w in range(width):
        out += x.value[:, w:w + hi:stride, :] @ k.value[w]
    out += b.value

    def gx(g):
        full = np.zeros_like(x.value)
        for w in range(width):
            full[:, w:w + hi:stride, :] += g @ k.value[w].T
        return full

    def gk(g):
        full = np.zeros_like(k.value)
        for w in range(width):
            full[w] = np.einsum("btc,bto->co", x.value[:, w:w + hi:stride, :], g)
        return full

    return Tensor(out, ((x, gx), (k, gk), (b, lambda g: g.sum(axis=(0, 1)))))


def conv1d_transpose(x, k, b, stride: int = 1):
    """Adjoint of conv1d in its input: scatters x back to full length.

    x (B, T', Cout), k (W, Cin, Cout), b (Cin,) -> (B, T, Cin) with
    T = (T' - 1) * stride + W.
    """
    width, c_in, c_out = k.value.shape
    batch, t_in, _ = x.value.shape
    t_out = (t_in - 1) * stride + width
    hi = (t_in - 1) * stride + 1
    out = np.zeros((batch, t_out, c_in), dtype=x.value.dtype)
    for w in range(width):
        out[:, w:w + hi:stride, :] += x.value @ k.value[w].T
    out += b.value

    def gx(g):
        full = np.zeros_like(x.value)
        for w in range(width):
            full += g[:, w:w + hi:stride, :] @ k.value[w]
        return full

    def gk(g):
        full = np.zeros_like(k.value)
        for w in range(width):
            full[w] = np.einsum("bti,bto->io", g[:, w:w + hi:stride, :], x.value)
        return full

    return Tensor(out, ((x, gx), (k, gk), (b, lambda g: g.sum(axis=(0, 1)))))

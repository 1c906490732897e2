"""Differentiable layers for the driving models.

Layers own Param objects (value + grad) and build their forward pass on a
Tape, which ties each Param to a leaf Tensor so a single backward call
fills every gradient.
"""

from __future__ import annotations

import numpy as np

from ..numeric import SeededRng
from . import autodiff as ad


class Param:
    """Named learnable array with an accumulated gradient of the same shape."""

    __slots__ = ("name", "value", "grad", "is_bias")

    def __init__(self, name: str, value: np.ndarray, is_bias: bool = False):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)
        self.is_bias = is_bias

    def zero_grad(self):
        self.grad[...] = 0


class Tape:
    """One forward/backward pass: caches a leaf Tensor per Param."""

    def __init__(self):
        self._leaves = {}

    def leaf(self, p: Param) -> ad.Tensor:
        entry = self._leaves.get(id(p))
        if entry is None:
            entry = (p, ad.Tensor(p.value))
            self._leaves[id(p)] = entry
        return entry[1]

    def backward(self, loss: ad.Tensor):
        loss.backward()
        for p, t in self._leaves.values():
            if t.grad is not None:
                p.grad += t.grad


def glorot(rng: SeededRng, shape, dtype):
    fan_in, fan_out = shape[0], shape[-1]
    if len(shape) == 3:  # conv kernels: (width, c_in, c_out)
        fan_in = shape[0] * shape[1]
        fan_out = shape[0] * shape[2]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape).astype(dtype)


class Module:
    def params(self) -> list[Param]:
        raise NotImplementedError


class Dense(Module):
    def __init__(self, name, in_size, out_size, rng, dtype=np.float32):
        self.w = Param(f"{name}.W", glorot(rng, (in_size, out_size), dtype))
        self.b = Param(f"{name}.b", np.zeros(out_size, dtype=dtype), is_bias=True)

    def params(self):
        return [self.w, self.b]

    def forward(self, tape, x):
        return ad.add(ad.matmul(x, tape.leaf(self.w)), tape.leaf(self.b))


class Conv1d(Module):
    """Valid 1-D cross-correlation over (B, T, C_in)."""

    def __init__(self, name, in_channels, out_channels, kernel_width, stride, rng,
                 dtype=np.float32):
        self.kernel_width = kernel_width
        self.stride = stride
        self.k = Param(f"{name}.k", glorot(rng, (kernel_width, in_channels, out_channels), dtype))
        self.b = Param(f"{name}.b", np.zeros(out_channels, dtype=dtype), is_bias=True)

    def params(self):
        return [self.k, self.b]

    def forward(self, tape, x):
        return ad.conv1d(x, tape.leaf(self.k), tape.leaf(self.b), self.stride)


class Conv1dTranspose(Module):
    """Adjoint of Conv1d: (B, T', in_channels) -> (B, T, out_channels)."""

    def __init__(self, name, in_channels, out_channels, kernel_width, stride, rng,
                 dtype=np.float32):
        self.kernel_width = kernel_width
        self.stride = stride
        # kernel kept in conv orientation: (width, out_channels, in_channels)
        self.k = Param(f"{name}.k", glorot(rng, (kernel_width, out_channels, in_channels), dtype))
        self.b = Param(f"{name}.b", np.zeros(out_channels, dtype=dtype), is_bias=True)

    def params(self):
        return [self.k, self.b]

    def forward(self, tape, x):
        return ad.conv1d_transpose(x, tape.leaf(self.k), tape.leaf(self.b), self.stride)


class Embedding(Module):
    def __init__(self, name, vocab_size, dim, rng, dtype=np.float32):
        self.table = Param(f"{name}.E", glorot(rng, (vocab_size, dim), dtype))

    def params(self):
        return [self.table]

    def forward(self, tape, idx):
        return ad.embedding(tape.leaf(self.table), idx)


class LstmCell(Module):
    """Standard LSTM cell: sigmoid input/forget/output gates, tanh candidate.

    Gate weights are one combined matrix W of shape (in + h, 4h), gate order
    i, f, g, o; forget-gate bias initialized to +1 for training stability.
    """

    def __init__(self, name, input_size, hidden_size, rng, dtype=np.float32):
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.w = Param(f"{name}.W", glorot(rng, (input_size + hidden_size, 4 * hidden_size), dtype))
        bias = np.zeros(4 * hidden_size, dtype=dtype)
        bias[hidden_size:2 * hidden_size] = 1.0
        self.b = Param(f"{name}.b", bias, is_bias=True)

    def params(self):
        return [self.w, self.b]

    def step(self, tape, x, h_prev, c_prev):
        """One step over a batch: x (B, in), h/c (B, h) -> (h, c)."""
        hs = self.hidden_size
        z = ad.add(ad.matmul(ad.concat([x, h_prev], axis=1), tape.leaf(self.w)),
                   tape.leaf(self.b))
        i = ad.sigmoid(ad.slice_axis(z, 1, 0, hs))
        f = ad.sigmoid(ad.slice_axis(z, 1, hs, 2 * hs))
        g = ad.tanh(ad.slice_axis(z, 1, 2 * hs, 3 * hs))
        o = ad.sigmoid(ad.slice_axis(z, 1, 3 * hs, 4 * hs))
        c = ad.add(ad.mul(f, c_prev), ad.mul(i, g))
        h = ad.mul(o, ad.tanh(c))
        return h, c


def zero_state(batch, hidden, dtype):
    z = np.zeros((batch, hidden), dtype=dtype)
    return ad.Tensor(z), ad.Tensor(z.copy())


class LstmStack(Module):
    """Unidirectional stack of LSTM layers run over a full sequence."""

    def __init__(self, name, input_size, hidden_size, num_layers, rng, dtype=np.float32):
        self.hidden_size = hidden_size
        self.dtype = dtype
        self.cells = [
            LstmCell(f"{name}.l{i}", input_size if i == 0 else hidden_size,
                     hidden_size, rng, dtype)
            for i in range(num_layers)
        ]

    def params(self):
        return [p for c in self.cells for p in c.params()]

    def forward(self, tape, seq, init_states=None):
        """seq (B, T, d) -> (outputs (B, T, h), final [(h, c)] per layer)."""
        batch, t_len, _ = seq.value.shape
        states = init_states or [zero_state(batch, self.hidden_size, self.dtype)
                                 for _ in self.cells]
        states = list(states)
        layer_in = [ad.reshape(ad.slice_axis(seq, 1, t, t + 1), (batch, -1))
                    for t in range(t_len)]
        for li, cell in enumerate(self.cells):
            h, c = states[li]
            outs = []
            for x_t in layer_in:
                h, c = cell.step(tape, x_t, h, c)
                outs.append(h)
            states[li] = (h, c)
            layer_in = outs
        return ad.stack(layer_in, axis=1), states


class BiLstm(Module):
    """Bidirectional LSTM stack: forward and reversed passes, concatenated.

    Layer i > 0 consumes the 2h-wide concatenated outputs of layer i - 1.
    """

    def __init__(self, name, input_size, hidden_size, num_layers, rng, dtype=np.float32):
        self.hidden_size = hidden_size
        self.dtype = dtype
        self.fwd = []
        self.bwd = []
        for i in range(num_layers):
            d = input_size if i == 0 else 2 * hidden_size
            self.fwd.append(LstmCell(f"{name}.f{i}", d, hidden_size, rng, dtype))
            self.bwd.append(LstmCell(f"{name}.b{i}", d, hidden_size, rng, dtype))

    def params(self):
        return [p for c in self.fwd + self.bwd for p in c.params()]

    def forward(self, tape, seq, init_states=None):
        """Returns (outputs (B, T, 2h), finals) with finals[i] = ((hf, cf), (hb, cb))."""
        batch, t_len, _ = seq.value.shape
        if init_states is None:
            init_states = [
                (zero_state(batch, self.hidden_size, self.dtype),
                 zero_state(batch, self.hidden_size, self.dtype))
                for _ in self.fwd
            ]
        layer_in = [ad.reshape(ad.slice_axis(seq, 1, t, t + 1), (batch, -1))
                    for t in range(t_len)]
        finals = []
        for li, (fcell, bcell) in enumerate(zip(self.fwd, self.bwd)):
            (hf, cf), (hb, cb) = init_states[li]
            fwd_out = []
            for x_t in layer_in:
                hf, cf = fcell.step(tape, x_t, hf, cf)
                fwd_out.append(hf)
            bwd_out = []
            for x_t in reversed(layer_in):
                hb, cb = bcell.step(tape, x_t, hb, cb)
                bwd_out.append(hb)
            bwd_out.reverse()
            finals.append(((hf, cf), (hb, cb)))
            layer_in = [ad.concat([f, b], axis=1) for f, b in zip(fwd_out, bwd_out)]
        return ad.stack(layer_in, axis=1), finals

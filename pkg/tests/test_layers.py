import numpy as np

import drivead.nn.autodiff as ad
from drivead.nn.gradcheck import gradient_check, relative_error
from drivead.nn.layers import (BiLstm, Conv1d, Conv1dTranspose, Dense,
                               Embedding, LstmCell, LstmStack, Tape, glorot,
                               zero_state)
from drivead.numeric import SeededRng


def layer_gradcheck(layer, forward, seed, tolerance=1e-5, step=1e-5):
    params = layer.params()

    def loss_fn(want_grad):
        tape = Tape()
        loss = ad.mean_all(ad.square(forward(tape)))
        if want_grad:
            tape.backward(loss)
        return float(loss.value)

    report = gradient_check(loss_fn, params, step=step, tolerance=tolerance,
                            rng=SeededRng(seed + 1))
    assert report.passed, (layer.__class__.__name__, report.failures[:5])


def test_glorot_bounds_and_determinism():
    w1 = glorot(SeededRng(0), (20, 30), np.float64)
    w2 = glorot(SeededRng(0), (20, 30), np.float64)
    assert np.array_equal(w1, w2)
    limit = np.sqrt(6.0 / (20 + 30))
    assert np.abs(w1).max() <= limit
    assert np.abs(w1).max() > 0.5 * limit  # actually fills the range


def test_dense_forward_is_affine():
    d = Dense("d", 3, 2, SeededRng(0), dtype=np.float64)
    x = SeededRng(1).normal(size=(5, 3))
    out = d.forward(Tape(), ad.Tensor(x)).value
    w, b = d.params()
    assert np.allclose(out, x @ w.value + b.value, atol=1e-9)


def test_dense_gradients():
    for seed in range(5):
        d = Dense("d", 4, 3, SeededRng(seed), dtype=np.float64)
        x = SeededRng(seed + 100).normal(size=(2, 4))
        layer_gradcheck(d, lambda t, d=d, x=x: d.forward(t, ad.Tensor(x)), seed)


def test_conv_layer_gradients():
    for seed in range(5):
        c = Conv1d("c", 3, 4, 3, 1, SeededRng(seed), dtype=np.float64)
        ct = Conv1dTranspose("ct", 4, 3, 3, 1, SeededRng(seed), dtype=np.float64)
        x = SeededRng(seed + 100).normal(size=(2, 8, 3))
        z = SeededRng(seed + 200).normal(size=(2, 6, 4))
        layer_gradcheck(c, lambda t, c=c, x=x: c.forward(t, ad.Tensor(x)), seed)
        layer_gradcheck(ct, lambda t, ct=ct, z=z: ct.forward(t, ad.Tensor(z)),
                        seed)


def test_embedding_gradients():
    e = Embedding("e", 6, 4, SeededRng(0), dtype=np.float64)
    idx = np.array([[0, 3, 3], [5, 1, 0]])
    layer_gradcheck(e, lambda t: e.forward(t, idx), 0)


def test_lstm_cell_state_shapes_and_gradients():
    for seed in range(5):
        cell = LstmCell("c", 3, 4, SeededRng(seed), dtype=np.float64)
        x = SeededRng(seed + 100).normal(size=(2, 3, 3))  # (B, T, in)

        def unroll(tape, cell=cell, x=x):
            h, c = zero_state(2, 4, np.float64)
            outs = []
            for t in range(x.shape[1]):
                h, c = cell.step(tape, ad.Tensor(x[:, t]), h, c)
                outs.append(h)
            return ad.stack(outs, axis=1)

        layer_gradcheck(cell, unroll, seed)


def test_lstm_cell_forget_bias_is_one():
    cell = LstmCell("c", 3, 4, SeededRng(0), dtype=np.float64)
    b = next(p for p in cell.params() if p.is_bias)
    assert np.allclose(b.value[4:8], 1.0)   # forget-gate slice
    assert np.allclose(b.value[:4], 0.0)


def test_lstm_stack_gradients_and_shapes():
    stack = LstmStack("s", 3, 4, 2, SeededRng(0), dtype=np.float64)
    x = SeededRng(1).normal(size=(2, 5, 3))
    outs, finals = stack.forward(Tape(), ad.Tensor(x))
    assert outs.value.shape == (2, 5, 4)
    assert len(finals) == 2
    layer_gradcheck(stack, lambda t: stack.forward(t, ad.Tensor(x))[0], 0)


def test_bilstm_output_shape_and_gradients():
    bi = BiLstm("b", 3, 4, 2, SeededRng(0), dtype=np.float64)
    x = SeededRng(1).normal(size=(2, 5, 3))
    outs, finals = bi.forward(Tape(), ad.Tensor(x))
    assert outs.value.shape == (2, 5, 8)
    assert len(finals) == 2 and len(finals[0]) == 2
    layer_gradcheck(bi, lambda t: bi.forward(t, ad.Tensor(x))[0], 0)


def test_bilstm_palindrome_symmetry():
    """With forward/backward weights tied, a palindromic input sequence
    produces an output sequence whose reversal swaps the two direction
    halves of each step's features."""
    bi = BiLstm("b", 3, 4, 1, SeededRng(0), dtype=np.float64)
    params = {p.name: p for p in bi.params()}
    fwd = [p for name, p in sorted(params.items()) if name.startswith("b.f0")]
    bwd = [p for name, p in sorted(params.items()) if name.startswith("b.b0")]
    assert len(fwd) == len(bwd) == 2
    for pf, pb in zip(fwd, bwd):
        pb.value[...] = pf.value
    half = SeededRng(1).normal(size=(1, 3, 3))
    x = np.concatenate([half, half[:, ::-1]], axis=1)  # palindrome, T=6
    out = bi.forward(Tape(), ad.Tensor(x))[0].value[0]
    fwd_half, bwd_half = out[:, :4], out[:, 4:]
    assert np.allclose(fwd_half, bwd_half[::-1], atol=1e-9)


def test_gradient_check_catches_a_wrong_gradient():
    d = Dense("d", 3, 2, SeededRng(0), dtype=np.float64)
    x = SeededRng(1).normal(size=(2, 3))

    def loss_fn(want_grad):
        tape = Tape()
        loss = ad.mean_all(ad.square(d.forward(tape, ad.Tensor(x))))
        if want_grad:
            tape.backward(loss)
            d.params()[0].grad *= 2.0  # corrupt
        return float(loss.value)

    report = gradient_check(loss_fn, d.params(), step=1e-5, tolerance=1e-4)
    assert not report.passed


def test_relative_error_definition():
    assert relative_error(1.0, 1.0) == 0.0
    assert abs(relative_error(1.0, 2.0) - 0.5) < 1e-12
    assert relative_error(0.0, 0.0) == 0.0

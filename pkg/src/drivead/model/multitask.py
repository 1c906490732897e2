"""Multi-task network: shared conv Bi-LSTM encoder, reconstruction decoder
(task A) and greedy maneuver-sequence decoder (task B)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..numeric import SeededRng
from ..nn import autodiff as ad
from ..nn.layers import (BiLstm, Conv1d, Conv1dTranspose, Dense, Embedding,
                         LstmStack, Module, Tape)
from ..nn.losses import l2_regularization, mse_loss, weighted_cross_entropy
from .config import EOS_ID, SOS_ID, ModelConfig


@dataclass
class MultiTaskLoss:
    """Loss decomposition; `total` carries the gradient graph.

    l_o is recomputed from the component floats as
    w_a * l_a + w_b * l_b + w_r * l_r in that association order, so callers
    can reproduce it bit-exactly.
    """

    total: ad.Tensor
    l_o: float
    l_a: float
    l_b: float
    l_r: float


class MultiTaskModel(Module):
    def __init__(self, cfg: ModelConfig, rng: SeededRng):
        self.cfg = cfg
        dt = cfg.np_dtype
        h = cfg.hidden_size

        self.convs = []
        in_ch = cfg.channels
        for i, (out_ch, width, stride) in enumerate(cfg.conv_specs):
            self.convs.append(Conv1d(f"enc.conv{i}", in_ch, out_ch, width, stride, rng, dt))
            in_ch = out_ch
        self.encoder = BiLstm("enc.bilstm", in_ch, h, cfg.lstm_layers, rng, dt)

        self.decoder_a = BiLstm("decA.bilstm", 1, h, cfg.lstm_layers, rng, dt)
        self.proj_a = Dense("decA.proj", 2 * h, in_ch, rng, dt)
        self.deconvs = []
        chain = [cfg.channels] + [s[0] for s in cfg.conv_specs]
        for i, (out_ch, width, stride) in reversed(list(enumerate(cfg.conv_specs))):
            self.deconvs.append(
                Conv1dTranspose(f"decA.deconv{i}", out_ch, chain[i], width, stride, rng, dt))

        self.embed = Embedding("decB.embed", cfg.vocab_size, cfg.embed_size, rng, dt)
        self.decoder_b = LstmStack("decB.lstm", cfg.embed_size, h, cfg.lstm_layers, rng, dt)
        self.proj_b = Dense("decB.proj", h, cfg.vocab_size, rng, dt)

    def params(self):
        out = []
        for m in (*self.convs, self.encoder, self.decoder_a, self.proj_a,
                  *self.deconvs, self.embed, self.decoder_b, self.proj_b):
            out.extend(m.params())
        return out

    # -- encoder ------------------------------------------------------------

    def encode(self, tape: Tape, x: np.ndarray):
        """x (B, 25, 6) -> (bilstm outputs, per-layer finals, embedding (B, 4h)).

        The embedding is the concatenated final (h, c) states of the top
        Bi-LSTM layer, both directions.
        """
        x = np.asarray(x, dtype=self.cfg.np_dtype)
        if x.ndim != 3 or x.shape[1:] != (self.cfg.window_steps, self.cfg.channels):
            raise ValueError(f"window shape {x.shape[1:]} does not match config")
        seq = ad.Tensor(x)
        for conv, (_, width, _) in zip(self.convs, self.cfg.conv_specs):
            # same-length padding: pad width-1 zeros split across both ends
            seq = ad.pad_time(seq, width // 2, width - 1 - width // 2)
            seq = ad.relu(conv.forward(tape, seq))
        outputs, finals = self.encoder.forward(tape, seq)
        (hf, cf), (hb, cb) = finals[-1]
        embedding = ad.concat([hf, cf, hb, cb], axis=1)
        return outputs, finals, embedding

    # -- task A -------------------------------------------------------------

    def reconstruct(self, tape: Tape, finals) -> ad.Tensor:
        """Decode the encoder states back to a (B, 25, 6) window.

        Decoder LSTM steps receive zero exogenous input; the transposed conv
        stack restores the original window length.
        """
        batch = finals[0][0][0].value.shape[0]
        zeros = ad.Tensor(np.zeros((batch, self.cfg.encoded_steps, 1),
                                   dtype=self.cfg.np_dtype))
        out, _ = self.decoder_a.forward(tape, zeros, init_states=finals)
        seq = self.proj_a.forward(tape, out)
        widths = [w for _, w, _ in reversed(self.cfg.conv_specs)]
        for i, (deconv, width) in enumerate(zip(self.deconvs, widths)):
            t_len = seq.value.shape[1]
            seq = deconv.forward(tape, seq)
            # undo the encoder's same-length padding
            seq = ad.slice_axis(seq, 1, width // 2, width // 2 + t_len)
            if i < len(self.deconvs) - 1:
                seq = ad.relu(seq)
        return seq

    # -- task B -------------------------------------------------------------

    def _forward_states(self, finals):
        return [layer_final[0] for layer_final in finals]

    def teacher_logits(self, tape: Tape, finals, targets: np.ndarray) -> ad.Tensor:
        """Teacher-forced logits (B, horizon+1, V); inputs are SOS + shifted targets."""
        targets = np.asarray(targets)
        batch, steps = targets.shape
        if steps != self.cfg.horizon_steps + 1:
            raise ValueError(f"expected {self.cfg.horizon_steps + 1} target symbols")
        sos = np.full((batch, 1), SOS_ID, dtype=targets.dtype)
        inputs = np.concatenate([sos, targets[:, :-1]], axis=1)
        emb = self.embed.forward(tape, inputs)
        out, _ = self.decoder_b.forward(tape, emb,
                                        init_states=self._forward_states(finals))
        return self.proj_b.forward(tape, out)

    def predict_symbols(self, x: np.ndarray) -> np.ndarray:
        """Greedy decode (B, 25, 6) -> (B, horizon+1) symbol ids.

        Each step feeds the argmax symbol back in; argmax ties resolve to the
        lowest symbol index. Always runs exactly horizon+1 steps.
        """
        x = np.asarray(x)
        if x.ndim == 2:
            x = x[None]
        tape = Tape()
        _, finals, _ = self.encode(tape, x)
        batch = x.shape[0]
        states = self._forward_states(finals)
        sym = np.full(batch, SOS_ID, dtype=np.int64)
        decoded = []
        for _ in range(self.cfg.horizon_steps + 1):
            h = self.embed.forward(tape, sym)
            new_states = []
            for cell, (hs, cs) in zip(self.decoder_b.cells, states):
                hs, cs = cell.step(tape, h, hs, cs)
                new_states.append((hs, cs))
                h = hs
            states = new_states
            logits = self.proj_b.forward(tape, h)
            sym = np.argmax(logits.value, axis=1)
            decoded.append(sym)
        return np.stack(decoded, axis=1)

    # -- combined loss ------------------------------------------------------

    def loss(self, tape: Tape, x: np.ndarray, targets: np.ndarray,
             class_weight_vec: np.ndarray) -> MultiTaskLoss:
        """L_O = w_A L_A + w_B L_B + w_R L_R (teacher forcing for task B).

        Components with zero weight are skipped entirely, so e.g. with
        w_b = w_r = 0 no gradient reaches the symbol decoder.
        """
        cfg = self.cfg
        _, finals, _ = self.encode(tape, x)
        l_a = l_b = l_r = 0.0
        terms = []
        if cfg.w_a != 0.0:
            t_a = mse_loss(self.reconstruct(tape, finals), x.astype(cfg.np_dtype))
            l_a = float(t_a.value)
            terms.append(ad.scale(t_a, cfg.w_a))
        if cfg.w_b != 0.0:
            t_b = weighted_cross_entropy(self.teacher_logits(tape, finals, targets),
                                         targets, class_weight_vec)
            l_b = float(t_b.value)
            terms.append(ad.scale(t_b, cfg.w_b))
        if cfg.w_r != 0.0:
            t_r = l2_regularization(tape, self.params())
            l_r = float(t_r.value)
            terms.append(ad.scale(t_r, cfg.w_r))
        if not terms:
            raise ConfigError("all loss weights are zero")
        total = terms[0]
        for t in terms[1:]:
            total = ad.add(total, t)
        l_o = cfg.w_a * l_a + cfg.w_b * l_b + cfg.w_r * l_r
        return MultiTaskLoss(total=total, l_o=l_o, l_a=l_a, l_b=l_b, l_r=l_r)

    def reconstruction(self, x: np.ndarray) -> np.ndarray:
        """Inference-only reconstruction (no gradient use)."""
        tape = Tape()
        _, finals, _ = self.encode(tape, x)
        return self.reconstruct(tape, finals).value

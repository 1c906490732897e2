"""Standalone unidirectional LSTM autoencoder baseline and the
per-maneuver ensemble built from it."""

from __future__ import annotations

import numpy as np

from ..errors import DataError
from ..numeric import SeededRng
from ..nn import autodiff as ad
from ..nn.layers import Dense, LstmStack, Module, Tape
from ..nn.losses import mse_loss


class BaselineAutoencoder(Module):
    """LSTM encoder/decoder over the raw window; decoder inputs are zero."""

    def __init__(self, channels: int, window_steps: int, hidden_size: int,
                 num_layers: int, rng: SeededRng, dtype=np.float32,
                 name: str = "ae"):
        self.channels = channels
        self.window_steps = window_steps
        self.dtype = np.dtype(dtype)
        self.encoder = LstmStack(f"{name}.enc", channels, hidden_size, num_layers, rng, dtype)
        self.decoder = LstmStack(f"{name}.dec", 1, hidden_size, num_layers, rng, dtype)
        self.proj = Dense(f"{name}.proj", hidden_size, channels, rng, dtype)

    def params(self):
        return self.encoder.params() + self.decoder.params() + self.proj.params()

    def forward(self, tape: Tape, x: np.ndarray) -> ad.Tensor:
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 3 or x.shape[1:] != (self.window_steps, self.channels):
            raise ValueError(f"window shape {x.shape[1:]} does not match model")
        _, finals = self.encoder.forward(tape, ad.Tensor(x))
        zeros = ad.Tensor(np.zeros((x.shape[0], self.window_steps, 1), dtype=self.dtype))
        out, _ = self.decoder.forward(tape, zeros, init_states=finals)
        return self.proj.forward(tape, out)

    def loss(self, tape: Tape, x: np.ndarray) -> ad.Tensor:
        return mse_loss(self.forward(tape, x), np.asarray(x, dtype=self.dtype))

    def reconstruction(self, x: np.ndarray) -> np.ndarray:
        return self.forward(Tape(), x).value

    def window_losses(self, x: np.ndarray) -> np.ndarray:
        """Per-window reconstruction MSE, (N,)."""
        recon = self.reconstruction(x)
        d = recon.astype(np.float64) - np.asarray(x, dtype=np.float64)
        return (d * d).mean(axis=(1, 2))


class EnsembleModel:
    """One autoencoder per training maneuver; a window's loss is the minimum
    member reconstruction MSE."""

    def __init__(self, members: list[tuple[int, BaselineAutoencoder]]):
        if not members:
            raise DataError("ensemble has no members")
        self.members = list(members)

    @property
    def labels(self):
        return [label for label, _ in self.members]

    def member_losses(self, x: np.ndarray) -> np.ndarray:
        """Per-member per-window MSE matrix, (N, M)."""
        return np.stack([m.window_losses(x) for _, m in self.members], axis=1)

    def ensemble_loss(self, x: np.ndarray):
        """(min loss, argmin member label) per window; ties keep the first member."""
        losses = self.member_losses(x)
        idx = np.argmin(losses, axis=1)
        labels = np.asarray(self.labels)[idx]
        return losses[np.arange(losses.shape[0]), idx], labels

    def params(self):
        return [p for _, m in self.members for p in m.params()]

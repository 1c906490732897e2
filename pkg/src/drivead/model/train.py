"""Minibatch training loops and per-epoch evaluation for all variants."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError, NumericError
from ..numeric import SeededRng, assert_finite
from ..nn.layers import Tape
from ..nn.losses import class_weights
from ..nn.optim import Adam, clip_global_norm
from .baseline import BaselineAutoencoder, EnsembleModel
from .config import EOS_ID, NUM_MANEUVERS, SOS_ID, VOCAB_SIZE, ModelConfig
from .multitask import MultiTaskModel

VARIANTS = ("multitask", "baseline_ae", "ensemble", "symbol_only")


@dataclass
class TrainSettings:
    epochs: int = 10
    batch_size: int = 256
    learning_rate: float = 0.01
    epsilon: float = 0.01
    clip_norm: float = 5.0
    seed: int = 0

    @classmethod
    def paper_scale(cls, seed: int = 0) -> "TrainSettings":
        return cls(epochs=300, batch_size=512, seed=seed)


@dataclass
class EpochMetrics:
    epoch: int
    l_o: float
    l_a: float
    l_b: float
    l_r: float
    symbol_accuracy: float


@dataclass
class WindowArrays:
    """Batched window store: everything the trainers and scorers consume."""

    inputs: np.ndarray            # (N, 25, 6) float32, scaled
    targets: np.ndarray           # (N, horizon+1) int64
    majority: np.ndarray          # (N,)
    ids: np.ndarray               # (N,)
    anomaly_fraction: np.ndarray  # (N,)
    max_speed: np.ndarray         # (N,)

    def __len__(self):
        return self.inputs.shape[0]

    def subset(self, mask) -> "WindowArrays":
        return WindowArrays(self.inputs[mask], self.targets[mask],
                            self.majority[mask], self.ids[mask],
                            self.anomaly_fraction[mask], self.max_speed[mask])

    @classmethod
    def from_windows(cls, windows) -> "WindowArrays":
        if not windows:
            raise DataError("empty window list")
        return cls(
            inputs=np.stack([w.input for w in windows]).astype(np.float32),
            targets=np.stack([w.target_symbols for w in windows]).astype(np.int64),
            majority=np.array([w.majority_label for w in windows], dtype=np.int64),
            ids=np.array([w.id for w in windows], dtype=np.int64),
            anomaly_fraction=np.array([w.anomaly_fraction for w in windows]),
            max_speed=np.array([w.max_speed for w in windows]),
        )


def vocab_class_weights(stats, k: float) -> np.ndarray:
    """Weight vector over the full vocabulary: f_s^-k for maneuvers,
    1 for EOS (framing token), 0 for SOS (never a target)."""
    w = np.zeros(VOCAB_SIZE, dtype=np.float64)
    w[:NUM_MANEUVERS] = class_weights(stats.frequencies, k)
    w[EOS_ID] = 1.0
    w[SOS_ID] = 0.0
    return w


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    for i in range(0, n, batch_size):
        yield order[i:i + batch_size]


def symbol_accuracy(model: MultiTaskModel, data: WindowArrays,
                    batch_size: int = 512) -> float:
    correct = 0
    total = 0
    for i in range(0, len(data), batch_size):
        x = data.inputs[i:i + batch_size]
        pred = model.predict_symbols(x)
        correct += int((pred == data.targets[i:i + batch_size]).sum())
        total += pred.size
    return correct / total if total else 0.0


def evaluate_multitask(model: MultiTaskModel, data: WindowArrays, weights,
                       batch_size: int = 512, with_symbols: bool = True) -> EpochMetrics:
    cfg = model.cfg
    n = len(data)
    l_a = l_b = 0.0
    l_r = None
    for i in range(0, n, batch_size):
        x = data.inputs[i:i + batch_size]
        t = data.targets[i:i + batch_size]
        loss = model.loss(Tape(), x, t, weights)
        frac = x.shape[0] / n
        l_a += loss.l_a * frac
        l_b += loss.l_b * frac
        l_r = loss.l_r
    l_r = l_r or 0.0
    l_o = cfg.w_a * l_a + cfg.w_b * l_b + cfg.w_r * l_r
    acc = symbol_accuracy(model, data, batch_size) if with_symbols else 0.0
    return EpochMetrics(epoch=-1, l_o=l_o, l_a=l_a, l_b=l_b, l_r=l_r,
                        symbol_accuracy=acc)


def train_multitask(model: MultiTaskModel, train: WindowArrays,
                    test: WindowArrays, stats, settings: TrainSettings,
                    log=None) -> list[EpochMetrics]:
    """Adam + global-norm clipping; per-epoch metrics are on the test split."""
    weights = vocab_class_weights(stats, model.cfg.k)
    params = model.params()
    opt = Adam(params, learning_rate=settings.learning_rate,
               epsilon=settings.epsilon)
    rng = SeededRng(settings.seed)
    history = []
    with_symbols = model.cfg.w_b != 0.0
    for epoch in range(1, settings.epochs + 1):
        for idx in _batches(len(train), settings.batch_size, rng):
            tape = Tape()
            loss = model.loss(tape, train.inputs[idx], train.targets[idx], weights)
            if not np.isfinite(loss.l_o):
                raise NumericError(f"training diverged at epoch {epoch} "
                                   f"(loss {loss.l_o})")
            opt.zero_grad()
            tape.backward(loss.total)
            clip_global_norm(params, settings.clip_norm)
            opt.step()
        metrics = evaluate_multitask(model, test, weights,
                                     with_symbols=with_symbols)
        metrics.epoch = epoch
        history.append(metrics)
        if log:
            log(metrics)
    return history


def baseline_mse(model: BaselineAutoencoder, data: WindowArrays,
                 batch_size: int = 512) -> float:
    n = len(data)
    total = 0.0
    for i in range(0, n, batch_size):
        x = data.inputs[i:i + batch_size]
        total += float(model.loss(Tape(), x).value) * (x.shape[0] / n)
    return total


def train_baseline(model: BaselineAutoencoder, train: WindowArrays,
                   test: WindowArrays, settings: TrainSettings,
                   log=None) -> list[EpochMetrics]:
    """Fully unsupervised: never reads maneuver labels."""
    params = model.params()
    opt = Adam(params, learning_rate=settings.learning_rate,
               epsilon=settings.epsilon)
    rng = SeededRng(settings.seed)
    history = []
    for epoch in range(1, settings.epochs + 1):
        for idx in _batches(len(train), settings.batch_size, rng):
            tape = Tape()
            loss = model.loss(tape, train.inputs[idx])
            value = float(loss.value)
            if not np.isfinite(value):
                raise NumericError(f"training diverged at epoch {epoch}")
            opt.zero_grad()
            tape.backward(loss)
            clip_global_norm(params, settings.clip_norm)
            opt.step()
        mse = baseline_mse(model, test)
        metrics = EpochMetrics(epoch=epoch, l_o=mse, l_a=mse, l_b=0.0,
                               l_r=0.0, symbol_accuracy=0.0)
        history.append(metrics)
        if log:
            log(metrics)
    return history


def train_ensemble(cfg: ModelConfig, train: WindowArrays, test: WindowArrays,
                   settings: TrainSettings, hidden_size: int | None = None,
                   log=None):
    """One autoencoder per maneuver present in the training windows, each
    trained only on its own class."""
    hidden = hidden_size or cfg.hidden_size
    present = sorted(int(l) for l in np.unique(train.majority))
    members = []
    history = []
    for label in present:
        sub = train.subset(train.majority == label)
        rng = SeededRng(settings.seed * 1000 + label)
        member = BaselineAutoencoder(cfg.channels, cfg.window_steps, hidden,
                                     cfg.lstm_layers, rng,
                                     dtype=cfg.np_dtype, name=f"m{label}")
        member_settings = TrainSettings(
            epochs=settings.epochs, batch_size=settings.batch_size,
            learning_rate=settings.learning_rate, epsilon=settings.epsilon,
            clip_norm=settings.clip_norm, seed=settings.seed * 1000 + label)
        train_baseline(member, sub, sub, member_settings)
        members.append((label, member))
    model = EnsembleModel(members)
    min_losses, _ = model.ensemble_loss(test.inputs)
    assert_finite(min_losses, "ensemble test losses")
    mse = float(min_losses.mean())
    metrics = EpochMetrics(epoch=settings.epochs, l_o=mse, l_a=mse, l_b=0.0,
                           l_r=0.0, symbol_accuracy=0.0)
    history.append(metrics)
    if log:
        log(metrics)
    return model, history

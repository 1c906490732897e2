"""Windowed preprocessing: downsample, segment, speed-filter, scale, split,
and label statistics."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import DataError
from ..model.config import EOS_ID, NUM_MANEUVERS
from .trace import NUM_CHANNELS, Trace

SPEED_CHANNEL = 2
MPH_15_IN_MPS = 6.7056  # 15 mph, the minimum-activity filter threshold


@dataclass
class Window:
    """One segmented unit: 25x6 input block plus the following 3 s of labels."""

    id: int
    input: np.ndarray            # (window_steps, 6)
    target_symbols: np.ndarray   # (horizon_steps + 1,) ids, last is EOS
    majority_label: int
    max_speed: float             # m/s, from the unscaled input span
    trace_id: str
    start: int                   # sample index of the input span
    anomaly_fraction: float


def downsample(trace: Trace, target_hz: float) -> Trace:
    """Block mean for channels, block majority for labels, block OR for the
    anomaly mask. Source rate must be an integer multiple of target_hz."""
    ratio = trace.sample_rate_hz / target_hz
    factor = int(round(ratio))
    if factor < 1 or abs(ratio - factor) > 1e-9:
        raise DataError(
            f"rate {trace.sample_rate_hz} not divisible by target {target_hz}")
    if factor == 1:
        return trace
    n = (len(trace) // factor) * factor
    values = trace.values[:n].reshape(-1, factor, NUM_CHANNELS).mean(axis=1)
    labels = trace.labels[:n].reshape(-1, factor)
    anomaly = trace.anomaly[:n].reshape(-1, factor).any(axis=1)
    out_labels = np.empty(labels.shape[0], dtype=np.int64)
    for i, block in enumerate(labels):
        out_labels[i] = _majority(block)
    return Trace(sample_rate_hz=target_hz, values=values, labels=out_labels,
                 anomaly=anomaly, trace_id=trace.trace_id)


def _majority(block: np.ndarray) -> int:
    """Most frequent label; ties go to the label occurring earliest in the block."""
    uniq, counts = np.unique(block, return_counts=True)
    best = counts.max()
    tied = set(uniq[counts == best])
    for lab in block:
        if lab in tied:
            return int(lab)
    return int(block[0])


def segment_count(n_samples: int, rate_hz: float, window_s: float = 5.0,
                  stride_s: float = 0.5, horizon_s: float = 3.0) -> int:
    """Closed-form window count; 0 when the trace is too short."""
    need = int(round((window_s + horizon_s) * rate_hz))
    if n_samples < need:
        return 0
    stride = stride_s * rate_hz
    return int(np.floor((n_samples - need) / stride)) + 1


def segment(trace: Trace, window_s: float = 5.0, stride_s: float = 0.5,
            horizon_s: float = 3.0, start_id: int = 0) -> list[Window]:
    """Slide a window_s input block (stride_s apart) over the trace; each
    window carries the following horizon_s of labels plus EOS as targets.

    Fractional strides place window i at sample floor(i * stride)."""
    rate = trace.sample_rate_hz
    w = int(round(window_s * rate))
    h = int(round(horizon_s * rate))
    stride = stride_s * rate
    count = segment_count(len(trace), rate, window_s, stride_s, horizon_s)
    windows = []
    for i in range(count):
        s = int(np.floor(i * stride))
        block = trace.values[s:s + w]
        targets = np.concatenate([trace.labels[s + w:s + w + h], [EOS_ID]])
        windows.append(Window(
            id=start_id + i,
            input=block.copy(),
            target_symbols=targets.astype(np.int64),
            majority_label=_majority(trace.labels[s:s + w]),
            max_speed=float(block[:, SPEED_CHANNEL].max()),
            trace_id=trace.trace_id,
            start=s,
            anomaly_fraction=float(trace.anomaly[s:s + w].mean()),
        ))
    return windows


def speed_filter(windows: list[Window], min_mps: float = MPH_15_IN_MPS) -> list[Window]:
    """Keep windows whose maximum speed is >= the threshold (boundary kept)."""
    return [w for w in windows if w.max_speed >= min_mps]


@dataclass
class ScalerParams:
    """Per-channel min/max from the training split."""

    minimum: np.ndarray
    maximum: np.ndarray

    def to_dict(self):
        return {"minimum": self.minimum.tolist(), "maximum": self.maximum.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["minimum"]), np.asarray(d["maximum"]))


def fit_scaler(train: list[Window]) -> ScalerParams:
    if not train:
        raise DataError("cannot fit a scaler on an empty training set")
    stacked = np.stack([w.input for w in train])
    return ScalerParams(minimum=stacked.min(axis=(0, 1)),
                        maximum=stacked.max(axis=(0, 1)))


def scale_array(params: ScalerParams, x: np.ndarray) -> np.ndarray:
    """x' = (x - min) / (max - min); degenerate channels map to 0. Values
    outside the training range are NOT clamped."""
    span = params.maximum - params.minimum
    safe = np.where(span == 0, 1.0, span)
    out = (x - params.minimum) / safe
    return np.where(span == 0, 0.0, out)


def unscale_array(params: ScalerParams, x: np.ndarray) -> np.ndarray:
    span = params.maximum - params.minimum
    return np.where(span == 0, params.minimum, x * span + params.minimum)


def apply_scaler(params: ScalerParams, w: Window) -> Window:
    return replace(w, input=scale_array(params, w.input))


def split_sizes(n: int, train_fraction: float = 0.7) -> tuple[int, int]:
    n_train = int(np.floor(n * train_fraction))
    return n_train, n - n_train


def split(windows: list[Window], train_fraction: float = 0.7,
          mode: str = "chronological", seed: int = 0):
    """Disjoint, exhaustive train/test split. Chronological (the default)
    avoids leakage from overlapping windows; shuffled mode is seeded."""
    n_train, _ = split_sizes(len(windows), train_fraction)
    if mode == "chronological":
        return windows[:n_train], windows[n_train:]
    if mode == "shuffled":
        order = np.random.Generator(np.random.PCG64(seed)).permutation(len(windows))
        picked = [windows[i] for i in order]
        return picked[:n_train], picked[n_train:]
    raise DataError(f"unknown split mode {mode!r}")


@dataclass
class LabelStats:
    """Laplace-smoothed majority-label frequencies over training windows."""

    counts: np.ndarray         # raw counts per maneuver id
    frequencies: np.ndarray    # smoothed, sum to 1

    @classmethod
    def fit(cls, train: list[Window]) -> "LabelStats":
        if not train:
            raise DataError("label statistics need a nonempty training set")
        counts = np.bincount([w.majority_label for w in train],
                             minlength=NUM_MANEUVERS).astype(np.int64)
        smoothed = (counts + 1).astype(np.float64)
        return cls(counts=counts, frequencies=smoothed / smoothed.sum())

    @classmethod
    def from_frequencies(cls, freqs) -> "LabelStats":
        freqs = np.asarray(freqs, dtype=np.float64)
        return cls(counts=np.zeros(len(freqs), dtype=np.int64),
                   frequencies=freqs / freqs.sum())

    def to_dict(self):
        return {"counts": self.counts.tolist(),
                "frequencies": self.frequencies.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["counts"], dtype=np.int64),
                   np.asarray(d["frequencies"], dtype=np.float64))

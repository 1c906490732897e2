"""Maneuver vocabulary and model hyperparameter bundle."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from ..errors import ConfigError

# 11 annotated maneuvers; "background" means going straight.
MANEUVERS = (
    "background",
    "intersection_passing",
    "left_turn",
    "right_turn",
    "left_lane_change",
    "right_lane_change",
    "crosswalk_passing",
    "u_turn",
    "left_lane_branch",
    "right_lane_branch",
    "merge",
)
SOS = "<sos>"
EOS = "<eos>"
VOCAB = MANEUVERS + (SOS, EOS)
SYMBOL_TO_ID = {s: i for i, s in enumerate(VOCAB)}
SOS_ID = SYMBOL_TO_ID[SOS]
EOS_ID = SYMBOL_TO_ID[EOS]
NUM_MANEUVERS = len(MANEUVERS)
VOCAB_SIZE = len(VOCAB)


@dataclass
class ModelConfig:
    """Architecture and loss configuration shared by all model variants.

    Defaults are desk-scale; `paper_scale()` returns the full-size setup
    (hidden 256, two Bi-LSTM layers).
    """

    channels: int = 6
    window_steps: int = 25          # 5 s at 5 Hz
    horizon_steps: int = 15         # 3 s at 5 Hz; decoder emits horizon + EOS
    conv_specs: tuple = ((16, 3, 1), (32, 3, 1))  # (out_channels, width, stride)
    lstm_layers: int = 2
    hidden_size: int = 64
    embed_size: int = 16
    w_a: float = 1.0
    w_b: float = 0.001
    w_r: float = 0.0001
    k: float = 0.5
    dtype: str = "float32"

    def __post_init__(self):
        if len(VOCAB) != 13:
            raise ConfigError("vocabulary must contain 11 maneuvers + SOS + EOS")
        if self.window_steps < 1 or self.horizon_steps < 1:
            raise ConfigError("window_steps and horizon_steps must be positive")
        if self.hidden_size < 1 or self.embed_size < 1 or self.lstm_layers < 1:
            raise ConfigError("hidden_size, embed_size and lstm_layers must be >= 1")
        if self.k < 0 or self.w_a < 0 or self.w_b < 0 or self.w_r < 0:
            raise ConfigError("loss weights and k must be non-negative")
        for out_ch, width, stride in self.conv_specs:
            if stride != 1:
                raise ConfigError("conv stack uses same-length padding; "
                                  "stride must be 1")
            if width < 1 or width > self.window_steps:
                raise ConfigError("conv width must be in [1, window_steps]")
        # same-padded stride-1 convs preserve the window length
        self.encoded_steps = self.window_steps

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)

    @property
    def conv_out_channels(self) -> int:
        return self.conv_specs[-1][0] if self.conv_specs else self.channels

    @property
    def vocab_size(self) -> int:
        return VOCAB_SIZE

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conv_specs"] = [list(s) for s in self.conv_specs]
        d.pop("encoded_steps", None)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        if "conv_specs" in d:
            d["conv_specs"] = tuple(tuple(s) for s in d["conv_specs"])
        return cls(**d)

    @classmethod
    def paper_scale(cls) -> "ModelConfig":
        return cls(hidden_size=256, embed_size=32)

"""Synthetic labeled driving-trace generator with anomaly injection.

Traces are built as piecewise maneuver segments with characteristic
channel templates (turn lobes with the right yaw integral, S-shaped lane
changes, cruising background), then derived channels (steer speed, pedal
angle/pressure) are computed from the clean signals before measurement
noise is added. Injected anomalies -- brake slams, erratic steer
oscillation, pedal spikes -- are marked in the per-sample anomaly mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter1d

from ..errors import ConfigError
from ..model.config import MANEUVERS, SYMBOL_TO_ID
from ..numeric import SeededRng
from .trace import Trace

CRUISE_MPS = 12.0

# Table-I-like default maneuver mix (fraction of samples).
DEFAULT_MIX = {
    "background": 0.8715,
    "intersection_passing": 0.0600,
    "left_turn": 0.0258,
    "right_turn": 0.0231,
    "left_lane_change": 0.0054,
    "right_lane_change": 0.0050,
    "crosswalk_passing": 0.0027,
    "u_turn": 0.0023,
    "left_lane_branch": 0.0020,
    "right_lane_branch": 0.0008,
    "merge": 0.0014,
}

DEFAULT_DURATIONS = {
    "background": (6.0, 14.0),
    "intersection_passing": (4.0, 7.0),
    "left_turn": (4.0, 7.0),
    "right_turn": (4.0, 7.0),
    "left_lane_change": (2.5, 4.0),
    "right_lane_change": (2.5, 4.0),
    "crosswalk_passing": (2.0, 3.0),
    "u_turn": (8.0, 12.0),
    "left_lane_branch": (3.0, 5.0),
    "right_lane_branch": (3.0, 5.0),
    "merge": (4.0, 6.0),
}

ANOMALY_KINDS = ("brake_slam", "steer_flutter", "pedal_spike")


@dataclass
class GeneratorConfig:
    seed: int = 0
    sample_rate_hz: float = 100.0
    duration_s: float = 600.0
    noise: float = 0.02
    anomaly_rate: float = 0.0    # probability of one anomaly burst per segment
    mix: dict = field(default_factory=lambda: dict(DEFAULT_MIX))
    durations: dict = field(default_factory=lambda: dict(DEFAULT_DURATIONS))

    def __post_init__(self):
        for name, p in self.mix.items():
            if name not in MANEUVERS:
                raise ConfigError(f"unknown maneuver in mix: {name!r}")
            if p < 0:
                raise ConfigError(f"negative probability for {name!r}")
        if sum(self.mix.values()) <= 0:
            raise ConfigError("maneuver mix sums to zero")
        if not 0 <= self.anomaly_rate <= 1:
            raise ConfigError("anomaly_rate must be in [0, 1]")

    def to_file(self, path):
        with open(path, "w") as fh:
            fh.write(f"seed={self.seed}\n")
            fh.write(f"sample_rate_hz={self.sample_rate_hz:g}\n")
            fh.write(f"duration_s={self.duration_s:g}\n")
            fh.write(f"noise={self.noise:g}\n")
            fh.write(f"anomaly_rate={self.anomaly_rate:g}\n")
            for name in MANEUVERS:
                if name in self.mix:
                    fh.write(f"p_{name}={self.mix[name]:g}\n")
            for name in MANEUVERS:
                if name in self.durations:
                    lo, hi = self.durations[name]
                    fh.write(f"dur_{name}={lo:g},{hi:g}\n")

    @classmethod
    def from_file(cls, path) -> "GeneratorConfig":
        kwargs = {"mix": {}, "durations": {}}
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value")
                key, _, value = line.partition("=")
                key = key.strip()
                value = value.strip()
                try:
                    if key == "seed":
                        kwargs["seed"] = int(value)
                    elif key in ("sample_rate_hz", "duration_s", "noise", "anomaly_rate"):
                        kwargs[key] = float(value)
                    elif key.startswith("p_"):
                        kwargs["mix"][key[2:]] = float(value)
                    elif key.startswith("dur_"):
                        lo, hi = (float(v) for v in value.split(","))
                        kwargs["durations"][key[4:]] = (lo, hi)
                    else:
                        raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                except ValueError:
                    raise ConfigError(f"{path}:{lineno}: bad value {value!r}") from None
        if not kwargs["mix"]:
            kwargs.pop("mix")
        if not kwargs["durations"]:
            kwargs.pop("durations")
        return cls(**kwargs)


def _lobe(n):
    """sin^2 window, zero at both ends, unit peak."""
    t = np.arange(n) / max(n, 1)
    return np.sin(np.pi * t) ** 2


def _s_curve(n):
    """One full sine period: S-shaped excursion with zero integral."""
    t = np.arange(n) / max(n, 1)
    return np.sin(2 * np.pi * t)


def _texture(n, rate, rng, smooth_s=1.0):
    """Unit-variance low-pass random texture (smoothed white noise).

    Gives background segments realistic small-scale variation that cannot
    be summarized by a handful of parameters."""
    raw = rng.normal(0, 1.0, n)
    width = max(smooth_s * rate, 1.0)
    out = gaussian_filter1d(raw, sigma=width, mode="nearest")
    std = out.std()
    return out / std if std > 0 else out


def maneuver_channels(label: str, n: int, rate: float, rng: SeededRng):
    """Clean (steer, yaw, speed) templates for one segment of n samples.

    Turn lobes integrate to roughly +/-90 deg of yaw, u-turns to +/-180 with
    a distinctive large steer plateau and low speed.
    """
    dur = n / rate
    steer = np.zeros(n)
    yaw = np.zeros(n)
    speed = np.full(n, CRUISE_MPS)
    lobe = _lobe(n)
    if label in ("left_turn", "right_turn"):
        sign = 1.0 if label == "left_turn" else -1.0
        # sin^2 lobe integrates to dur/2 -> peak 180/dur gives 90 deg total
        yaw = sign * (180.0 / dur) * lobe
        steer = sign * 150.0 * lobe
        speed = CRUISE_MPS - 3.0 * lobe
    elif label == "u_turn":
        sign = 1.0 if rng.uniform(0, 1) < 0.7 else -1.0
        yaw = sign * (360.0 / dur) * lobe
        ramp = np.clip(np.arange(n) / max(n * 0.2, 1), 0, 1)
        ramp *= np.clip((n - 1 - np.arange(n)) / max(n * 0.2, 1), 0, 1)
        steer = sign * 180.0 * np.clip(ramp, 0, 1)
        speed = CRUISE_MPS - 4.5 * lobe
    elif label in ("left_lane_change", "right_lane_change"):
        sign = 1.0 if label == "left_lane_change" else -1.0
        steer = sign * 40.0 * _s_curve(n)
        yaw = sign * 8.0 * _s_curve(n)
    elif label in ("left_lane_branch", "right_lane_branch"):
        sign = 1.0 if label == "left_lane_branch" else -1.0
        half = np.sin(np.pi * np.arange(n) / max(n, 1))
        # half-sine integrates to 2*dur/pi -> peak for ~25 deg total yaw
        yaw = sign * (25.0 * np.pi / (2.0 * dur)) * half
        steer = sign * 35.0 * half
    elif label == "intersection_passing":
        speed = CRUISE_MPS - 4.0 * lobe
        steer = 3.0 * _s_curve(n)
    elif label == "crosswalk_passing":
        speed = CRUISE_MPS - 2.0 * lobe
    elif label == "merge":
        steer = 20.0 * _s_curve(n)
        yaw = 4.0 * _s_curve(n)
        speed = CRUISE_MPS + 1.5 * lobe
    elif label == "background":
        drift = rng.uniform(-1.5, 1.5)
        phase = rng.uniform(0, 2 * np.pi)
        speed = CRUISE_MPS + drift * np.sin(2 * np.pi * np.arange(n) / (rate * 20.0) + phase)
        steer = 2.0 * np.sin(2 * np.pi * np.arange(n) / (rate * 8.0) + phase)
        yaw = 0.4 * np.sin(2 * np.pi * np.arange(n) / (rate * 8.0) + phase)
        # small-scale lane-keeping corrections and speed modulation
        steer = steer + 6.0 * _texture(n, rate, rng)
        yaw = yaw + 0.5 * _texture(n, rate, rng)
        speed = speed + 0.9 * _texture(n, rate, rng)
    else:
        raise ConfigError(f"no template for maneuver {label!r}")
    return steer, yaw, speed


def _inject_anomaly(kind, steer, speed, pressure_override, rate, start, length, rng):
    """Mutates the clean signals over [start, start+length); returns nothing."""
    span = slice(start, start + length)
    burst = _lobe(length)
    if kind == "brake_slam":
        speed[span] -= (0.65 * speed[start]) * burst
        pressure_override[span] = 0.9
    elif kind == "steer_flutter":
        t = np.arange(length) / rate
        steer[span] += 70.0 * np.sin(2 * np.pi * 4.0 * t) * burst
    elif kind == "pedal_spike":
        pressure_override[span] = -1.0  # sentinel: pedal_angle spike, see below
    else:
        raise ConfigError(f"unknown anomaly kind {kind!r}")


def synth_trace(cfg: GeneratorConfig, rng: SeededRng | None = None,
                trace_id: str = "synthetic") -> Trace:
    """Generate one labeled trace; same config + seed give identical output."""
    rng = rng or SeededRng(cfg.seed)
    rate = cfg.sample_rate_hz
    total = int(round(cfg.duration_s * rate))

    names = [m for m in MANEUVERS if cfg.mix.get(m, 0.0) > 0]
    probs = np.array([cfg.mix[m] for m in names], dtype=np.float64)
    mean_dur = np.array(
        [sum(cfg.durations.get(m, DEFAULT_DURATIONS[m])) / 2.0 for m in names])
    # pick segments so the per-SAMPLE label share follows the configured mix
    seg_p = probs / mean_dur
    seg_p /= seg_p.sum()

    steer = np.zeros(total)
    yaw = np.zeros(total)
    speed = np.full(total, CRUISE_MPS)
    labels = np.zeros(total, dtype=np.int64)
    anomaly = np.zeros(total, dtype=bool)
    pressure_override = np.zeros(total)

    pos = 0
    while pos < total:
        label = names[rng.choice(len(names), p=seg_p)]
        lo, hi = cfg.durations.get(label, DEFAULT_DURATIONS[label])
        n = min(int(round(rng.uniform(lo, hi) * rate)), total - pos)
        if n < 2:
            break
        s, y, v = maneuver_channels(label, n, rate, rng)
        steer[pos:pos + n] = s
        yaw[pos:pos + n] = y
        speed[pos:pos + n] = v
        labels[pos:pos + n] = SYMBOL_TO_ID[label]
        if cfg.anomaly_rate > 0 and rng.uniform(0, 1) < cfg.anomaly_rate:
            length = int(round(rng.uniform(0.8, 1.6) * rate))
            length = min(length, n)
            start = pos + int(rng.uniform(0, max(n - length, 1)))
            kind = ANOMALY_KINDS[rng.choice(len(ANOMALY_KINDS))]
            _inject_anomaly(kind, steer, speed, pressure_override, rate,
                            start, length, rng)
            anomaly[start:start + length] = True
        pos += n

    # derived channels from the clean signals
    steer_speed = np.gradient(steer) * rate
    accel = np.gradient(speed) * rate
    pedal_angle = np.clip(15.0 + 10.0 * np.maximum(accel, 0.0), 0.0, 90.0)
    pedal_pressure = np.clip(0.05 + 0.35 * np.maximum(-accel, 0.0), 0.0, 1.0)
    spike = pressure_override < 0
    pedal_angle[spike] = 80.0
    override = pressure_override > 0
    pedal_pressure[override] = pressure_override[override]

    scale = cfg.noise / 0.02 if cfg.noise > 0 else 0.0
    if scale > 0:
        steer = steer + rng.normal(0, 1.5 * scale, total)
        steer_speed = steer_speed + rng.normal(0, 2.0 * scale, total)
        speed = speed + rng.normal(0, 0.15 * scale, total)
        yaw = yaw + rng.normal(0, 0.4 * scale, total)
        pedal_angle = pedal_angle + rng.normal(0, 1.0 * scale, total)
        pedal_pressure = np.clip(
            pedal_pressure + rng.normal(0, 0.01 * scale, total), 0.0, 1.0)

    values = np.stack([steer, steer_speed, speed, yaw, pedal_angle,
                       pedal_pressure], axis=1)
    return Trace(sample_rate_hz=rate, values=values, labels=labels,
                 anomaly=anomaly, trace_id=trace_id)

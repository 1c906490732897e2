"""Labeled multi-channel driving traces and CSV ingestion/export.

CSV layout: header `t,steer_angle,steer_speed,speed,yaw,pedal_angle,
pedal_pressure,label[,anomaly]`, one row per sample, labels from the
11-name maneuver vocabulary.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError
from ..model.config import MANEUVERS, SYMBOL_TO_ID

CHANNEL_NAMES = ("steer_angle", "steer_speed", "speed", "yaw",
                 "pedal_angle", "pedal_pressure")
NUM_CHANNELS = len(CHANNEL_NAMES)


@dataclass
class Trace:
    sample_rate_hz: float
    values: np.ndarray            # (N, 6) float64, CHANNEL_NAMES order
    labels: np.ndarray            # (N,) int maneuver ids
    anomaly: np.ndarray = None    # (N,) bool ground-truth mask
    trace_id: str = "trace"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.anomaly is None:
            self.anomaly = np.zeros(len(self.labels), dtype=bool)
        self.anomaly = np.asarray(self.anomaly, dtype=bool)
        if self.sample_rate_hz <= 0:
            raise DataError("sample_rate_hz must be positive")
        n = self.values.shape[0]
        if self.values.ndim != 2 or self.values.shape[1] != NUM_CHANNELS:
            raise DataError(f"trace values must be (N, {NUM_CHANNELS})")
        if len(self.labels) != n or len(self.anomaly) != n:
            raise DataError("channel/label/anomaly lengths differ")

    def __len__(self):
        return self.values.shape[0]


def ingest_csv(path) -> Trace:
    """Parse a trace CSV; sample rate is inferred from the time column."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        expected = ["t", *CHANNEL_NAMES, "label"]
        has_anomaly = header == expected + ["anomaly"]
        if not has_anomaly and header != expected:
            missing = set(expected) - set(header)
            raise DataError(f"{path}: bad header, missing columns {sorted(missing)}")
        times, rows, labels, anomaly = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                times.append(float(row[0]))
                rows.append([float(v) for v in row[1:1 + NUM_CHANNELS]])
            except ValueError:
                raise DataError(f"{path}:{lineno}: unparseable number") from None
            label = row[1 + NUM_CHANNELS]
            if label not in SYMBOL_TO_ID or label not in MANEUVERS:
                raise DataError(f"{path}:{lineno}: unknown label {label!r}")
            labels.append(SYMBOL_TO_ID[label])
            anomaly.append(row[-1] not in ("0", "") if has_anomaly else False)
    if len(times) < 2:
        raise DataError(f"{path}: need at least 2 samples to infer rate")
    times = np.asarray(times)
    dt = np.diff(times)
    if np.any(dt <= 0):
        bad = int(np.argmax(dt <= 0)) + 2
        raise DataError(f"{path}: non-monotonic time at row {bad}")
    if not np.allclose(dt, dt[0], rtol=1e-6, atol=1e-9):
        raise DataError(f"{path}: non-uniform sample spacing")
    import os
    return Trace(sample_rate_hz=1.0 / dt[0], values=np.asarray(rows),
                 labels=np.asarray(labels), anomaly=np.asarray(anomaly),
                 trace_id=os.path.splitext(os.path.basename(str(path)))[0])


def export_csv(trace: Trace, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", *CHANNEL_NAMES, "label", "anomaly"])
        dt = 1.0 / trace.sample_rate_hz
        for i in range(len(trace)):
            writer.writerow([
                format(i * dt, ".6f"),
                *(format(v, ".17g") for v in trace.values[i]),
                MANEUVERS[trace.labels[i]],
                int(trace.anomaly[i]),
            ])

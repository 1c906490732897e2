"""Prepared window store on disk, plus content hashing for provenance.

A store directory holds .npy arrays per split (npy has no timestamps, so
reruns with identical inputs are byte-identical), the scaler and label
statistics as JSON, and a meta.json with counts and resolved settings.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .data.pipeline import LabelStats, ScalerParams
from .errors import DataError
from .model.train import WindowArrays

_SPLIT_FIELDS = ("inputs", "targets", "majority", "ids", "anomaly_fraction",
                 "max_speed")


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def save_store(path, train: WindowArrays, test: WindowArrays,
               scaler: ScalerParams, stats: LabelStats, meta: dict):
    os.makedirs(path, exist_ok=True)
    for split, arrays in (("train", train), ("test", test)):
        for name in _SPLIT_FIELDS:
            np.save(os.path.join(path, f"{split}_{name}.npy"),
                    getattr(arrays, name))
    _write_json(os.path.join(path, "scaler.json"), scaler.to_dict())
    _write_json(os.path.join(path, "label_stats.json"), stats.to_dict())
    _write_json(os.path.join(path, "meta.json"), meta)


def _load_split(path, split) -> WindowArrays:
    arrays = {}
    for name in _SPLIT_FIELDS:
        f = os.path.join(path, f"{split}_{name}.npy")
        if not os.path.exists(f):
            raise DataError(f"store is missing {f}")
        arrays[name] = np.load(f)
    return WindowArrays(**arrays)


def load_store(path):
    for name in ("scaler.json", "label_stats.json", "meta.json"):
        if not os.path.exists(os.path.join(path, name)):
            raise DataError(f"store is missing {os.path.join(path, name)}")
    train = _load_split(path, "train")
    test = _load_split(path, "test")
    with open(os.path.join(path, "scaler.json")) as fh:
        scaler = ScalerParams.from_dict(json.load(fh))
    with open(os.path.join(path, "label_stats.json")) as fh:
        stats = LabelStats.from_dict(json.load(fh))
    with open(os.path.join(path, "meta.json")) as fh:
        meta = json.load(fh)
    return train, test, scaler, stats, meta


def hash_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def store_hash(path) -> str:
    """sha256 over the store's file names and contents, in sorted order."""
    h = hashlib.sha256()
    for name in sorted(os.listdir(path)):
        if name == "manifest.json":
            continue
        h.update(name.encode())
        h.update(bytes.fromhex(hash_file(os.path.join(path, name))))
    return h.hexdigest()

"""Bit-exact parameter persistence.

File layout: magic+version line, then per-parameter records (name line,
space-separated shape line, raw row-major little-endian float32 data),
closed by an "END <count>" line.
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from ..errors import CheckpointError

MAGIC = b"DRIVEADCKPT 1\n"


def save_checkpoint(params, path):
    params = list(params)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for p in params:
            fh.write(p.name.encode("utf-8") + b"\n")
            fh.write(" ".join(str(d) for d in p.value.shape).encode("ascii") + b"\n")
            fh.write(np.ascontiguousarray(p.value, dtype="<f4").tobytes())
        fh.write(f"END {len(params)}\n".encode("ascii"))


def _read_line(fh):
    line = bytearray()
    while True:
        ch = fh.read(1)
        if not ch:
            raise CheckpointError("truncated checkpoint file")
        if ch == b"\n":
            return bytes(line)
        line += ch


def load_checkpoint(path) -> "OrderedDict[str, np.ndarray]":
    """Read all records; raises CheckpointError on any structural damage."""
    out = OrderedDict()
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if len(magic) < len(MAGIC):
            raise CheckpointError("truncated checkpoint file")
        if magic != MAGIC:
            if magic.startswith(b"DRIVEADCKPT"):
                raise CheckpointError("unsupported checkpoint format version")
            raise CheckpointError("not a checkpoint file (bad magic)")
        while True:
            name_line = _read_line(fh)
            if name_line.startswith(b"END "):
                try:
                    count = int(name_line[4:])
                except ValueError as exc:
                    raise CheckpointError("corrupt end-of-file record") from exc
                if count != len(out):
                    raise CheckpointError(
                        f"record count mismatch: header {count}, found {len(out)}")
                if fh.read(1):
                    raise CheckpointError("trailing bytes after end record")
                return out
            name = name_line.decode("utf-8")
            shape_line = _read_line(fh)
            try:
                shape = tuple(int(x) for x in shape_line.split())
            except ValueError as exc:
                raise CheckpointError(f"bad shape line for {name!r}") from exc
            n = int(np.prod(shape, dtype=np.int64)) if shape else 1
            raw = fh.read(4 * n)
            if len(raw) < 4 * n:
                raise CheckpointError(f"truncated data for {name!r}")
            if name in out:
                raise CheckpointError(f"duplicate parameter {name!r}")
            out[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()


def load_into(params, path):
    """Load a checkpoint into live params; names and shapes must match."""
    state = load_checkpoint(path)
    params = list(params)
    names = {p.name for p in params}
    for p in params:
        if p.name not in state:
            raise CheckpointError(f"checkpoint missing parameter {p.name!r}")
        arr = state[p.name]
        if arr.shape != p.value.shape:
            raise CheckpointError(
                f"shape mismatch for {p.name!r}: checkpoint {arr.shape}, "
                f"model {p.value.shape}")
        p.value[...] = arr.astype(p.value.dtype)
    extra = set(state) - names
    if extra:
        raise CheckpointError(f"checkpoint has unknown parameters: {sorted(extra)[:3]}")

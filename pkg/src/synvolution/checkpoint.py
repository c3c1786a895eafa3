"""Checkpoint container: a UTF-8 text header followed by raw float64 arrays.

Layout::

    synvolution-checkpoint 1
    config <key> <value>          (one per line, keys sorted)
    param <name> <d0,d1,...>      (one per array, declaration order)
    end
    <little-endian float64 data of every array, in the same order>

Scalars are stored with an empty shape field (``param name ``).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = ["FORMAT_VERSION", "save_checkpoint", "load_checkpoint", "CheckpointError"]

FORMAT_VERSION = 1
_MAGIC = "synvolution-checkpoint"


class CheckpointError(ValueError):
    pass


def _encode_value(v) -> str:
    text = repr(v) if isinstance(v, float) else str(v)
    if "\n" in text or " " in text:
        raise CheckpointError(f"config value {text!r} cannot contain whitespace")
    return text


def save_checkpoint(path, params: dict, config: dict) -> Path:
    path = Path(path)
    lines = [f"{_MAGIC} {FORMAT_VERSION}"]
    for key in sorted(config):
        lines.append(f"config {key} {_encode_value(config[key])}")
    blobs = []
    for name, arr in params.items():
        arr = np.asarray(arr, dtype=np.float64)
        lines.append(f"param {name} {','.join(str(s) for s in arr.shape)}")
        blobs.append(arr.astype("<f8").tobytes(order="C"))
    lines.append("end")
    header = ("\n".join(lines) + "\n").encode("utf-8")
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        for b in blobs:
            fh.write(b)
    tmp.replace(path)
    return path


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    """Return ``(params, config)``; config values are the raw header strings."""
    data = Path(path).read_bytes()
    end = data.find(b"\nend\n")
    if end < 0:
        raise CheckpointError(f"{path}: missing header terminator")
    header = data[:end].decode("utf-8").split("\n")
    body = memoryview(data)[end + len(b"\nend\n"):]
    magic = header[0].split(" ")
    if magic[0] != _MAGIC or len(magic) != 2:
        raise CheckpointError(f"{path}: not a checkpoint file")
    if int(magic[1]) != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {magic[1]}")
    config: dict[str, str] = {}
    specs = []
    for lineno, line in enumerate(header[1:], start=2):
        kind, _, rest = line.partition(" ")
        name, _, field = rest.partition(" ")
        if kind == "config":
            config[name] = field
        elif kind == "param":
            shape = tuple(int(s) for s in field.split(",")) if field else ()
            specs.append((name, shape))
        else:
            raise CheckpointError(f"{path}:{lineno}: unexpected header line {line!r}")
    params = {}
    offset = 0
    for name, shape in specs:
        count = int(np.prod(shape)) if shape else 1
        nbytes = 8 * count
        if offset + nbytes > len(body):
            raise CheckpointError(f"{path}: truncated data for {name}")
        params[name] = np.frombuffer(body[offset:offset + nbytes], dtype="<f8").reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(body):
        raise CheckpointError(f"{path}: {len(body) - offset} trailing bytes")
    return params, config

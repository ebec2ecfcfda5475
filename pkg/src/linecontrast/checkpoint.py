"""Single-file checkpoint container.

Layout: an 8-byte version tag, a little-endian uint32 header length, a JSON
header (encoder config, metadata, and the name/shape table in sorted name
order), then the raw row-major little-endian float64 data of every array in
table order. Save/load round-trips bit-exactly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .encoder import EncoderConfig

MAGIC = b"LNCT0001"


class ConfigMismatch(ValueError):
    pass


@dataclass
class Checkpoint:
    config: EncoderConfig
    arrays: dict[str, np.ndarray]
    meta: dict


def save_checkpoint(path, config: EncoderConfig, arrays: dict[str, np.ndarray],
                    meta: dict | None = None) -> None:
    names = sorted(arrays)
    header = {
        "config": asdict(config),
        "meta": meta or {},
        "params": [[name, list(arrays[name].shape)] for name in names],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for name in names:
            fh.write(np.ascontiguousarray(arrays[name], dtype="<f8").tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ConfigMismatch(f"bad version tag {magic!r}, expected {MAGIC!r}")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        try:
            config = EncoderConfig(**header["config"])
        except (TypeError, ValueError) as err:
            raise ConfigMismatch(f"checkpoint config rejected: {err}") from err
        arrays: dict[str, np.ndarray] = {}
        for name, shape in header["params"]:
            count = int(np.prod(shape))
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise ConfigMismatch(f"truncated data for parameter {name}")
            arrays[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
    return Checkpoint(config=config, arrays=arrays, meta=header.get("meta", {}))

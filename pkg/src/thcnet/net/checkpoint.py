"""Model checkpoint file.

Layout: magic "THCM", format version as little-endian u16, a u32 length
prefix followed by the ModelConfig as UTF-8 JSON, then every parameter
block as raw little-endian float64 in build order (the order of
`MultitaskModel.parameters()`).
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict

import numpy as np

from ..errors import BadMagic, VersionMismatch
from .model import ModelConfig, MultitaskModel

MAGIC = b"THCM"
VERSION = 1


def save_model(model: MultitaskModel, path):
    cfg = json.dumps(asdict(model.config), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", VERSION))
        fh.write(struct.pack("<I", len(cfg)))
        fh.write(cfg)
        for block in model.parameters().values():
            fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())


def load_model(path) -> MultitaskModel:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic(f"{path}: not a model checkpoint")
    if len(data) < 10:
        raise OSError(f"{path}: truncated checkpoint header")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != VERSION:
        raise VersionMismatch(f"{path}: checkpoint version {version}, expected {VERSION}")
    (cfg_len,) = struct.unpack_from("<I", data, 6)
    if len(data) < 10 + cfg_len:
        raise OSError(f"{path}: truncated checkpoint config")
    raw = json.loads(data[10 : 10 + cfg_len].decode("utf-8"))
    config = ModelConfig(**raw)
    model = MultitaskModel(config)

    offset = 10 + cfg_len
    for name, block in model.parameters().items():
        nbytes = block.size * 8
        if len(data) < offset + nbytes:
            raise OSError(f"{path}: truncated parameter block {name}")
        block[...] = np.frombuffer(data, dtype="<f8", count=block.size, offset=offset).reshape(
            block.shape
        )
        offset += nbytes
    if offset != len(data):
        raise OSError(f"{path}: {len(data) - offset} trailing bytes after parameters")
    return model

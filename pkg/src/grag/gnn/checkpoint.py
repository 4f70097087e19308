"""Binary model checkpoints: ``GRAGGNN1`` magic, u32 header length, JSON header,
then every parameter block as little-endian f64 in declaration order."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from grag.gnn.model import PARAM_NAMES, GcnModel

MAGIC = b"GRAGGNN1"


class CheckpointError(ValueError):
    pass


def save_checkpoint(model: GcnModel, path: str | Path, *, strategy: str = "", step: int = 0,
                    extra: dict | None = None) -> None:
    header = {
        "format_version": 1,
        "dims": list(model.dims),
        "L": model.num_layers,
        "dropout": model.dropout_rate,
        "strategy": strategy,
        "seed": model.seed,
        "step": step,
        "message_passing": model.message_passing,
        "params": [[k, name, list(arr.shape)] for k, name, arr in model.parameters()],
        "extra": extra or {},
    }
    raw_header = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(raw_header)))
        fh.write(raw_header)
        for _, _, arr in model.parameters():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> tuple[GcnModel, dict]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a GRAGGNN1 checkpoint")
    (hlen,) = struct.unpack_from("<I", data, 8)
    header = json.loads(data[12:12 + hlen].decode("utf-8"))
    off = 12 + hlen
    layers: list[dict[str, np.ndarray]] = [{} for _ in range(header["L"])]
    for k, name, shape in header["params"]:
        if name not in PARAM_NAMES:
            raise CheckpointError(f"unknown parameter block {name!r}")
        count = int(np.prod(shape))
        if off + 8 * count > len(data):
            raise CheckpointError(f"{path}: truncated at block {k}/{name}")
        layers[k][name] = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(shape).copy()
        off += 8 * count
    model = GcnModel(layers, header["dropout"], header["seed"], header["message_passing"])
    return model, header

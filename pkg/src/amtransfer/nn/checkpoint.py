"""Model checkpoint container.

Layout (all integers little-endian):

    bytes 0..3    magic b"MPAE"
    bytes 4..7    uint32 format version (currently 1)
    bytes 8..15   uint64 header length in bytes
    header        UTF-8 JSON: layer specs, input shape, dtype, training
                  config, loss history, and a tensor manifest with byte
                  offsets into the blob section
    blob          raw little-endian float32 tensors, row-major, in
                  manifest order

The container is self-describing and timestamp-free, so saving the same
model twice produces byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from .model import AutoencoderModel, LayerSpec

MAGIC = b"MPAE"
FORMAT_VERSION = 1

_SAVED_DTYPE = np.dtype("<f4")


def save_checkpoint(model: AutoencoderModel, path: str | Path) -> Path:
    """Serialize a model (parameters and batch-norm buffers) to ``path``."""
    path = Path(path)
    entries = []
    blobs = []
    offset = 0
    tensors = list(model.named_parameters()) + list(model.named_buffers())
    for name, tensor in tensors:
        raw = np.ascontiguousarray(tensor, dtype=_SAVED_DTYPE).tobytes()
        entries.append(
            {
                "name": name,
                "shape": list(tensor.shape),
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        blobs.append(raw)
        offset += len(raw)
    header = {
        "format_version": FORMAT_VERSION,
        "layer_specs": [s.to_dict() for s in model.specs],
        "input_shape": list(model.input_shape),
        "dtype": model.dtype.name,
        "seed": model.seed,
        "training_config": model.training_config,
        "loss_history": model.loss_history,
        "tensors": entries,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.uint32(FORMAT_VERSION).tobytes())
        fh.write(np.uint64(len(header_bytes)).tobytes())
        fh.write(header_bytes)
        for raw in blobs:
            fh.write(raw)
    return path


def load_checkpoint(path: str | Path) -> AutoencoderModel:
    """Rebuild a model from a container written by :func:`save_checkpoint`."""
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise ValidationError(f"{path} is not a model checkpoint (bad magic)")
    version = int(np.frombuffer(data[4:8], dtype="<u4")[0])
    if version != FORMAT_VERSION:
        raise ValidationError(f"unsupported checkpoint format version {version}")
    header_len = int(np.frombuffer(data[8:16], dtype="<u8")[0])
    header = json.loads(data[16 : 16 + header_len].decode("utf-8"))
    blob = data[16 + header_len :]

    specs = [LayerSpec.from_dict(doc) for doc in header["layer_specs"]]
    model = AutoencoderModel.build(
        specs,
        input_shape=tuple(header["input_shape"]),
        seed=header.get("seed", 0),
        dtype=np.dtype(header["dtype"]),
    )
    model.training_config = header.get("training_config", {})
    model.loss_history = list(header.get("loss_history", []))

    available = {name: t for name, t in model.named_parameters()}
    available.update(dict(model.named_buffers()))
    for entry in header["tensors"]:
        name = entry["name"]
        if name not in available:
            raise ValidationError(f"checkpoint tensor {name!r} not in model")
        raw = blob[entry["offset"] : entry["offset"] + entry["nbytes"]]
        values = np.frombuffer(raw, dtype=_SAVED_DTYPE).reshape(entry["shape"])
        target = available[name]
        if tuple(values.shape) != tuple(target.shape):
            raise ValidationError(
                f"checkpoint tensor {name!r} shape {values.shape} != {target.shape}"
            )
        target[...] = values.astype(target.dtype)
    return model

"""Versioned binary model checkpoints.

Layout: ``b"DFCK"`` | u16 version | u32 header length | JSON header |
raw little-endian arrays | u32 CRC-32 of everything before it.
"""
from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from ..network import network_from_dict, network_to_dict

MAGIC = b"DFCK"
VERSION = 1
_ARRAYS = ("weight", "bias", "mask", "v_weight", "v_bias")


class CheckpointError(ValueError):
    pass


def checkpoint_save(model):
    blobs = []
    offset = 0
    layers = []
    for layer in model.weight_layers:
        entry = {"bits": layer.bits, "arrays": {}}
        for name in _ARRAYS:
            arr = np.ascontiguousarray(getattr(layer, name))
            raw = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
            entry["arrays"][name] = [list(arr.shape), offset, len(raw)]
            blobs.append(raw)
            offset += len(raw)
        layers.append(entry)
    header = {
        "network": network_to_dict(model.net),
        "seed": model.seed,
        "dtype": model.dtype.str,
        "quantize_activations": model.quantize_activations,
        "act_bits": model.act_bits,
        "epochs_trained": model.epochs_trained,
        "layers": layers,
    }
    head = json.dumps(header, sort_keys=True).encode()
    body = MAGIC + struct.pack("<HI", VERSION, len(head)) + head + b"".join(blobs)
    return body + struct.pack("<I", zlib.crc32(body))


def checkpoint_restore(data):
    from .model import Model

    data = bytes(data)
    if len(data) < 14 or data[:4] != MAGIC:
        raise CheckpointError("not a model checkpoint")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise CheckpointError("checkpoint CRC mismatch (corrupted)")
    version, head_len = struct.unpack("<HI", body[4:10])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    header = json.loads(body[10:10 + head_len])
    payload = body[10 + head_len:]
    dtype = np.dtype(header["dtype"])
    model = Model(network_from_dict(header["network"]), seed=header["seed"], dtype=dtype,
                  quantize_activations=header["quantize_activations"],
                  act_bits=header["act_bits"], init=False)
    model.epochs_trained = header["epochs_trained"]
    for layer, entry in zip(model.weight_layers, header["layers"]):
        layer.bits = entry["bits"]
        for name, (shape, off, size) in entry["arrays"].items():
            arr = np.frombuffer(payload, dtype=dtype.newbyteorder("<"), count=size // dtype.itemsize,
                                offset=off).astype(dtype).reshape(shape)
            setattr(layer, name, arr)
    return model

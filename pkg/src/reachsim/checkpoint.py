"""Versioned binary checkpoint files.

Layout: magic ``RSCK`` | u32 format version | u64 cumulative step count |
u64 config length | config text (UTF-8) | u64 manifest length | manifest
JSON | concatenated little-endian float32 arrays. The manifest lists
(name, shape, offset) for every array plus a free-form ``extra`` dict
(optimizer scalars, RNG state). Files round-trip bit-exactly.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

MAGIC = b"RSCK"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    step: int
    config_text: str
    arrays: dict  # name -> float32 ndarray
    extra: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION


def save_checkpoint(path, ckpt):
    manifest = {"arrays": [], "extra": ckpt.extra}
    offset = 0
    blobs = []
    for name, arr in ckpt.arrays.items():
        a = np.ascontiguousarray(arr, dtype="<f4")
        manifest["arrays"].append(
            {"name": name, "shape": list(a.shape), "offset": offset}
        )
        blob = a.tobytes()
        blobs.append(blob)
        offset += len(blob)
    config_bytes = ckpt.config_text.encode("utf-8")
    manifest_bytes = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", ckpt.version))
        fh.write(struct.pack("<Q", ckpt.step))
        fh.write(struct.pack("<Q", len(config_bytes)))
        fh.write(config_bytes)
        fh.write(struct.pack("<Q", len(manifest_bytes)))
        fh.write(manifest_bytes)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ValidationError(f"{path}: not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != FORMAT_VERSION:
        raise ValidationError(f"{path}: unsupported checkpoint version {version}")
    (step,) = struct.unpack_from("<Q", data, 8)
    (config_len,) = struct.unpack_from("<Q", data, 16)
    pos = 24
    config_text = data[pos : pos + config_len].decode("utf-8")
    pos += config_len
    (manifest_len,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    manifest = json.loads(data[pos : pos + manifest_len].decode("utf-8"))
    pos += manifest_len
    arrays = {}
    for entry in manifest["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = pos + entry["offset"]
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=start)
        arrays[entry["name"]] = arr.reshape(shape).copy()
    return Checkpoint(
        step=step,
        config_text=config_text,
        arrays=arrays,
        extra=manifest.get("extra", {}),
        version=version,
    )

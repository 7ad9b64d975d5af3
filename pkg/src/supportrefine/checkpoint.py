"""Binary checkpoint format.

Layout::

    8 bytes   magic  b"SRCKPT\\x00\\x01"
    4 bytes   format version (uint32, little-endian)
    8 bytes   header length N (uint64, little-endian)
    N bytes   UTF-8 JSON header: config, tokenizer fingerprint, segments,
              dtype, payload sha256, metadata
    ...       parameters as little-endian IEEE-754, segments in header order
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch

from .model import ModelConfig, TinyTransformer

MAGIC = b"SRCKPT\x00\x01"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class FingerprintMismatchError(CheckpointError):
    pass


@dataclass
class ModelCheckpoint:
    config: ModelConfig
    parameters: dict[str, np.ndarray]
    tokenizer_fingerprint: str
    format_version: int = FORMAT_VERSION
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = sum(a.size for a in self.parameters.values())
        if n != self.config.parameter_count():
            raise CheckpointError(f"parameter count {n} does not match config ({self.config.parameter_count()})")
        if not all(np.isfinite(a).all() for a in self.parameters.values()):
            raise CheckpointError("checkpoint contains non-finite parameters")

    @classmethod
    def from_model(cls, model: TinyTransformer, tokenizer_fingerprint: str, metadata: Optional[dict] = None):
        params = {name: p.detach().numpy().copy() for name, p in model.named_parameters()}
        return cls(model.config, params, tokenizer_fingerprint, metadata=dict(metadata or {}))

    def build_model(self) -> TinyTransformer:
        model = TinyTransformer(self.config)
        with torch.no_grad():
            for name, p in model.named_parameters():
                p.copy_(torch.from_numpy(self.parameters[name]))
        return model

    def flat(self) -> np.ndarray:
        return np.concatenate([a.reshape(-1) for a in self.parameters.values()])


def save_checkpoint(ckpt: ModelCheckpoint, path) -> None:
    dtype = np.dtype("<f8" if ckpt.config.dtype == "float64" else "<f4")
    payload = b"".join(np.ascontiguousarray(a, dtype=dtype).tobytes() for a in ckpt.parameters.values())
    header = {
        "config": ckpt.config.to_dict(),
        "tokenizer_fingerprint": ckpt.tokenizer_fingerprint,
        "dtype": dtype.str,
        "segments": [{"name": k, "shape": list(a.shape)} for k, a in ckpt.parameters.items()],
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
        "metadata": ckpt.metadata,
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IQ", FORMAT_VERSION, len(hbytes)))
        f.write(hbytes)
        f.write(payload)
    os.replace(tmp, path)


def load_checkpoint(path, expected_fingerprint: Optional[str] = None) -> ModelCheckpoint:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < len(MAGIC) + 12 or blob[:len(MAGIC)] != MAGIC:
        raise CorruptCheckpointError(f"{path}: not a checkpoint (bad magic or truncated)")
    version, hlen = struct.unpack_from("<IQ", blob, len(MAGIC))
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    start = len(MAGIC) + 12
    try:
        header = json.loads(blob[start:start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise CorruptCheckpointError(f"{path}: unreadable header") from None
    payload = blob[start + hlen:]
    if hashlib.sha256(payload).hexdigest() != header.get("payload_sha256"):
        raise CorruptCheckpointError(f"{path}: payload checksum mismatch (truncated or corrupt)")
    fp = header["tokenizer_fingerprint"]
    if expected_fingerprint is not None and fp != expected_fingerprint:
        raise FingerprintMismatchError(f"{path}: tokenizer fingerprint {fp[:12]} != expected {expected_fingerprint[:12]}")
    config = ModelConfig(**header["config"])
    dtype = np.dtype(header["dtype"])
    params, off = {}, 0
    for seg in header["segments"]:
        n = int(np.prod(seg["shape"], dtype=np.int64))
        arr = np.frombuffer(payload, dtype=dtype, count=n, offset=off).reshape(seg["shape"])
        params[seg["name"]] = arr.astype(dtype.newbyteorder("="), copy=True)
        off += n * dtype.itemsize
    if off != len(payload):
        raise CorruptCheckpointError(f"{path}: payload size does not match segments")
    return ModelCheckpoint(config, params, fp, version, header.get("metadata", {}))

"""Binary model checkpoints.

Layout (all integers little-endian):

    magic    4 bytes  b"NNCK"
    version  u32      currently 1
    arch     u8       architecture id
    hyper    u32 byte length, then that many bytes of "key=value\\n" lines
    count    u32      number of tensors
    tensors  repeated, sorted by name:
               name   u16 length + UTF-8 bytes
               rank   u8
               dims   u32 each
               data   float32 values, C order
    crc      u32      CRC-32 of everything above
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from ..errors import ArchMismatch, BadMagic, ChecksumFailed, Truncated, VersionUnsupported
from .models import ARCH_IDS, SequenceModel, build_model

MAGIC = b"NNCK"
VERSION = 1

_ID_TO_ARCH = {v: k for k, v in ARCH_IDS.items()}


def _encode_hyper(hyper: dict) -> bytes:
    lines = []
    for key in sorted(hyper):
        lines.append(f"{key}={hyper[key]}\n")
    return "".join(lines).encode("utf-8")


def _decode_hyper(blob: bytes) -> dict:
    out = {}
    for line in blob.decode("utf-8").splitlines():
        if not line:
            continue
        key, _, value = line.partition("=")
        try:
            out[key] = int(value)
        except ValueError:
            try:
                out[key] = float(value)
            except ValueError:
                out[key] = value
    return out


def save_checkpoint(path, model: SequenceModel) -> None:
    hyper = dict(model.hyper)
    hyper["param_count"] = model.param_count
    for key, value in model.meta.items():
        hyper[f"meta.{key}"] = value
    blob = _encode_hyper(hyper)

    parts = [MAGIC, struct.pack("<IB", VERSION, ARCH_IDS[model.arch])]
    parts.append(struct.pack("<I", len(blob)))
    parts.append(blob)
    names = sorted(model.params)
    parts.append(struct.pack("<I", len(names)))
    for name in names:
        value = np.ascontiguousarray(model.params[name].value, dtype=np.float32)
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", value.ndim))
        parts.append(struct.pack(f"<{value.ndim}I", *value.shape))
        parts.append(value.tobytes())
    payload = b"".join(parts)
    payload += struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(payload)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise Truncated("checkpoint ends mid-record")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path) -> SequenceModel:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic("not a model checkpoint")
    if len(data) < 8:
        raise Truncated("checkpoint ends mid-record")
    stored_crc = struct.unpack("<I", data[-4:])[0]
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != stored_crc:
        raise ChecksumFailed("checkpoint checksum does not match")

    r = _Reader(data[:-4])
    r.take(4)
    version, arch_id = r.unpack("<IB")
    if version != VERSION:
        raise VersionUnsupported(f"checkpoint version {version} not supported")
    if arch_id not in _ID_TO_ARCH:
        raise ArchMismatch(f"unknown architecture id {arch_id}")
    arch = _ID_TO_ARCH[arch_id]

    (hyper_len,) = r.unpack("<I")
    hyper = _decode_hyper(r.take(hyper_len))
    expected_count = hyper.pop("param_count", None)
    meta = {k[5:]: hyper.pop(k) for k in list(hyper) if k.startswith("meta.")}

    (n_tensors,) = r.unpack("<I")
    tensors = {}
    for _ in range(n_tensors):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        (rank,) = r.unpack("<B")
        dims = r.unpack(f"<{rank}I") if rank else ()
        n_values = int(np.prod(dims, dtype=np.int64)) if dims else 1
        raw = r.take(4 * n_values)
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()

    model = build_model(arch, hyper)
    model.meta = meta
    expected_names = set(model.params)
    if set(tensors) != expected_names:
        missing = expected_names - set(tensors)
        extra = set(tensors) - expected_names
        raise ArchMismatch(
            f"tensor names do not match architecture {arch!r}"
            f" (missing {sorted(missing)}, unexpected {sorted(extra)})")
    for name, value in tensors.items():
        param = model.params[name]
        if param.value.shape != value.shape:
            raise ArchMismatch(
                f"tensor {name!r} has shape {value.shape}, expected {param.value.shape}")
        param.value = value
        param.grad = np.zeros_like(value)
    if expected_count is not None and expected_count != model.param_count:
        raise ArchMismatch(
            f"parameter count {model.param_count} does not match stored {expected_count}")
    return model

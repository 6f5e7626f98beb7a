import struct
import zlib

import numpy as np
import pytest

from crosstalk.errors import (
    ArchMismatch,
    BadMagic,
    ChecksumFailed,
    Truncated,
    VersionUnsupported,
)
from crosstalk.neural.checkpoint import load_checkpoint, save_checkpoint
from crosstalk.neural.models import build_gd_backbone, build_linear, forward


def _model():
    m = build_gd_backbone(8, head="two_way", hidden=4, seed=9)
    rng = np.random.default_rng(5)
    for p in m.params.values():
        p.value[...] = rng.standard_normal(p.value.shape).astype(np.float32)
    m.meta = {"features": "stub1024", "threshold": 0.5, "median": 11}
    return m


def test_round_trip_bit_exact(tmp_path):
    m = _model()
    p = tmp_path / "m.nnck"
    save_checkpoint(p, m)
    back = load_checkpoint(p)
    assert back.arch == m.arch and back.hyper == m.hyper
    assert back.meta == {"features": "stub1024", "threshold": 0.5, "median": 11}
    for k in m.params:
        assert back.params[k].value.tobytes() == m.params[k].value.tobytes()
    x = np.random.default_rng(0).standard_normal((30, 8)).astype(np.float32)
    assert np.array_equal(forward(back, x), forward(m, x))


def test_save_is_deterministic(tmp_path):
    m = _model()
    a, b = tmp_path / "a.nnck", tmp_path / "b.nnck"
    save_checkpoint(a, m)
    save_checkpoint(b, m)
    assert a.read_bytes() == b.read_bytes()


def test_flipped_byte_fails_checksum(tmp_path):
    p = tmp_path / "m.nnck"
    save_checkpoint(p, _model())
    blob = bytearray(p.read_bytes())
    blob[len(blob) // 2] ^= 0xFF
    p.write_bytes(bytes(blob))
    with pytest.raises(ChecksumFailed):
        load_checkpoint(p)


def test_bad_magic_reported_before_checksum(tmp_path):
    p = tmp_path / "m.nnck"
    save_checkpoint(p, _model())
    blob = bytearray(p.read_bytes())
    blob[:4] = b"ZZZZ"
    p.write_bytes(bytes(blob))
    with pytest.raises(BadMagic):
        load_checkpoint(p)


def test_future_version_rejected(tmp_path):
    p = tmp_path / "m.nnck"
    save_checkpoint(p, _model())
    body = bytearray(p.read_bytes())[:-4]
    body[4:8] = struct.pack("<I", 2)
    body += struct.pack("<I", zlib.crc32(bytes(body)) & 0xFFFFFFFF)
    p.write_bytes(bytes(body))
    with pytest.raises(VersionUnsupported):
        load_checkpoint(p)


def test_renamed_tensor_is_arch_mismatch(tmp_path):
    m = build_linear(3, 2, seed=0)
    m.params["out.weights"] = m.params.pop("out.weight")
    p = tmp_path / "m.nnck"
    save_checkpoint(p, m)
    with pytest.raises(ArchMismatch):
        load_checkpoint(p)


def test_reshaped_tensor_is_arch_mismatch(tmp_path):
    m = build_linear(3, 2, seed=0)
    m.params["out.weight"].value = np.zeros((3, 3), dtype=np.float32)
    p = tmp_path / "m.nnck"
    save_checkpoint(p, m)
    with pytest.raises(ArchMismatch):
        load_checkpoint(p)


def test_short_record_is_truncated(tmp_path):
    p = tmp_path / "m.nnck"
    save_checkpoint(p, _model())
    body = bytearray(p.read_bytes())[:-4]
    body = body[:-10]  # cut into the last tensor, then re-sign
    body += struct.pack("<I", zlib.crc32(bytes(body)) & 0xFFFFFFFF)
    p.write_bytes(bytes(body))
    with pytest.raises(Truncated):
        load_checkpoint(p)
    p.write_bytes(b"NNCK\x01")
    with pytest.raises(Truncated):
        load_checkpoint(p)


def test_empty_meta_round_trips(tmp_path):
    m = build_linear(3, 2, seed=1)
    p = tmp_path / "m.nnck"
    save_checkpoint(p, m)
    assert load_checkpoint(p).meta == {}

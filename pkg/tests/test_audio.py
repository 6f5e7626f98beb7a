import struct
import wave

import numpy as np
import pytest

from crosstalk.audio import (
    AudioBuffer,
    MixSpec,
    PIPELINE_RATE,
    mix_overlap,
    read_wav,
    synth_voice,
    write_wav,
)
from crosstalk.errors import (
    BadEncoding,
    BadSampleRate,
    NotMono,
    OffsetBeyondFirstSource,
    OutOfRangePitch,
    RateMismatch,
    Truncated,
)


def _ramp(n=1600):
    return AudioBuffer(np.linspace(-0.5, 0.5, n), PIPELINE_RATE)


# -- WAV I/O ----------------------------------------------------------------

def test_wav_round_trip_is_byte_identical(tmp_path):
    p1, p2 = tmp_path / "a.wav", tmp_path / "b.wav"
    write_wav(p1, _ramp())
    write_wav(p2, read_wav(p1))
    assert p1.read_bytes() == p2.read_bytes()


def test_wav_header_is_canonical_44_bytes(tmp_path):
    p = tmp_path / "a.wav"
    write_wav(p, _ramp(100))
    blob = p.read_bytes()
    assert len(blob) == 44 + 200
    assert blob[:4] == b"RIFF" and blob[8:12] == b"WAVE"
    assert blob[36:40] == b"data"


def test_wav_agrees_with_stdlib_writer(tmp_path):
    """Cross-check both directions against the wave module."""
    pcm = np.array([-32768, -1, 0, 1, 32767, 12345], dtype="<i2")
    theirs = tmp_path / "theirs.wav"
    with wave.open(str(theirs), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(PIPELINE_RATE)
        fh.writeframes(pcm.tobytes())
    audio = read_wav(theirs)
    assert np.array_equal(np.rint(audio.samples * 32768.0).astype(np.int64), pcm)

    ours = tmp_path / "ours.wav"
    write_wav(ours, audio)
    with wave.open(str(ours), "rb") as fh:
        assert fh.getnchannels() == 1
        assert fh.getsampwidth() == 2
        assert fh.getframerate() == PIPELINE_RATE
        assert fh.readframes(fh.getnframes()) == pcm.tobytes()


def _write_header(path, rate=PIPELINE_RATE, channels=1, bits=16, fmt=1, payload=b"\0\0"):
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, fmt, channels, rate,
        rate * 2, 2, bits, b"data", len(payload),
    )
    path.write_bytes(header + payload)


def test_read_wav_field_errors(tmp_path):
    p = tmp_path / "x.wav"
    p.write_bytes(b"not a wav at all")
    with pytest.raises(BadEncoding):
        read_wav(p)

    _write_header(p, rate=44100)
    with pytest.raises(BadSampleRate):
        read_wav(p)

    _write_header(p, channels=2)
    with pytest.raises(NotMono):
        read_wav(p)

    _write_header(p, bits=8)
    with pytest.raises(BadEncoding):
        read_wav(p)

    _write_header(p, fmt=3)
    with pytest.raises(BadEncoding):
        read_wav(p)


def test_read_wav_truncation(tmp_path):
    p = tmp_path / "t.wav"
    write_wav(p, _ramp(100))
    p.write_bytes(p.read_bytes()[:100])  # cut inside the data chunk
    with pytest.raises(Truncated):
        read_wav(p)


def test_write_wav_rejects_foreign_rate(tmp_path):
    with pytest.raises(BadSampleRate):
        write_wav(tmp_path / "x.wav", AudioBuffer(np.zeros(10), 8000))


def test_audio_buffer_validation():
    with pytest.raises(NotMono):
        AudioBuffer(np.zeros((2, 10)))
    with pytest.raises(BadEncoding):
        AudioBuffer(np.array([0.0, np.nan]))
    with pytest.raises(BadSampleRate):
        AudioBuffer(np.zeros(10), 0)
    assert AudioBuffer(np.zeros(16000)).duration_s == 1.0


# -- synthetic voices -------------------------------------------------------

def test_synth_voice_shape_and_peak():
    a = synth_voice(120.0, 1.0, seed=3)
    assert len(a) == PIPELINE_RATE
    assert np.isclose(np.max(np.abs(a.samples)), 0.5)


def test_synth_voice_deterministic_and_seed_sensitive():
    a = synth_voice(200.0, 0.25, seed=5)
    b = synth_voice(200.0, 0.25, seed=5)
    c = synth_voice(200.0, 0.25, seed=6)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


def test_synth_voice_rejects_out_of_range_pitch():
    with pytest.raises(OutOfRangePitch):
        synth_voice(20.0, 1.0, seed=0)
    with pytest.raises(OutOfRangePitch):
        synth_voice(900.0, 1.0, seed=0)
    with pytest.raises(ValueError):
        synth_voice(100.0, 0.0, seed=0)


# -- overlap mixing ---------------------------------------------------------

def test_mix_length_and_span_labels():
    a = synth_voice(110.0, 1.0, seed=1)
    b = synth_voice(220.0, 0.3, seed=2)
    audio, labels = mix_overlap(a, b, MixSpec(offset_s=0.5))
    assert len(audio) == len(a)
    assert len(labels) == 100
    # second source occupies [0.5, 0.8): frames 50..79
    assert list(np.flatnonzero(labels.labels)) == list(range(50, 80))


def test_mix_extends_past_first_source():
    a = synth_voice(110.0, 0.5, seed=1)
    b = synth_voice(220.0, 0.5, seed=2)
    res = mix_overlap(a, b, MixSpec(offset_s=0.3))
    assert len(res.audio) == int(0.8 * PIPELINE_RATE)
    assert list(np.flatnonzero(res.labels.labels)) == list(range(30, 50))


def test_mix_is_linear_before_clipping():
    a = synth_voice(110.0, 0.5, seed=1)
    b = synth_voice(220.0, 0.5, seed=2)
    full = mix_overlap(a, b, MixSpec(offset_s=0.1)).audio.samples
    half = mix_overlap(
        AudioBuffer(a.samples * 0.5, a.sample_rate),
        AudioBuffer(b.samples * 0.5, b.sample_rate),
        MixSpec(offset_s=0.1),
    ).audio.samples
    assert np.allclose(half, full * 0.5, atol=1e-12)


def test_mix_gain_scales_second_source():
    a = AudioBuffer(np.zeros(1600))
    b = AudioBuffer(0.1 * np.ones(1600))
    res = mix_overlap(a, b, MixSpec(gain_db=20.0))
    assert np.allclose(res.audio.samples, 1.0)  # 0.1 * 10x
    assert res.clip_count == 0


def test_mix_clipping_is_saturating_and_counted():
    a = AudioBuffer(0.8 * np.ones(1600))
    b = AudioBuffer(0.8 * np.ones(1600))
    res = mix_overlap(a, b, MixSpec())
    assert res.clip_count == 1600
    assert res.clip_fraction == 1.0
    assert np.all(res.audio.samples == 1.0)


def test_mix_offset_validation():
    a = synth_voice(110.0, 0.2, seed=1)
    b = synth_voice(220.0, 0.2, seed=2)
    with pytest.raises(OffsetBeyondFirstSource):
        mix_overlap(a, b, MixSpec(offset_s=0.25))
    with pytest.raises(OffsetBeyondFirstSource):
        MixSpec(offset_s=-0.1)
    with pytest.raises(RateMismatch):
        mix_overlap(a, AudioBuffer(np.zeros(100), 8000), MixSpec())


def test_energy_labels_ignore_silent_stretches():
    # first source goes digitally silent in its second half
    samples = np.concatenate([0.3 * np.ones(8000), np.zeros(8000)])
    a = AudioBuffer(samples)
    b = AudioBuffer(0.3 * np.ones(16000))
    span = mix_overlap(a, b, MixSpec(label_mode="span")).labels.labels
    energy = mix_overlap(a, b, MixSpec(label_mode="energy")).labels.labels
    # span mode sees a's non-silent extent end at 0.5 s; energy mode agrees here
    assert span[:49].all() and not span[51:].any()
    assert energy[:48].all() and not energy[52:].any()


def test_energy_labels_respect_floor():
    a = AudioBuffer(1e-4 * np.ones(16000))  # -80 dBFS, below the default floor
    b = AudioBuffer(0.3 * np.ones(16000))
    res = mix_overlap(a, b, MixSpec(label_mode="energy"))
    assert not res.labels.labels.any()
    loud = mix_overlap(a, b, MixSpec(label_mode="energy", silence_floor_dbfs=-100.0))
    assert loud.labels.labels.all()

"""Audio I/O, deterministic synthetic voices, and labeled overlap mixing.

Only 16 kHz 16-bit mono PCM WAV is accepted; there is deliberately no
resampler.  Mixtures are saturating-clipped with a reported clip count
rather than rejected, since legitimate sums exceed unit amplitude.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadEncoding,
    BadSampleRate,
    NotMono,
    OffsetBeyondFirstSource,
    OutOfRangePitch,
    RateMismatch,
    Truncated,
)
from .frames import FrameLabels, binary_labels, frame_centers, n_frames_for_samples

PIPELINE_RATE = 16000
_INT16_SCALE = 32768.0


@dataclass
class AudioBuffer:
    """Mono PCM samples in [-1, 1] with their sample rate."""

    samples: np.ndarray
    sample_rate: int = PIPELINE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise NotMono(f"expected 1-d samples, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise BadEncoding("non-finite sample values")
        if self.sample_rate <= 0:
            raise BadSampleRate(f"sample_rate must be positive, got {self.sample_rate}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class MixSpec:
    """How to overlay a second source on a first one.

    ``label_mode`` selects how reference overlap labels are derived:
    ``span`` marks frames whose center lies inside both sources' non-silent
    extents (the annotation-style ground truth), ``energy`` marks frames
    where both sources' local RMS exceeds ``silence_floor_dbfs``.
    """

    offset_s: float = 0.0
    gain_db: float = 0.0
    label_mode: str = "span"
    silence_floor_dbfs: float = -40.0

    def __post_init__(self):
        if self.offset_s < 0:
            raise OffsetBeyondFirstSource(f"offset_s must be >= 0, got {self.offset_s}")
        if not np.isfinite(self.gain_db):
            raise ValueError("gain_db must be finite")
        if self.label_mode not in ("span", "energy"):
            raise ValueError(f"unknown label_mode {self.label_mode!r}")


@dataclass
class MixResult:
    audio: AudioBuffer
    labels: FrameLabels
    clip_count: int

    @property
    def clip_fraction(self) -> float:
        return self.clip_count / max(len(self.audio), 1)

    def __iter__(self):
        # allows ``audio, labels = mix_overlap(...)``
        return iter((self.audio, self.labels))


# --------------------------------------------------------------------------
# WAV I/O (canonical RIFF/WAVE, PCM-16 mono 16 kHz)
# --------------------------------------------------------------------------

def read_wav(path) -> AudioBuffer:
    """Read a 16 kHz 16-bit mono PCM WAV file.

    Amplitudes are scaled by 1/32768 into [-1, 1).  Raises a per-field
    error (:class:`BadEncoding`, :class:`BadSampleRate`, :class:`NotMono`,
    :class:`Truncated`) naming the offending header field.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise BadEncoding(f"{path}: missing RIFF/WAVE signature")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            if len(body) < 16:
                raise Truncated(f"{path}: fmt chunk shorter than 16 bytes")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            if len(body) < size:
                raise Truncated(
                    f"{path}: data chunk announces {size} bytes, {len(body)} present"
                )
            payload = body
        pos += 8 + size + (size & 1)  # chunks are word aligned

    if fmt is None:
        raise Truncated(f"{path}: no fmt chunk")
    if payload is None:
        raise Truncated(f"{path}: no data chunk")

    audio_format, n_channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if audio_format != 1 or bits != 16:
        raise BadEncoding(
            f"{path}: need PCM-16 (format tag 1, 16 bits), "
            f"got format tag {audio_format}, {bits} bits"
        )
    if sample_rate != PIPELINE_RATE:
        raise BadSampleRate(f"{path}: sample rate {sample_rate}, need {PIPELINE_RATE}")
    if n_channels != 1:
        raise NotMono(f"{path}: {n_channels} channels, need mono")
    if len(payload) % 2:
        raise Truncated(f"{path}: odd data chunk size {len(payload)}")

    pcm = np.frombuffer(payload, dtype="<i2")
    return AudioBuffer(pcm.astype(np.float64) / _INT16_SCALE, sample_rate)


def write_wav(path, audio: AudioBuffer) -> None:
    """Write PCM-16 mono with the canonical 44-byte header."""
    if audio.sample_rate != PIPELINE_RATE:
        raise BadSampleRate(
            f"refusing to write {audio.sample_rate} Hz, pipeline rate is {PIPELINE_RATE}"
        )
    pcm = np.clip(np.rint(audio.samples * _INT16_SCALE), -32768, 32767).astype("<i2")
    payload = pcm.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, 1, 1, audio.sample_rate,
        audio.sample_rate * 2, 2, 16,
        b"data", len(payload),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


# --------------------------------------------------------------------------
# Synthetic voices
# --------------------------------------------------------------------------

F0_MIN, F0_MAX = 50.0, 600.0


def synth_voice(f0_hz: float, duration_s: float, seed: int) -> AudioBuffer:
    """Deterministic harmonic stand-in for a voiced speech segment.

    Fundamental plus harmonics 2..5 at 1/k amplitude, with seeded vibrato
    and amplitude modulation of up to +-3%, peak-normalized to 0.5.
    """
    if not (F0_MIN <= f0_hz <= F0_MAX):
        raise OutOfRangePitch(f"f0 {f0_hz} Hz outside [{F0_MIN}, {F0_MAX}]")
    if duration_s <= 0:
        raise ValueError(f"duration_s must be positive, got {duration_s}")

    rate = PIPELINE_RATE
    n = int(round(duration_s * rate))
    t = np.arange(n) / rate
    rng = np.random.default_rng(seed)

    vib_depth = rng.uniform(0.01, 0.03)
    vib_rate = rng.uniform(4.0, 7.0)
    vib_phase = rng.uniform(0, 2 * np.pi)
    am_depth = rng.uniform(0.01, 0.03)
    am_rate = rng.uniform(1.0, 3.0)
    am_phase = rng.uniform(0, 2 * np.pi)
    harm_phases = rng.uniform(0, 2 * np.pi, size=5)

    inst_f0 = f0_hz * (1.0 + vib_depth * np.sin(2 * np.pi * vib_rate * t + vib_phase))
    phase = 2 * np.pi * np.cumsum(inst_f0) / rate
    x = np.zeros(n)
    for k in range(1, 6):
        x += np.sin(k * phase + harm_phases[k - 1]) / k
    x *= 1.0 + am_depth * np.sin(2 * np.pi * am_rate * t + am_phase)
    x *= 0.5 / np.max(np.abs(x))
    return AudioBuffer(x, rate)


# --------------------------------------------------------------------------
# Overlap mixing
# --------------------------------------------------------------------------

def _nonsilent_span_s(x: np.ndarray, rate: int) -> tuple[float, float] | None:
    """Extent between first and last non-zero samples, None for digital silence."""
    nz = np.flatnonzero(x)
    if len(nz) == 0:
        return None
    return nz[0] / rate, (nz[-1] + 1) / rate


def _rms_db_track(x: np.ndarray, rate: int, n_frames: int, win_s: float = 0.03) -> np.ndarray:
    """Per-frame dBFS of the RMS in a window centered on each frame center."""
    half = int(round(win_s * rate / 2))
    centers = np.rint(frame_centers(n_frames) * rate).astype(int)
    sq = np.concatenate(([0.0], np.cumsum(x * x)))
    lo = np.clip(centers - half, 0, len(x))
    hi = np.clip(centers + half, 0, len(x))
    counts = np.maximum(hi - lo, 1)
    rms = np.sqrt((sq[hi] - sq[lo]) / counts)
    return 20.0 * np.log10(np.maximum(rms, 1e-12))


def mix_overlap(a: AudioBuffer, b: AudioBuffer, spec: MixSpec) -> MixResult:
    """Sum two sources with an offset and gain; derive 10 ms overlap labels.

    Output length is ``max(len(a), offset + len(b))``; the sum saturates at
    [-1, 1] with the clip count reported on the result.
    """
    if a.sample_rate != b.sample_rate:
        raise RateMismatch(f"{a.sample_rate} Hz vs {b.sample_rate} Hz")
    rate = a.sample_rate
    offset = int(round(spec.offset_s * rate))
    if offset >= len(a):
        raise OffsetBeyondFirstSource(
            f"offset {spec.offset_s}s is past the first source ({a.duration_s}s)"
        )

    n_out = max(len(a), offset + len(b))
    gain = 10.0 ** (spec.gain_db / 20.0)
    track_a = np.zeros(n_out)
    track_a[: len(a)] = a.samples
    track_b = np.zeros(n_out)
    track_b[offset: offset + len(b)] = b.samples * gain

    mixed = track_a + track_b
    clip_count = int(np.count_nonzero(np.abs(mixed) > 1.0))
    mixed = np.clip(mixed, -1.0, 1.0)

    n_frames = n_frames_for_samples(n_out, rate)
    labels = np.zeros(n_frames, dtype=np.int8)
    if spec.label_mode == "span":
        span_a = _nonsilent_span_s(track_a, rate)
        span_b = _nonsilent_span_s(track_b, rate)
        if span_a is not None and span_b is not None:
            lo = max(span_a[0], span_b[0])
            hi = min(span_a[1], span_b[1])
            if hi > lo:
                centers = frame_centers(n_frames)
                labels[(centers >= lo) & (centers < hi)] = 1
    else:
        db_a = _rms_db_track(track_a, rate, n_frames)
        db_b = _rms_db_track(track_b, rate, n_frames)
        floor = spec.silence_floor_dbfs
        labels[(db_a > floor) & (db_b > floor)] = 1

    return MixResult(AudioBuffer(mixed, rate), binary_labels(labels), clip_count)

"""Acoustic feature extraction and feature-file ingestion.

Two feature families feed the detectors: 59-dimensional MFCC stacks
(19 statics without the energy coefficient + 20 deltas + 20 delta-deltas)
and high-dimensional pretrained embeddings read from FEAT files.  A
deterministic stub projection stands in for the embedding model in tests.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .audio import AudioBuffer
from .errors import BadMagic, SizeMismatch, TooShort, VersionUnsupported, WrongHop

FEAT_MAGIC = b"FEAT"
FEAT_VERSION = 1


@dataclass
class FeatureMatrix:
    """Frames x dimensions of features with hop metadata."""

    data: np.ndarray
    hop_ms: float = 10.0
    source: str = "mfcc"

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data))
        if not np.all(np.isfinite(self.data)):
            raise ValueError("feature values must be finite")
        if self.hop_ms not in (10.0, 20.0, 10, 20):
            raise WrongHop(f"hop_ms must be 10 or 20, got {self.hop_ms}")
        self.hop_ms = float(self.hop_ms)

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class MfccConfig:
    n_ceps: int = 20
    window_ms: int = 30
    hop_ms: int = 10
    n_mels: int = 26
    fft_size: int = 512
    preemphasis: float = 0.97
    delta_width: int = 2

    def __post_init__(self):
        if self.fft_size < self.window_ms * 16:  # window samples at 16 kHz
            raise ValueError("fft_size smaller than the analysis window")
        if self.n_ceps > self.n_mels:
            raise ValueError("n_ceps must not exceed n_mels")


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=8)
def _mel_filterbank(n_mels: int, fft_size: int, rate: int, f_lo: float, f_hi: float) -> np.ndarray:
    """Triangular filters evaluated at the FFT bin frequencies (n_mels x bins)."""
    n_bins = fft_size // 2 + 1
    bin_hz = np.arange(n_bins) * rate / fft_size
    edges = _mel_to_hz(np.linspace(_hz_to_mel(f_lo), _hz_to_mel(f_hi), n_mels + 2))
    fb = np.zeros((n_mels, n_bins))
    for m in range(n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        up = (bin_hz - lo) / (mid - lo)
        down = (hi - bin_hz) / (hi - mid)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
    return fb


@lru_cache(maxsize=8)
def _dct_matrix(n_ceps: int, n_mels: int) -> np.ndarray:
    """Orthonormal DCT-II rows c0..c(n_ceps-1)."""
    m = np.arange(n_mels)
    mat = np.zeros((n_ceps, n_mels))
    for k in range(n_ceps):
        mat[k] = np.cos(np.pi * k * (2 * m + 1) / (2 * n_mels))
    mat *= np.sqrt(2.0 / n_mels)
    mat[0] /= np.sqrt(2.0)
    return mat


def _regression_deltas(c: np.ndarray, width: int) -> np.ndarray:
    """Temporal regression derivative over +-width frames, edges repeated."""
    pad = np.concatenate([c[:1].repeat(width, axis=0), c, c[-1:].repeat(width, axis=0)])
    out = np.zeros_like(c)
    denom = 2.0 * sum(n * n for n in range(1, width + 1))
    for n in range(1, width + 1):
        out += n * (pad[width + n: width + n + len(c)] - pad[width - n: width - n + len(c)])
    return out / denom


def extract_mfcc(audio: AudioBuffer, cfg: MfccConfig = MfccConfig()) -> FeatureMatrix:
    """59-dim MFCC stack on the 10 ms raster.

    Per frame: pre-emphasis, Hamming window, magnitude FFT, triangular mel
    filters with log energies floored at 1e-10, orthonormal DCT-II keeping
    c0..c19.  Statics drop c0 (the energy coefficient); deltas and
    delta-deltas are computed over all of c0..c19.  The raw frame count
    ``1 + floor((n - window) / hop)`` is right-padded by edge repetition to
    exactly one frame per hop of signal (200 for 2 s).
    """
    rate = audio.sample_rate
    window = cfg.window_ms * rate // 1000
    hop = cfg.hop_ms * rate // 1000
    x = audio.samples.astype(np.float64)
    if len(x) < window:
        raise TooShort(f"{len(x)} samples, need at least {window}")

    if cfg.preemphasis:
        x = np.append(x[0], x[1:] - cfg.preemphasis * x[:-1])

    n_raw = 1 + (len(x) - window) // hop
    idx = np.arange(window)[None, :] + hop * np.arange(n_raw)[:, None]
    frames = x[idx] * np.hamming(window)

    spectrum = np.abs(np.fft.rfft(frames, cfg.fft_size, axis=1))
    fb = _mel_filterbank(cfg.n_mels, cfg.fft_size, rate, 0.0, rate / 2.0)
    logmel = np.log(np.maximum(spectrum @ fb.T, 1e-10))
    ceps = logmel @ _dct_matrix(cfg.n_ceps, cfg.n_mels).T

    d1 = _regression_deltas(ceps, cfg.delta_width)
    d2 = _regression_deltas(d1, cfg.delta_width)
    feats = np.hstack([ceps[:, 1:], d1, d2])

    target = len(audio) // hop
    if target > n_raw:
        feats = np.vstack([feats, feats[-1:].repeat(target - n_raw, axis=0)])
    return FeatureMatrix(feats, hop_ms=float(cfg.hop_ms), source="mfcc")


# --------------------------------------------------------------------------
# FEAT files (carrier for precomputed embeddings)
# --------------------------------------------------------------------------

def save_feature_file(path, fm: FeatureMatrix) -> None:
    data = np.ascontiguousarray(fm.data, dtype="<f4")
    header = struct.pack(
        "<4sIIIf", FEAT_MAGIC, FEAT_VERSION, fm.dim, fm.n_frames, fm.hop_ms
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def load_feature_file(path) -> FeatureMatrix:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 20 or blob[:4] != FEAT_MAGIC:
        raise BadMagic(f"{path}: not a FEAT file")
    version, dim, n_frames, hop_ms = struct.unpack_from("<IIIf", blob, 4)
    if version != FEAT_VERSION:
        raise VersionUnsupported(f"{path}: FEAT version {version}, support {FEAT_VERSION}")
    expected = 20 + 4 * dim * n_frames
    if len(blob) != expected:
        raise SizeMismatch(f"{path}: {len(blob)} bytes, header implies {expected}")
    data = np.frombuffer(blob[20:], dtype="<f4").reshape(n_frames, dim)
    return FeatureMatrix(data.copy(), hop_ms=float(hop_ms), source="external")


# --------------------------------------------------------------------------
# Deterministic embedding stub
# --------------------------------------------------------------------------

STUB_DIMS = (768, 1024)

# fixed per-column scale bringing statics, deltas, and delta-deltas to a
# comparable range before mixing, so no column dominates the projection
_STUB_SCALE = np.concatenate([
    np.full(19, 0.5), np.full(20, 2.0), np.full(20, 4.0),
])

_STUB_LAGS = np.arange(30, 241, 4)     # 2..15 ms at 16 kHz, the voice F0 range
_STUB_HARMONIC_SCALE = 3.0


def _harmonic_block(audio: AudioBuffer) -> np.ndarray:
    """Per-frame normalized autocorrelation sampled over voice-pitch lags.

    The truncated cepstrum smooths over harmonic fine structure; keeping a
    direct view of the lag spectrum is what lets the stub carry more than
    the plain MFCC stack does (simultaneous voices flatten these peaks).
    """
    rate = audio.sample_rate
    window, hop = 30 * rate // 1000, 10 * rate // 1000
    x = audio.samples.astype(np.float64)
    n_raw = 1 + (len(x) - window) // hop
    idx = np.arange(window)[None, :] + hop * np.arange(n_raw)[:, None]
    power = np.abs(np.fft.rfft(x[idx], 1024, axis=1)) ** 2
    ac = np.fft.irfft(power, axis=1)
    return ac[:, _STUB_LAGS] / (ac[:, :1] + 1e-12)


@lru_cache(maxsize=4)
def _stub_projection(dim: int, seed: int) -> np.ndarray:
    # block diagonal: the cepstral and harmonic blocks land in disjoint
    # output channels, so neither can drown the other in the mix
    rng = np.random.default_rng(seed)
    n_m, n_h = 59, len(_STUB_LAGS)
    d_m = (dim * 3) // 4
    w = np.zeros((n_m + n_h, dim))
    w[:n_m, :d_m] = rng.standard_normal((n_m, d_m)) / np.sqrt(float(n_m))
    w[n_m:, d_m:] = rng.standard_normal((n_h, dim - d_m)) / np.sqrt(float(n_h))
    return w


def stub_features(audio: AudioBuffer, dim: int, seed: int = 0) -> FeatureMatrix:
    """Seeded random projection of MFCC plus harmonicity.

    Stands in for a pretrained speech embedding where none is available.

    The projection is overcomplete and the tanh stays in its mildly
    nonlinear range, so both blocks remain linearly recoverable and
    downstream classifiers can learn from the stub.
    """
    if dim not in STUB_DIMS:
        raise ValueError(f"stub dim must be one of {STUB_DIMS}, got {dim}")
    mfcc = extract_mfcc(audio)
    harm = _harmonic_block(audio)
    if harm.shape[0] < mfcc.n_frames:
        pad = harm[-1:].repeat(mfcc.n_frames - harm.shape[0], axis=0)
        harm = np.vstack([harm, pad])
    mixed = np.hstack([mfcc.data * _STUB_SCALE, _STUB_HARMONIC_SCALE * harm])
    z = mixed @ _stub_projection(dim, seed)
    return FeatureMatrix(np.tanh(z).astype(np.float32), hop_ms=10.0, source="stub")


def upsample_frames(m: FeatureMatrix) -> FeatureMatrix:
    """20 ms frames -> 10 ms by nearest-neighbor duplication."""
    if m.hop_ms != 20.0:
        raise WrongHop(f"expected 20 ms input, got {m.hop_ms}")
    return FeatureMatrix(np.repeat(m.data, 2, axis=0), hop_ms=10.0, source=m.source)

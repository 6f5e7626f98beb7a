"""Frame raster conventions and label/score containers.

Everything downstream of the raw signal lives on a fixed 10 ms raster
(100 frames per second).  Frame ``k`` covers ``[k, k+1) * 10 ms`` and is
labeled by whatever happens at its center ``(k + 0.5) * 10 ms``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadAlphabet, LengthMismatch

FRAME_RATE = 100        # frames per second
FRAME_S = 0.01          # seconds per frame

# gender raster codes
SILENCE, FEMALE, MALE, BOTH = 0, 1, 2, 3
GENDER_ALPHABET = ("silence", "female", "male", "both")


def n_frames_for_samples(n_samples: int, sample_rate: int) -> int:
    """Number of whole 10 ms frames in a signal (floor convention)."""
    hop = sample_rate // FRAME_RATE
    return n_samples // hop


def n_frames_for_duration(duration_s: float) -> int:
    return int(round(duration_s * FRAME_RATE))


def frame_centers(n_frames: int) -> np.ndarray:
    """Center time in seconds of each frame."""
    return (np.arange(n_frames) + 0.5) * FRAME_S


def span_to_frames(start_s: float, end_s: float) -> tuple[int, int]:
    """Half-open frame-index range whose centers fall inside [start_s, end_s).

    Returns (lo, hi) with hi exclusive; empty ranges have hi <= lo.
    """
    # center (k + 0.5) / 100 >= start  <=>  k >= 100 * start - 0.5
    lo = int(np.ceil(round(start_s * FRAME_RATE, 6) - 0.5))
    hi = int(np.ceil(round(end_s * FRAME_RATE, 6) - 0.5))
    return max(lo, 0), max(hi, 0)


@dataclass
class FrameLabels:
    """Per-frame symbolic labels at the fixed 100 Hz rate.

    ``alphabet`` is either ``("0", "1")`` for binary overlap rasters or
    :data:`GENDER_ALPHABET` for gender rasters; ``labels`` holds the
    integer code of each frame.
    """

    labels: np.ndarray
    alphabet: tuple[str, ...] = ("0", "1")
    rate: int = FRAME_RATE

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int8)
        if self.labels.ndim != 1 or len(self.labels) < 1:
            raise LengthMismatch("labels must be a non-empty 1-d sequence")
        if self.labels.min() < 0 or self.labels.max() >= len(self.alphabet):
            raise BadAlphabet(
                f"label codes outside alphabet of size {len(self.alphabet)}"
            )

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def is_binary(self) -> bool:
        return len(self.alphabet) == 2


def binary_labels(values) -> FrameLabels:
    return FrameLabels(np.asarray(values, dtype=np.int8), alphabet=("0", "1"))


def gender_labels(values) -> FrameLabels:
    return FrameLabels(np.asarray(values, dtype=np.int8), alphabet=GENDER_ALPHABET)


@dataclass
class ScoreTrack:
    """Real-valued per-frame scores for one or more named categories."""

    times_s: np.ndarray
    scores: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.times_s = np.asarray(self.times_s, dtype=np.float64)
        for name, s in self.scores.items():
            s = np.asarray(s, dtype=np.float64)
            if s.shape != self.times_s.shape:
                raise LengthMismatch(
                    f"score '{name}' length {len(s)} != times length {len(self.times_s)}"
                )
            self.scores[name] = s

    def __len__(self) -> int:
        return len(self.times_s)


def runs_of_ones(labels: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of 1s as half-open frame ranges [start, stop)."""
    x = np.asarray(labels).astype(bool).astype(np.int8)
    if len(x) == 0:
        return []
    edges = np.diff(np.concatenate(([0], x, [0])))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    return list(zip(starts.tolist(), stops.tolist()))

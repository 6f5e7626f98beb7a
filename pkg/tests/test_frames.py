import numpy as np
import pytest

from crosstalk.errors import BadAlphabet, LengthMismatch
from crosstalk.frames import (
    FRAME_RATE,
    FrameLabels,
    ScoreTrack,
    binary_labels,
    frame_centers,
    gender_labels,
    n_frames_for_duration,
    n_frames_for_samples,
    runs_of_ones,
    span_to_frames,
)


def test_frame_counts():
    assert n_frames_for_samples(32000, 16000) == 200
    assert n_frames_for_samples(32159, 16000) == 200  # floor convention
    assert n_frames_for_duration(2.0) == 200
    assert n_frames_for_duration(1.505) == 150  # round half to even


def test_frame_centers_values():
    c = frame_centers(3)
    assert np.allclose(c, [0.005, 0.015, 0.025])


def test_span_to_frames_hand_cases():
    # centers at (k + 0.5) * 10 ms; a span owns the frames whose center it contains
    assert span_to_frames(0.0, 1.0) == (0, 100)
    assert span_to_frames(0.105, 0.205) == (10, 20)
    assert span_to_frames(0.5, 1.5) == (50, 150)
    # span narrower than one frame but containing a center
    assert span_to_frames(0.004, 0.006) == (0, 1)
    # span containing no center
    assert span_to_frames(0.006, 0.009) == (1, 1)
    assert span_to_frames(-0.5, 0.02) == (0, 2)


def test_span_to_frames_float_noise():
    # times arriving through parsing carry representation noise
    lo, hi = span_to_frames(0.1 + 1e-9, 0.3 - 1e-9)
    assert (lo, hi) == (10, 30)


def test_span_roundtrip_through_boundaries():
    rng = np.random.default_rng(0)
    for _ in range(200):
        lo = int(rng.integers(0, 500))
        hi = lo + int(rng.integers(1, 100))
        assert span_to_frames(lo / FRAME_RATE, hi / FRAME_RATE) == (lo, hi)


def test_frame_labels_validation():
    labels = binary_labels([0, 1, 1, 0])
    assert labels.is_binary and len(labels) == 4
    with pytest.raises(BadAlphabet):
        binary_labels([0, 2])
    with pytest.raises(LengthMismatch):
        binary_labels([])
    g = gender_labels([0, 1, 2, 3])
    assert not g.is_binary
    with pytest.raises(BadAlphabet):
        gender_labels([4])


def test_score_track_validation():
    t = ScoreTrack(frame_centers(3), {"overlap": [0.1, 0.2, 0.3]})
    assert len(t) == 3
    with pytest.raises(LengthMismatch):
        ScoreTrack(frame_centers(3), {"overlap": [0.1]})


def test_runs_of_ones():
    assert runs_of_ones(np.array([])) == []
    assert runs_of_ones(np.array([0, 0])) == []
    assert runs_of_ones(np.array([1, 1, 0, 1])) == [(0, 2), (3, 4)]
    assert runs_of_ones(np.array([1])) == [(0, 1)]
    assert runs_of_ones(np.array([0, 1, 1, 1, 0, 0, 1])) == [(1, 4), (6, 7)]


def test_runs_cover_exactly_the_ones():
    rng = np.random.default_rng(7)
    for _ in range(50):
        x = (rng.random(40) < 0.4).astype(np.int8)
        mask = np.zeros_like(x)
        for lo, hi in runs_of_ones(x):
            assert hi > lo
            assert x[lo:hi].all()
            mask[lo:hi] = 1
        assert np.array_equal(mask, x)

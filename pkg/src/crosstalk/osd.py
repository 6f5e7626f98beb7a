"""Overlapped-speech detection: windowing, training, sliding inference."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import median_filter

from .errors import DimMismatch, LengthMismatch
from .features import FeatureMatrix
from .frames import FrameLabels, binary_labels, frame_centers, runs_of_ones, ScoreTrack
from .neural import SequenceModel, build_model, train
from .neural.train import TrainConfig, softmax


@dataclass(frozen=True)
class WindowingConfig:
    window_frames: int = 200
    shift_frames: int = 100

    def __post_init__(self):
        if not 1 <= self.shift_frames <= self.window_frames:
            raise ValueError("need 1 <= shift_frames <= window_frames")


@dataclass
class Window:
    """A fixed-length slice of a show; ``mask`` is 1 on real frames.

    ``mask`` is None for windows with no padding.  Iteration yields
    (features, labels) so windows unpack like pairs.
    """

    features: np.ndarray
    labels: np.ndarray
    mask: np.ndarray | None
    start_frame: int

    def __iter__(self):
        yield self.features
        yield self.labels


def _pad_to(arr: np.ndarray, length: int) -> np.ndarray:
    """Right-pad along axis 0 by repeating the last entry."""
    missing = length - arr.shape[0]
    if missing <= 0:
        return arr
    tail = np.repeat(arr[-1:], missing, axis=0)
    return np.concatenate([arr, tail], axis=0)


def make_windows(features: FeatureMatrix, labels: FrameLabels,
                 cfg: WindowingConfig = WindowingConfig()) -> list[Window]:
    """Cut a show into fixed windows; the final partial window is padded."""
    x = features.data if isinstance(features, FeatureMatrix) else np.asarray(features)
    y = labels.labels if isinstance(labels, FrameLabels) else np.asarray(labels)
    n = x.shape[0]
    if len(y) != n:
        raise LengthMismatch(f"{n} feature frames vs {len(y)} label frames")
    w, shift = cfg.window_frames, cfg.shift_frames

    windows = []
    start = 0
    while start + w <= n:
        windows.append(Window(x[start:start + w], y[start:start + w].astype(np.int64),
                              None, start))
        start += shift
    covered = windows[-1].start_frame + w if windows else 0
    if covered < n:
        start = len(windows) * shift
        real = n - start
        mask = np.zeros(w, dtype=np.float32)
        mask[:real] = 1.0
        windows.append(Window(_pad_to(x[start:], w),
                              _pad_to(y[start:].astype(np.int64), w), mask, start))
    return windows


def train_osd(corpus, arch: str = "rosd", feature_kind: str = "mfcc",
              cfg: TrainConfig = None, dev=None) -> SequenceModel:
    """Train a two-way frame classifier on windowed (features, labels) data.

    ``corpus`` yields Window objects or (features, labels[, mask]) tuples of
    equal length.  When ``dev`` is None a seeded 10% of the windows is held
    out so early stopping has a dev loss to track.
    """
    if cfg is None:
        cfg = TrainConfig()
    cfg = replace(cfg, loss="cross_entropy")
    items = [_as_training_item(w) for w in corpus]
    if dev is not None:
        dev_items = [_as_training_item(w) for w in dev]
    elif len(items) >= 5:
        rng = np.random.default_rng(cfg.seed)
        order = rng.permutation(len(items))
        n_dev = max(1, len(items) // 10)
        dev_items = [items[i] for i in order[:n_dev]]
        items = [items[i] for i in order[n_dev:]]
    else:
        dev_items = None

    input_dim = items[0][0].shape[1]
    model = build_model(arch, {"input_dim": input_dim, "n_out": 2}, seed=cfg.seed)
    model.meta["features"] = feature_kind
    model.meta["task"] = "osd"
    trained, history = train(model, items, cfg, dev=dev_items)
    trained.meta["epochs_run"] = history.n_epochs
    return trained


def _as_training_item(w):
    if isinstance(w, Window):
        if w.mask is None:
            return (w.features, w.labels)
        return (w.features, w.labels, w.mask)
    return tuple(w)


def detect_overlap(model: SequenceModel, features, threshold: float = 0.5,
                   median_frames: int = 11,
                   cfg: WindowingConfig = WindowingConfig(),
                   batch_windows: int = 256) -> tuple[FrameLabels, ScoreTrack]:
    """Sliding-window overlap scores, thresholding, and median smoothing.

    Returns per-frame binary labels and the aggregated probability track;
    both have exactly as many frames as the input features.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    if median_frames < 1 or median_frames % 2 == 0:
        raise ValueError("median_frames must be odd and >= 1")
    x = features.data if isinstance(features, FeatureMatrix) else np.asarray(features)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise DimMismatch(
            f"features have dim {x.shape[-1] if x.ndim else 0}, model wants {model.input_dim}")
    n = x.shape[0]

    windows = make_windows(FeatureMatrix(x, source="any"),
                           binary_labels(np.zeros(max(n, 1), dtype=np.int8)), cfg)
    score_sum = np.zeros(n, dtype=np.float64)
    weight = np.zeros(n, dtype=np.float64)
    for lo in range(0, len(windows), batch_windows):
        chunk = windows[lo:lo + batch_windows]
        xs = np.stack([w.features for w in chunk]).astype(model.dtype)
        y, _ = model.forward_batch(xs)
        p = softmax(y)[:, :, 1]
        for w, pw in zip(chunk, p):
            real = cfg.window_frames if w.mask is None else int(w.mask.sum())
            stop = min(w.start_frame + real, n)
            real = stop - w.start_frame
            score_sum[w.start_frame:stop] += pw[:real]
            weight[w.start_frame:stop] += 1.0
    scores = score_sum / np.maximum(weight, 1.0)

    raw = (scores >= threshold).astype(np.int8)
    smoothed = raw if median_frames == 1 else median_filter(
        raw, size=median_frames, mode="nearest")
    track = ScoreTrack(frame_centers(n), {"overlap": scores})
    return binary_labels(smoothed), track


def write_score_csv(path, track: ScoreTrack, category: str = "overlap") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("frame_index,time_s,p_overlap\n")
        for i, (t, p) in enumerate(zip(track.times_s, track.scores[category])):
            fh.write(f"{i},{t:.6f},{p:.6f}\n")


def write_overlap_segments(path, labels: FrameLabels) -> None:
    """Runs of label 1 as `start_s,end_s,label` rows at frame boundaries."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("start_s,end_s,label\n")
        for start, stop in runs_of_ones(labels.labels):
            fh.write(f"{start / 100:.6f},{stop / 100:.6f},overlap\n")

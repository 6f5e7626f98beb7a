"""Gender classification of 1 s segments and sliding whole-show analysis.

Two classifier families share one LSTM-64 backbone:

* GD1: a two-way head; segment logits are the per-category head outputs
  summed over the segment, followed by softmax and argmax.
* GD2: two independently trained scalar regressors (female presence and
  male presence); the decision is the argmax of the two summed outputs,
  with an optional additive offset on the female score.

Female is category index 0 throughout; exact ties resolve to female.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import TooShort
from .features import FeatureMatrix
from .frames import ScoreTrack
from .neural import SequenceModel, build_gd_backbone, forward, train
from .neural.kernels import lstm_seq_forward
from .neural.train import TrainConfig, softmax

GENDERS = ("female", "male")
SEGMENT_FRAMES = 100

_GENDER_INDEX = {
    "f": 0, "female": 0, 0: 0,
    "m": 1, "male": 1, 1: 1,
}


def gender_index(label) -> int:
    key = label.strip().lower() if isinstance(label, str) else label
    try:
        return _GENDER_INDEX[key]
    except (KeyError, TypeError):
        raise ValueError(f"not a gender label: {label!r}") from None


@dataclass
class GenderDecision:
    label: str
    score_female: float
    score_male: float


def _default_cfg(cfg: TrainConfig | None, loss: str) -> TrainConfig:
    if cfg is None:
        cfg = TrainConfig(max_epochs=2)
    return replace(cfg, loss=loss)


def _items(corpus, target_of):
    out = []
    for feats, label in corpus:
        x = feats.data if isinstance(feats, FeatureMatrix) else np.asarray(feats)
        out.append((x, target_of(gender_index(label))))
    return out


def train_gd1(corpus, cfg: TrainConfig | None = None, dev=None) -> SequenceModel:
    """Two-way segment classifier; defaults to the 2-epoch recipe."""
    cfg = _default_cfg(cfg, "cross_entropy")
    items = _items(corpus, lambda g: np.int64(g))
    dim = items[0][0].shape[1]
    model = build_gd_backbone(dim, head="two_way", seed=cfg.seed)
    model.meta["task"] = "gd1"
    trained, history = train(model, items, cfg, dev=_items(dev, np.int64) if dev else None)
    trained.meta["epochs_run"] = history.n_epochs
    return trained


def train_gd2(corpus, cfg: TrainConfig | None = None) -> tuple[SequenceModel, SequenceModel]:
    """Two independent presence regressors (female model, male model)."""
    cfg = _default_cfg(cfg, "rmse")
    models = []
    for target_gender in (0, 1):
        items = _items(corpus, lambda g: np.float64(1.0 if g == target_gender else 0.0))
        dim = items[0][0].shape[1]
        # Shared init keeps the two regressors mirror twins, so any
        # common-mode response to feature magnitude cancels when the
        # decision compares their scores.
        model = build_gd_backbone(dim, head="scalar", seed=cfg.seed)
        model.meta["task"] = "gd2_female" if target_gender == 0 else "gd2_male"
        trained, history = train(model, items, replace(cfg, seed=cfg.seed + target_gender))
        trained.meta["epochs_run"] = history.n_epochs
        models.append(trained)
    return models[0], models[1]


def classify_segment(models, features, offset_female: float = 0.0) -> GenderDecision:
    """Decide female/male for one segment.

    ``models`` is a single two-way model (GD1, ``offset_female`` ignored)
    or the (female, male) pair from :func:`train_gd2`.
    """
    if isinstance(models, SequenceModel):
        y = forward(models, features)
        p = softmax(y.sum(axis=0).astype(np.float64))
        score_f, score_m = float(p[0]), float(p[1])
    else:
        model_f, model_m = models
        score_f = float(forward(model_f, features).sum()) + offset_female
        score_m = float(forward(model_m, features).sum())
    label = GENDERS[0] if score_f >= score_m else GENDERS[1]
    return GenderDecision(label, score_f, score_m)


def _window_means(model: SequenceModel, x: np.ndarray, window: int,
                  batch_windows: int) -> np.ndarray:
    """Per-window mean head output for every sliding window start.

    Equivalent to running the model on each window independently: the
    input projection is shared across windows, the LSTM recurrence runs
    batched from a zero state per window.
    """
    p = model.params
    w_ih = p["lstm.w_ih"].value
    w_hh = p["lstm.w_hh"].value
    bias = p["lstm.b_ih"].value + p["lstm.b_hh"].value
    head_w = p["head.weight"].value
    head_b = p["head.bias"].value

    xp = x.astype(w_ih.dtype) @ w_ih + bias
    win_view = np.lib.stride_tricks.sliding_window_view(xp, window, axis=0)
    n_win = win_view.shape[0]
    out = np.empty((n_win, head_w.shape[1]), dtype=np.float64)
    for lo in range(0, n_win, batch_windows):
        chunk = np.ascontiguousarray(
            win_view[lo:lo + batch_windows].transpose(0, 2, 1))
        h, _, _ = lstm_seq_forward(chunk, w_hh)
        sums = h.sum(axis=1)
        out[lo:lo + chunk.shape[0]] = sums @ head_w + window * head_b
    return out / window


def sliding_gender_scores(models, features, window: int = SEGMENT_FRAMES,
                          batch_windows: int = 512) -> ScoreTrack:
    """Female/male presence curves over a show at every 10 ms step.

    Window k covers frames [k, k+window); its score is the summed
    regressor output divided by the window length, stamped at the
    window's center time.  Track length is n_frames - window + 1.
    """
    x = features.data if isinstance(features, FeatureMatrix) else np.asarray(features)
    n = x.shape[0]
    if n < window:
        raise TooShort(f"show has {n} frames, sliding analysis needs {window}")
    model_f, model_m = models
    means_f = _window_means(model_f, x, window, batch_windows)[:, 0]
    means_m = _window_means(model_m, x, window, batch_windows)[:, 0]
    times = (np.arange(n - window + 1) + window / 2) / 100.0
    return ScoreTrack(times, {"female": means_f, "male": means_m})


def write_gender_track_csv(path, track: ScoreTrack) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("time_s,score_female,score_male\n")
        for t, f, m in zip(track.times_s, track.scores["female"], track.scores["male"]):
            fh.write(f"{t:.6f},{f:.6f},{m:.6f}\n")

"""Frame-level overlap metrics and gender accuracy reports."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadAlphabet, EmptyInput, LengthMismatch
from .frames import FrameLabels

GENDER_KEYS = ("f", "m")

_GENDER_NORM = {
    "f": "f", "female": "f", "0": "f", 0: "f",
    "m": "m", "male": "m", "1": "m", 1: "m",
}


@dataclass
class EvalReport:
    """Metric bundle for one evaluation; rates are None when undefined."""

    task: str
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    acc: float | None = None
    acc_f: float | None = None
    acc_m: float | None = None
    confusion: dict = field(default_factory=dict)
    support: dict = field(default_factory=dict)

    @property
    def undefined(self) -> tuple:
        names = ("precision", "recall", "f1", "acc", "acc_f", "acc_m")
        relevant = names[:3] if self.task == "osd" else names[3:]
        return tuple(n for n in relevant if getattr(self, n) is None)


def _binary_array(labels, name: str) -> np.ndarray:
    if isinstance(labels, FrameLabels):
        labels = labels.labels
    arr = np.asarray(labels)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise BadAlphabet(f"{name} labels must be binary 0/1")
    return arr.astype(np.int64)


def f1_from_precision_recall(precision: float, recall: float) -> float | None:
    if precision + recall == 0:
        return None
    return 2.0 * precision * recall / (precision + recall)


def _collar_keep(ref: np.ndarray, collar: int) -> np.ndarray:
    keep = np.ones(len(ref), dtype=bool)
    if collar <= 0:
        return keep
    boundaries = np.flatnonzero(np.diff(ref)) + 1
    for b in boundaries:
        keep[max(0, b - collar):b + collar] = False
    return keep


def frame_prf(reference, hypothesis, collar_frames: int = 0) -> EvalReport:
    """Frame precision/recall/F1 with category 1 as the positive class.

    ``collar_frames`` excludes frames within that distance of a reference
    label change from scoring; the default scores every frame.
    """
    ref = _binary_array(reference, "reference")
    hyp = _binary_array(hypothesis, "hypothesis")
    if len(ref) != len(hyp):
        raise LengthMismatch(
            f"reference has {len(ref)} frames, hypothesis {len(hyp)}")
    keep = _collar_keep(ref, collar_frames)
    ref = ref[keep]
    hyp = hyp[keep]

    tp = int(np.sum((ref == 1) & (hyp == 1)))
    fp = int(np.sum((ref == 0) & (hyp == 1)))
    fn = int(np.sum((ref == 1) & (hyp == 0)))
    tn = int(np.sum((ref == 0) & (hyp == 0)))

    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    f1 = None
    if precision is not None and recall is not None:
        f1 = f1_from_precision_recall(precision, recall)
    return EvalReport(
        task="osd", precision=precision, recall=recall, f1=f1,
        confusion={"tp": tp, "fp": fp, "fn": fn, "tn": tn},
        support={"frames": len(ref), "positives": tp + fn})


def normalize_gender(label) -> str:
    key = label.strip().lower() if isinstance(label, str) else label
    try:
        return _GENDER_NORM[key]
    except (KeyError, TypeError):
        raise BadAlphabet(f"not a gender label: {label!r}") from None


def gender_accuracy(pairs) -> EvalReport:
    """Overall and per-gender accuracy plus the 2x2 confusion table."""
    pairs = [(normalize_gender(t), normalize_gender(p)) for t, p in pairs]
    if not pairs:
        raise EmptyInput("no (true, predicted) gender pairs")
    confusion = {(t, p): 0 for t in GENDER_KEYS for p in GENDER_KEYS}
    for t, p in pairs:
        confusion[(t, p)] += 1
    n_f = confusion[("f", "f")] + confusion[("f", "m")]
    n_m = confusion[("m", "m")] + confusion[("m", "f")]
    correct = confusion[("f", "f")] + confusion[("m", "m")]
    return EvalReport(
        task="gd",
        acc=correct / (n_f + n_m),
        acc_f=confusion[("f", "f")] / n_f if n_f else None,
        acc_m=confusion[("m", "m")] / n_m if n_m else None,
        confusion={f"{t}->{p}": n for (t, p), n in confusion.items()},
        support={"total": n_f + n_m, "f": n_f, "m": n_m})


def _fmt(value: float | None) -> str:
    return "undef" if value is None else f"{100.0 * value:.1f}"


def format_report(report: EvalReport) -> str:
    """Render a report as a small UTF-8 table with one-decimal percents."""
    lines = []
    if report.task == "osd":
        lines.append("metric     value")
        for name in ("precision", "recall", "f1"):
            lines.append(f"{name:<10} {_fmt(getattr(report, name))}")
    else:
        lines.append("metric     value")
        for name in ("acc", "acc_f", "acc_m"):
            lines.append(f"{name:<10} {_fmt(getattr(report, name))}")
    lines.append("counts     " + " ".join(
        f"{k}={v}" for k, v in sorted(report.confusion.items())))
    return "\n".join(lines)


def write_report_csv(path, report: EvalReport) -> None:
    names = ("precision", "recall", "f1") if report.task == "osd" else ("acc", "acc_f", "acc_m")
    support = report.support.get("frames", report.support.get("total", 0))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("metric,value,support\n")
        for name in names:
            value = getattr(report, name)
            rendered = "undef" if value is None else f"{value:.6f}"
            fh.write(f"{name},{rendered},{support}\n")
        for key, count in sorted(report.confusion.items()):
            fh.write(f"{key},{count},{support}\n")

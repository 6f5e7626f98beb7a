"""YIN fundamental-frequency estimation and the pitch-vs-error analysis.

The tracker follows the classic recipe: lag-domain difference function,
cumulative mean normalized difference (CMND), absolute threshold with
descent to the local minimum, parabolic interpolation.  Frames whose
CMND minimum stays above the threshold are unvoiced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .audio import AudioBuffer
from .errors import TooShort
from .eval import normalize_gender

UNVOICED = None


@dataclass(frozen=True)
class YinConfig:
    frame_ms: int = 40
    hop_ms: int = 10
    f0_min: float = 50.0
    f0_max: float = 600.0
    cmnd_threshold: float = 0.15

    def __post_init__(self):
        if not 0 < self.f0_min < self.f0_max:
            raise ValueError("need 0 < f0_min < f0_max")
        if self.cmnd_threshold <= 0:
            raise ValueError("cmnd_threshold must be positive")


@dataclass
class PitchTrack:
    times_s: np.ndarray
    f0_hz: np.ndarray       # 0 where unvoiced
    voiced: np.ndarray      # bool
    cmnd_min: np.ndarray

    def __len__(self) -> int:
        return len(self.times_s)

    @property
    def voiced_fraction(self) -> float:
        return float(self.voiced.mean()) if len(self.voiced) else 0.0


def yin_f0(audio: AudioBuffer, cfg: YinConfig = YinConfig()) -> PitchTrack:
    x = audio.samples.astype(np.float64)
    rate = audio.sample_rate
    n = len(x)
    w = rate * cfg.frame_ms // 1000
    hop = rate * cfg.hop_ms // 1000
    if n < w:
        raise TooShort(f"{n} samples, need at least {w} for one pitch frame")

    tau_min = max(1, int(rate // cfg.f0_max))
    tau_max = min(int(math.ceil(rate / cfg.f0_min)), n - w)
    if tau_max < tau_min:
        starts = np.arange(0, n - w + 1, hop)
        times = (starts + w / 2) / rate
        z = np.zeros(len(starts))
        return PitchTrack(times, z.copy(), z.astype(bool), np.ones(len(starts)))

    starts = np.arange(0, n - w - tau_max + 1, hop)
    times = (starts + w / 2) / rate
    span = w + tau_max
    frames = np.lib.stride_tricks.sliding_window_view(x, span)[starts]

    # d(tau) = e0 + e_tau - 2*corr(tau), all lags at once per frame
    sq = np.concatenate([np.zeros((len(starts), 1)), np.cumsum(frames ** 2, axis=1)],
                        axis=1)
    e_tau = sq[:, w:] - sq[:, :tau_max + 1]
    e0 = e_tau[:, :1]
    nfft = 1 << (span - 1).bit_length()
    spec = np.fft.rfft(frames, nfft)
    head = np.fft.rfft(frames[:, :w], nfft)
    corr = np.fft.irfft(spec * np.conj(head), nfft)[:, :tau_max + 1]
    d = e0 + e_tau[:, 1:] - 2.0 * corr[:, 1:]
    np.maximum(d, 0.0, out=d)

    taus = np.arange(1, tau_max + 1, dtype=np.float64)
    csum = np.cumsum(d, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cmnd = np.where(csum > 0.0, d * taus / csum, 1.0)

    lo = tau_min - 1                      # cmnd column for lag tau_min
    band = cmnd[:, lo:]
    below = band < cfg.cmnd_threshold
    f0 = np.zeros(len(starts))
    cmnd_min = np.empty(len(starts))
    voiced = np.zeros(len(starts), dtype=bool)
    for i in range(len(starts)):
        row = band[i]
        if below[i].any():
            j = int(np.argmax(below[i]))
            while j + 1 < len(row) and row[j + 1] < row[j]:
                j += 1
        else:
            j = int(np.argmin(row))
        cmnd_min[i] = row[j]
        if cmnd_min[i] > cfg.cmnd_threshold:
            continue
        tau = _parabolic(cmnd[i], lo + j)
        f0[i] = min(max(rate / tau, cfg.f0_min), cfg.f0_max)
        voiced[i] = True
    return PitchTrack(times, f0, voiced, cmnd_min)


def _parabolic(cmnd_row: np.ndarray, idx: int) -> float:
    """Refined lag from a parabola through the minimum and its neighbors."""
    tau = idx + 1  # column idx holds lag idx+1
    if idx == 0 or idx + 1 >= len(cmnd_row):
        return float(tau)
    a, b, c = cmnd_row[idx - 1], cmnd_row[idx], cmnd_row[idx + 1]
    denom = a - 2.0 * b + c
    if denom <= 0.0:
        return float(tau)
    shift = 0.5 * (a - c) / denom
    return float(tau + min(max(shift, -1.0), 1.0))


def segment_log_f0(track: PitchTrack) -> float | None:
    """Natural log of the median voiced F0; None when under 10% voiced."""
    if len(track) == 0 or track.voiced_fraction < 0.10:
        return UNVOICED
    return float(np.log(np.median(track.f0_hz[track.voiced])))


@dataclass
class PitchHistogram:
    bin_edges: np.ndarray                      # len n_bins + 1, natural-log F0
    totals: dict[str, np.ndarray]              # per gender, len n_bins
    errors: dict[str, np.ndarray]
    error_rates: dict[str, np.ndarray]         # errors / grand total
    n_unvoiced: dict[str, int]
    grand_total: int
    quantiles: dict[str, dict[str, float | None]] = field(default_factory=dict)

    @property
    def n_bins(self) -> int:
        return max(len(self.bin_edges) - 1, 0)


def error_pitch_histogram(results, bin_width: float = 0.05,
                          tail_fraction: float = 0.05) -> PitchHistogram:
    """Bin (true gender, predicted gender, segment log F0) outcomes.

    Bin edges sit at integer multiples of ``bin_width``.  Error rates are
    normalized by the grand total of voiced samples over both genders.
    The quantile report slices each gender's pitch distribution into the
    lowest ``tail_fraction``, the middle, and the highest ``tail_fraction``
    and gives the accuracy of each slice.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    voiced = []
    n_unvoiced = {"f": 0, "m": 0}
    for true, pred, logf0 in results:
        t, p = normalize_gender(true), normalize_gender(pred)
        if logf0 is UNVOICED:
            n_unvoiced[t] += 1
        else:
            voiced.append((t, p, float(logf0)))

    if not voiced:
        empty = np.zeros(0)
        return PitchHistogram(np.zeros(0), {"f": empty, "m": empty.copy()},
                              {"f": empty.copy(), "m": empty.copy()},
                              {"f": empty.copy(), "m": empty.copy()},
                              n_unvoiced, 0, _quantile_report([], tail_fraction))

    values = np.array([v for _, _, v in voiced])
    lo = math.floor(values.min() / bin_width)
    hi = math.floor(values.max() / bin_width) + 1
    edges = np.arange(lo, hi + 1) * bin_width
    n_bins = hi - lo

    totals = {g: np.zeros(n_bins, dtype=np.int64) for g in ("f", "m")}
    errors = {g: np.zeros(n_bins, dtype=np.int64) for g in ("f", "m")}
    for t, p, v in voiced:
        b = min(int(math.floor(v / bin_width)) - lo, n_bins - 1)
        totals[t][b] += 1
        if p != t:
            errors[t][b] += 1
    grand = len(voiced)
    rates = {g: errors[g] / grand for g in ("f", "m")}
    return PitchHistogram(edges, totals, errors, rates, n_unvoiced, grand,
                          _quantile_report(voiced, tail_fraction))


def _quantile_report(voiced, tail_fraction):
    report = {}
    for g in ("f", "m"):
        rows = sorted((v, t == p) for t, p, v in voiced if t == g)
        if not rows:
            report[g] = {"low": None, "mid": None, "high": None, "n": 0}
            continue
        k = max(1, round(tail_fraction * len(rows)))
        correct = [ok for _, ok in rows]

        def acc(chunk):
            return sum(chunk) / len(chunk) if chunk else None

        report[g] = {
            "low": acc(correct[:k]),
            "mid": acc(correct[k:len(rows) - k]),
            "high": acc(correct[len(rows) - k:]),
            "n": len(rows),
        }
    return report


def write_histogram_csv(path, hist: PitchHistogram) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("bin_lo,bin_hi,total_f,total_m,err_f,err_m,err_f_norm,err_m_norm\n")
        for i in range(hist.n_bins):
            fh.write(f"{hist.bin_edges[i]:.6f},{hist.bin_edges[i + 1]:.6f},"
                     f"{hist.totals['f'][i]},{hist.totals['m'][i]},"
                     f"{hist.errors['f'][i]},{hist.errors['m'][i]},"
                     f"{hist.error_rates['f'][i]:.6f},{hist.error_rates['m'][i]:.6f}\n")


def format_quantile_report(hist: PitchHistogram) -> str:
    def cell(v):
        return "undef" if v is None else f"{100.0 * v:.1f}"

    lines = ["gender slice   acc     n"]
    for g, name in (("f", "female"), ("m", "male")):
        q = hist.quantiles[g]
        for slc in ("low", "mid", "high"):
            lines.append(f"{name:<6} {slc:<7} {cell(q[slc]):<7} {q['n']}")
    return "\n".join(lines)

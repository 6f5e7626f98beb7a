"""Annotation parsing, rasterization, statistics, balanced subsets, and
synthetic corpus construction."""

from __future__ import annotations

import csv
import io
import math
import os
from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer, MixSpec, mix_overlap, synth_voice, write_wav
from .errors import (
    InsufficientSegments,
    InsufficientSpeakers,
    IoError,
    NegativeDuration,
    ParseError,
    UnknownGenderInGenderMode,
)
from .frames import (
    BOTH,
    FEMALE,
    MALE,
    FrameLabels,
    binary_labels,
    gender_labels,
    n_frames_for_duration,
    span_to_frames,
)

CSV_HEADER = ["file", "start_s", "end_s", "speaker", "gender"]
GENDER_VALUES = ("f", "m", "unknown")

_GENDER_PARSE = {
    "f": "f", "female": "f",
    "m": "m", "male": "m",
    "unknown": "unknown", "": "unknown", "<na>": "unknown", "u": "unknown",
}


@dataclass
class SegmentAnnotation:
    file: str
    start_s: float
    end_s: float
    speaker: str
    gender: str = "unknown"

    def __post_init__(self):
        if not self.speaker:
            raise ValueError("speaker id must be non-empty")
        if self.start_s < 0 or self.end_s <= self.start_s:
            raise ValueError(
                f"need 0 <= start < end, got [{self.start_s}, {self.end_s})")
        if self.gender not in GENDER_VALUES:
            raise ValueError(f"gender must be one of {GENDER_VALUES}")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


def parse_segments(path, format: str = "csv") -> list[SegmentAnnotation]:
    """Read annotations from a CSV (own header) or standard RTTM file."""
    if format == "csv":
        return _parse_csv(path)
    if format == "rttm":
        return _parse_rttm(path)
    raise ValueError(f"unknown annotation format {format!r}")


def _segment(line_no, file, start, end, speaker, gender) -> SegmentAnnotation:
    if not speaker:
        raise ParseError(line_no, "empty speaker id")
    if start < 0:
        raise ParseError(line_no, f"negative start time {start}")
    if end <= start:
        raise NegativeDuration(line_no, f"non-positive duration [{start}, {end})")
    return SegmentAnnotation(file, start, end, speaker, gender)


def _read_text(path) -> str:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            return fh.read()
    except UnicodeDecodeError:
        raise ParseError(1, f"{path}: not a UTF-8 text file") from None


def _parse_csv(path) -> list[SegmentAnnotation]:
    segments = []
    reader = csv.reader(io.StringIO(_read_text(path), newline=""))
    for line_no, row in enumerate(reader, start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if line_no == 1:
            if [c.strip() for c in row] != CSV_HEADER:
                raise ParseError(1, f"expected header {','.join(CSV_HEADER)}")
            continue
        if len(row) != len(CSV_HEADER):
            raise ParseError(line_no, f"expected {len(CSV_HEADER)} fields, got {len(row)}")
        file, start_s, end_s, speaker, gender = [c.strip() for c in row]
        try:
            start, end = float(start_s), float(end_s)
        except ValueError:
            raise ParseError(line_no, f"bad time fields {start_s!r}, {end_s!r}") from None
        g = _GENDER_PARSE.get(gender.lower())
        if g is None:
            raise ParseError(line_no, f"bad gender {gender!r}")
        segments.append(_segment(line_no, file, start, end, speaker, g))
    return segments


def _parse_rttm(path) -> list[SegmentAnnotation]:
    segments = []
    for line_no, line in enumerate(_read_text(path).splitlines(), start=1):
        fields = line.split()
        if not fields or fields[0] != "SPEAKER":
            continue
        if len(fields) < 8:
            raise ParseError(line_no, f"SPEAKER line has {len(fields)} fields, need >= 8")
        file = fields[1]
        try:
            onset, dur = float(fields[3]), float(fields[4])
        except ValueError:
            raise ParseError(line_no, f"bad onset/duration {fields[3]!r}, {fields[4]!r}") from None
        segments.append(_segment(line_no, file, onset, onset + dur, fields[7], "unknown"))
    return segments


def save_segments(path, segments) -> None:
    """Emit the CSV carrier with 3-decimal second fields."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for s in segments:
            fh.write(f"{s.file},{s.start_s:.3f},{s.end_s:.3f},{s.speaker},{s.gender}\n")


def rasterize(segments, duration_s: float, mode: str = "overlap") -> FrameLabels:
    """Segments of one file onto the 10 ms grid.

    overlap mode: 1 where at least two segments cover the frame center.
    gender mode: silence / female / male / both from covering genders.
    """
    n = n_frames_for_duration(duration_s)
    if n < 1:
        raise ValueError(f"duration {duration_s}s shorter than one frame")
    if mode == "overlap":
        count = np.zeros(n, dtype=np.int32)
        for s in segments:
            lo, hi = _clipped_span(s, n)
            count[lo:hi] += 1
        return binary_labels((count >= 2).astype(np.int8))
    if mode == "gender":
        has = {"f": np.zeros(n, dtype=bool), "m": np.zeros(n, dtype=bool)}
        for s in segments:
            if s.gender not in ("f", "m"):
                raise UnknownGenderInGenderMode(
                    f"segment of speaker {s.speaker!r} has gender {s.gender!r}")
            lo, hi = _clipped_span(s, n)
            has[s.gender][lo:hi] = True
        labels = np.zeros(n, dtype=np.int8)
        labels[has["f"]] = FEMALE
        labels[has["m"]] = MALE
        labels[has["f"] & has["m"]] = BOTH
        return gender_labels(labels)
    raise ValueError(f"unknown raster mode {mode!r}")


def _clipped_span(s: SegmentAnnotation, n: int) -> tuple[int, int]:
    lo, hi = span_to_frames(s.start_s, s.end_s)
    return max(lo, 0), min(hi, n)


@dataclass
class CorpusStats:
    total_hours: float
    speech_hours: float
    overlap_fraction: float           # overlap time / timeline
    overlap_fraction_speech: float    # overlap time / speech time
    female_fraction: float            # female segment time / all segment time
    n_speakers_f: int
    n_speakers_m: int
    n_speakers_unknown: int


def speaker_genders(segments) -> dict[str, str]:
    """Majority gender per speaker id; ties resolve to unknown."""
    votes: dict[str, Counter] = defaultdict(Counter)
    for s in segments:
        votes[s.speaker][s.gender] += 1
    out = {}
    for speaker, counter in votes.items():
        ranked = counter.most_common()
        if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
            out[speaker] = "unknown"
        else:
            out[speaker] = ranked[0][0]
    return out


def compute_stats(segments, durations: dict[str, float] | None = None) -> CorpusStats:
    """Corpus duration, overlap, gender balance, and speaker counts.

    ``durations`` maps file id to its timeline length in seconds; files
    not listed use the latest segment end.
    """
    by_file = defaultdict(list)
    for s in segments:
        by_file[s.file].append(s)
    timeline_frames = 0
    speech_frames = 0
    overlap_frames = 0
    for file, segs in by_file.items():
        dur = (durations or {}).get(file) or max(s.end_s for s in segs)
        n = n_frames_for_duration(dur)
        count = np.zeros(n, dtype=np.int32)
        for s in segs:
            lo, hi = _clipped_span(s, n)
            count[lo:hi] += 1
        timeline_frames += n
        speech_frames += int((count >= 1).sum())
        overlap_frames += int((count >= 2).sum())
    if durations:
        for file, dur in durations.items():
            if file not in by_file:
                timeline_frames += n_frames_for_duration(dur)

    seg_time = sum(s.duration_s for s in segments)
    female_time = sum(s.duration_s for s in segments if s.gender == "f")
    genders = Counter(speaker_genders(segments).values())
    return CorpusStats(
        total_hours=timeline_frames / 100 / 3600,
        speech_hours=speech_frames / 100 / 3600,
        overlap_fraction=overlap_frames / timeline_frames if timeline_frames else 0.0,
        overlap_fraction_speech=overlap_frames / speech_frames if speech_frames else 0.0,
        female_fraction=female_time / seg_time if seg_time else 0.0,
        n_speakers_f=genders.get("f", 0),
        n_speakers_m=genders.get("m", 0),
        n_speakers_unknown=genders.get("unknown", 0),
    )


def format_stats(stats: CorpusStats) -> str:
    return "\n".join([
        f"total_hours            {stats.total_hours:.4f}",
        f"speech_hours           {stats.speech_hours:.4f}",
        f"overlap_fraction       {stats.overlap_fraction:.4f}",
        f"overlap_fraction_speech {stats.overlap_fraction_speech:.4f}",
        f"female_fraction        {stats.female_fraction:.4f}",
        f"speakers_f             {stats.n_speakers_f}",
        f"speakers_m             {stats.n_speakers_m}",
        f"speakers_unknown       {stats.n_speakers_unknown}",
    ])


# --------------------------------------------------------------------------
# Balanced subset selection
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SubsetRules:
    n_test_speakers_per_gender: int = 40
    n_test_segments: int = 4000
    n_train_segments: int = 60000
    segment_s: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("n_test_speakers_per_gender", "n_test_segments",
                     "n_train_segments", "segment_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def single_speaker_slices(segments, segment_s: float) -> dict[str, list[SegmentAnnotation]]:
    """Fixed-length slices cut from regions covered by exactly one segment,
    keyed by speaker id."""
    by_file = defaultdict(list)
    for s in segments:
        by_file[s.file].append(s)
    slices = defaultdict(list)
    for file, segs in by_file.items():
        events = []
        for s in segs:
            events.append((s.start_s, 1, s))
            events.append((s.end_s, -1, s))
        events.sort(key=lambda e: (e[0], e[1]))
        active: list[SegmentAnnotation] = []
        prev_t = None
        for t, kind, seg in events:
            if prev_t is not None and len(active) == 1 and t > prev_t:
                only = active[0]
                start = prev_t
                while start + segment_s <= t + 1e-9:
                    slices[only.speaker].append(SegmentAnnotation(
                        file, round(start, 3), round(start + segment_s, 3),
                        only.speaker, only.gender))
                    start += segment_s
            if kind == 1:
                active.append(seg)
            else:
                active.remove(seg)
            prev_t = t
    return dict(slices)


def select_balanced_subset(segments, rules: SubsetRules):
    """Speaker-disjoint train/test slice lists plus a count report.

    Test takes the configured number of speakers per gender; train takes
    equally many speakers of each gender from the remainder, capped by the
    scarcer gender.  Slices fill round-robin over speakers (seeded order)
    under a per-speaker cap of ceil(target / n_speakers).
    """
    gender_of = speaker_genders(segments)
    slices = single_speaker_slices(segments, rules.segment_s)
    pools = {"f": [], "m": []}
    for speaker in sorted(slices):
        g = gender_of.get(speaker, "unknown")
        if g in pools and slices[speaker]:
            pools[g].append(speaker)

    need = rules.n_test_speakers_per_gender
    for g, name in (("f", "female"), ("m", "male")):
        if len(pools[g]) < need:
            raise InsufficientSpeakers(
                f"test set needs {need} {name} speakers with eligible slices, "
                f"corpus has {len(pools[g])}")

    rng = np.random.default_rng(rules.seed)
    test_speakers, train_speakers = {}, {}
    for g in ("f", "m"):
        order = list(rng.permutation(pools[g]))
        test_speakers[g] = order[:need]
    n_train = min(len(pools["f"]) - need, len(pools["m"]) - need)
    for g in ("f", "m"):
        order = [s for s in rng.permutation(pools[g]) if s not in set(test_speakers[g])]
        train_speakers[g] = order[:n_train]

    def fill(speakers, target, split, gender_name):
        if not speakers:
            if target:
                raise InsufficientSegments(
                    f"{split} {gender_name}: no speakers available for segment filling")
            return []
        cap = math.ceil(target / len(speakers))
        per_speaker = {}
        for spk in speakers:
            order = rng.permutation(len(slices[spk]))
            per_speaker[spk] = [slices[spk][i] for i in order[:cap]]
        chosen = []
        round_no = 0
        while len(chosen) < target:
            took = False
            for spk in speakers:
                if round_no < len(per_speaker[spk]):
                    chosen.append(per_speaker[spk][round_no])
                    took = True
                    if len(chosen) == target:
                        break
            if not took:
                raise InsufficientSegments(
                    f"{split} {gender_name}: need {target} slices of "
                    f"{rules.segment_s}s, only {len(chosen)} available under the "
                    f"per-speaker cap {cap}")
            round_no += 1
        return chosen

    test, train = [], []
    report = {"n_train_speakers_per_gender": n_train, "caps": {}}
    for g, name in (("f", "female"), ("m", "male")):
        test_g = fill(test_speakers[g], rules.n_test_segments // 2, "test", name)
        train_g = fill(train_speakers[g], rules.n_train_segments // 2, "train", name)
        test.extend(test_g)
        train.extend(train_g)
        report[f"test_segments_{g}"] = len(test_g)
        report[f"train_segments_{g}"] = len(train_g)
        report[f"test_speakers_{g}"] = sorted(test_speakers[g])
        report[f"train_speakers_{g}"] = sorted(train_speakers[g])
    return train, test, report


def split_dev_speakers(slices, fraction: float = 0.1, seed: int = 0):
    """Carve a dev split out of train slices by whole speakers per gender."""
    by_speaker = defaultdict(list)
    gender_of = {}
    for s in slices:
        by_speaker[s.speaker].append(s)
        gender_of[s.speaker] = s.gender
    dev_speakers = set()
    rng = np.random.default_rng(seed)
    for g in ("f", "m", "unknown"):
        speakers = sorted(spk for spk, sg in gender_of.items() if sg == g)
        if not speakers:
            continue
        k = max(1, round(fraction * len(speakers)))
        dev_speakers.update(rng.permutation(speakers)[:k])
    train = [s for s in slices if s.speaker not in dev_speakers]
    dev = [s for s in slices if s.speaker in dev_speakers]
    return train, dev


# --------------------------------------------------------------------------
# Synthetic corpus
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthCorpusConfig:
    n_shows: int = 10
    show_s: float = 2.0
    speakers_per_gender: int = 4
    overlap_fraction: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if self.n_shows < 1 or self.speakers_per_gender < 1:
            raise ValueError("n_shows and speakers_per_gender must be >= 1")
        if not 0.0 <= self.overlap_fraction <= 0.9:
            raise ValueError("overlap_fraction must lie in [0, 0.9]")
        if self.show_s < 1.0:
            raise ValueError("show_s must be >= 1 s")


@dataclass
class ManifestEntry:
    show: str
    wav_path: str
    csv_path: str
    duration_s: float


def build_synthetic_corpus(cfg: SynthCorpusConfig, out_dir) -> list[ManifestEntry]:
    """Generate voiced shows with a controlled overlap fraction.

    Each show has a primary speaker over the full duration; with nonzero
    overlap a speaker of the other gender is mixed in over a random
    frame-aligned stretch of overlap_fraction * show_s seconds, 0-6 dB
    quieter than the primary (interjections rarely out-shout the floor
    holder).  Primary gender alternates, so speech time is gender
    balanced.  Every show sits on seeded background noise (5-12 dB SNR),
    so detectors have to find the second voice rather than just the
    added energy.  Deterministic in cfg.seed, including all WAV bytes.
    """
    rng = np.random.default_rng(cfg.seed)
    voices = {"f": rng.uniform(180.0, 280.0, size=cfg.speakers_per_gender),
              "m": rng.uniform(90.0, 150.0, size=cfg.speakers_per_gender)}
    try:
        os.makedirs(out_dir, exist_ok=True)
        manifest = []
        for i in range(cfg.n_shows):
            show = f"show_{i:04d}"
            g_a = "f" if i % 2 == 0 else "m"
            g_b = "m" if g_a == "f" else "f"
            spk_a = int(rng.integers(cfg.speakers_per_gender))
            spk_b = int(rng.integers(cfg.speakers_per_gender))
            seed_a, seed_b = (int(s) for s in rng.integers(0, 2 ** 31, size=2))
            a = synth_voice(float(voices[g_a][spk_a]), cfg.show_s, seed=seed_a)
            annotations = [SegmentAnnotation(show, 0.0, round(cfg.show_s, 3),
                                             f"{g_a}{spk_a:02d}", g_a)]
            if cfg.overlap_fraction > 0:
                b_dur = round(cfg.overlap_fraction * cfg.show_s, 2)
                offset = round(float(rng.uniform(0.0, cfg.show_s - b_dur)), 2)
                b = synth_voice(float(voices[g_b][spk_b]), b_dur, seed=seed_b)
                mixed = mix_overlap(a, b, MixSpec(offset_s=offset,
                                                  gain_db=float(rng.uniform(-6.0, 0.0))))
                audio = mixed.audio
                annotations.append(SegmentAnnotation(
                    show, offset, round(offset + b_dur, 3), f"{g_b}{spk_b:02d}", g_b))
            else:
                audio = a
            snr_db = float(rng.uniform(5.0, 12.0))
            x = audio.samples
            noise = rng.standard_normal(len(x))
            noise *= (np.sqrt(np.mean(x ** 2))
                      / (np.sqrt(np.mean(noise ** 2)) * 10.0 ** (snr_db / 20.0)))
            x = x + noise
            audio = AudioBuffer(0.5 * x / np.max(np.abs(x)), audio.sample_rate)
            wav_path = f"{show}.wav"
            csv_path = f"{show}.csv"
            write_wav(os.path.join(out_dir, wav_path), audio)
            save_segments(os.path.join(out_dir, csv_path), annotations)
            manifest.append(ManifestEntry(show, wav_path, csv_path,
                                          round(audio.duration_s, 3)))
        write_manifest(os.path.join(out_dir, "manifest.csv"), manifest)
    except OSError as exc:
        raise IoError(f"cannot write corpus under {out_dir}: {exc}") from exc
    return manifest


def write_manifest(path, manifest) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("show,wav_path,csv_path,duration_s\n")
        for e in manifest:
            fh.write(f"{e.show},{e.wav_path},{e.csv_path},{e.duration_s:.3f}\n")


def read_manifest(path) -> list[ManifestEntry]:
    entries = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for line_no, row in enumerate(reader, start=1):
            if line_no == 1:
                if row != ["show", "wav_path", "csv_path", "duration_s"]:
                    raise ParseError(1, "not a corpus manifest")
                continue
            if len(row) != 4:
                raise ParseError(line_no, f"expected 4 fields, got {len(row)}")
            try:
                dur = float(row[3])
            except ValueError:
                raise ParseError(line_no, f"bad duration {row[3]!r}") from None
            entries.append(ManifestEntry(row[0], row[1], row[2], dur))
    return entries

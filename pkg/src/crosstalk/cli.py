"""Command line front end exposing every pipeline stage.

Subcommands: synth, features, train-osd, train-gd, detect, classify-gender,
analyze-show, eval-osd, eval-gd, pitch-analysis, subset, stats.

Options resolve with precedence defaults < config file < flags.  The config
file is flat UTF-8 ``key=value`` lines (``#`` comments allowed); keys are the
flag names with dashes replaced by underscores.  Unknown keys are rejected.
Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .audio import read_wav
from .corpus import (
    CSV_HEADER,
    SubsetRules,
    SynthCorpusConfig,
    build_synthetic_corpus,
    compute_stats,
    format_stats,
    parse_segments,
    rasterize,
    read_manifest,
    save_segments,
    select_balanced_subset,
    single_speaker_slices,
)
from .errors import CrosstalkError, NonFiniteLoss, ParseError
from .eval import format_report, frame_prf, gender_accuracy, normalize_gender, write_report_csv
from .features import FEAT_VERSION, extract_mfcc, load_feature_file, save_feature_file, stub_features
from .frames import binary_labels, span_to_frames
from .gender import classify_segment, sliding_gender_scores, train_gd1, train_gd2, write_gender_track_csv
from .neural.checkpoint import VERSION as NNCK_VERSION
from .neural.checkpoint import load_checkpoint, save_checkpoint
from .neural.models import SequenceModel
from .neural.train import TrainConfig
from .osd import detect_overlap, make_windows, train_osd, write_overlap_segments, write_score_csv
from .pitch import error_pitch_histogram, format_quantile_report, segment_log_f0, write_histogram_csv, yin_f0

log = logging.getLogger("crosstalk")

FEATURE_KINDS = ("mfcc", "stub768", "stub1024")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class Opt:
    """One configurable option; ``name`` uses dashes, config keys underscores."""

    name: str
    type: type
    default: object
    help: str
    choices: tuple | None = None
    required: bool = False

    @property
    def dest(self) -> str:
        return self.name.replace("-", "_")


def _add_opts(sub, opts):
    sub.add_argument("--config", default=None, help="flat key=value config file")
    for o in opts:
        sub.add_argument(f"--{o.name}", dest=o.dest, type=o.type, default=None,
                         choices=o.choices, help=f"{o.help} (default {o.default})")


def _parse_config(path, by_dest):
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for line_no, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if "=" not in text:
            raise UsageError(f"{path}:{line_no}: expected key=value, got {text!r}")
        key, raw = (part.strip() for part in text.split("=", 1))
        if key not in by_dest:
            raise UsageError(f"{path}:{line_no}: unknown config key {key!r}")
        o = by_dest[key]
        try:
            value = o.type(raw)
        except ValueError:
            raise UsageError(f"{path}:{line_no}: bad value {raw!r} for {key}") from None
        if o.choices is not None and value not in o.choices:
            raise UsageError(f"{path}:{line_no}: {key} must be one of {o.choices}")
        values[key] = value
    return values


class _Resolved:
    def __init__(self, values):
        self.__dict__.update(values)


def _resolve(args, opts):
    """Merge defaults, config file and flags; log the outcome."""
    by_dest = {o.dest: o for o in opts}
    file_vals = _parse_config(args.config, by_dest) if args.config else {}
    values = {}
    for o in opts:
        v = getattr(args, o.dest)
        if v is None:
            v = file_vals.get(o.dest, o.default)
        if v is None and o.required:
            raise UsageError(f"missing required option --{o.name}")
        values[o.dest] = v
    log.info("config: %s", " ".join(f"{k}={values[k]}" for k in sorted(values)))
    return _Resolved(values)


def _atomic(path, write_fn):
    """Write via a temp file in the same directory, then rename into place."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".part")
    os.close(fd)
    try:
        write_fn(tmp)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def _read_lines(path):
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            return fh.read().splitlines()
    except UnicodeDecodeError:
        raise ParseError(1, f"{path}: not a UTF-8 text file") from None


def _features_for(kind, path):
    """Feature matrix for one input; .feat files load as-is."""
    if path.endswith(".feat"):
        return load_feature_file(path)
    audio = read_wav(path)
    if kind == "mfcc":
        return extract_mfcc(audio)
    if kind in ("stub768", "stub1024"):
        return stub_features(audio, int(kind[4:]))
    raise UsageError(f"unknown feature kind {kind!r}")


def _stem(path):
    return os.path.splitext(os.path.basename(path))[0]


def _manifest_entries(data):
    path = os.path.join(data, "manifest.csv") if os.path.isdir(data) else data
    entries = read_manifest(path)
    root = os.path.dirname(os.path.abspath(path))
    return [(e, os.path.join(root, e.wav_path), os.path.join(root, e.csv_path))
            for e in entries]


def _train_cfg(ns):
    return TrainConfig(max_epochs=ns.epochs, learning_rate=ns.lr,
                       batch_size=ns.batch, seed=ns.seed, patience=ns.patience)


_TRAIN_OPTS = (
    Opt("lr", float, 1e-3, "Adam learning rate"),
    Opt("batch", int, 32, "minibatch size"),
    Opt("seed", int, 0, "RNG seed for init and shuffling"),
    Opt("patience", int, 10, "early-stopping patience in epochs"),
)


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

SYNTH_OPTS = (
    Opt("hours", float, None, "total corpus duration in hours", required=True),
    Opt("overlap", float, 0.10, "overlap fraction per show"),
    Opt("seed", int, 0, "corpus RNG seed"),
    Opt("out", str, None, "output corpus directory", required=True),
    Opt("show-seconds", float, 2.0, "duration of each show"),
    Opt("speakers-per-gender", int, 4, "voice pool size per gender"),
)


def _cmd_synth(args, ns):
    n_shows = int(round(ns.hours * 3600.0 / ns.show_seconds))
    if n_shows < 1:
        raise UsageError("corpus needs at least one show; raise --hours")
    cfg = SynthCorpusConfig(n_shows=n_shows, show_s=ns.show_seconds,
                            speakers_per_gender=ns.speakers_per_gender,
                            overlap_fraction=ns.overlap, seed=ns.seed)
    manifest = build_synthetic_corpus(cfg, ns.out)
    print(f"shows {len(manifest)}")
    print(f"manifest {os.path.join(ns.out, 'manifest.csv')}")
    return 0


FEATURES_OPTS = (
    Opt("kind", str, "mfcc", "feature kind", choices=FEATURE_KINDS),
    Opt("out", str, None, "output directory for .feat files", required=True),
    Opt("jobs", int, 1, "parallel workers"),
)


def _cmd_features(args, ns):
    os.makedirs(ns.out, exist_ok=True)

    def one(path):
        fm = _features_for(ns.kind, path)
        dest = os.path.join(ns.out, _stem(path) + ".feat")
        _atomic(dest, lambda tmp: save_feature_file(tmp, fm))
        return dest

    with ThreadPoolExecutor(max_workers=max(1, ns.jobs)) as pool:
        dests = list(pool.map(one, args.inputs))
    for src, dest in zip(args.inputs, dests):
        print(f"{src} {dest}")
    return 0


TRAIN_OSD_OPTS = (
    Opt("data", str, None, "corpus directory or manifest.csv", required=True),
    Opt("arch", str, "rosd", "model architecture", choices=("rosd", "tcn")),
    Opt("features", str, "mfcc", "feature kind", choices=FEATURE_KINDS),
    Opt("out", str, None, "checkpoint path", required=True),
    Opt("epochs", int, 120, "maximum training epochs"),
) + _TRAIN_OPTS


def _cmd_train_osd(args, ns):
    windows = []
    for entry, wav_path, csv_path in _manifest_entries(ns.data):
        feats = _features_for(ns.features, wav_path)
        labels = rasterize(parse_segments(csv_path), entry.duration_s, "overlap")
        windows.extend(make_windows(feats, labels))
    model = train_osd(windows, arch=ns.arch, feature_kind=ns.features,
                      cfg=_train_cfg(ns))
    _atomic(ns.out, lambda tmp: save_checkpoint(tmp, model))
    print(f"checkpoint {ns.out}")
    print(f"epochs_run {model.meta['epochs_run']}")
    return 0


TRAIN_GD_OPTS = (
    Opt("data", str, None, "corpus directory or manifest.csv", required=True),
    Opt("head", str, "gd1", "classifier form", choices=("gd1", "gd2")),
    Opt("features", str, "stub768", "feature kind", choices=FEATURE_KINDS),
    Opt("out", str, None, "checkpoint path (gd2 appends .female/.male)", required=True),
    Opt("epochs", int, 2, "maximum training epochs"),
    Opt("segment-seconds", float, 1.0, "training segment length"),
) + _TRAIN_OPTS


def _gd2_paths(out):
    base = out[:-5] if out.endswith(".nnck") else out
    return base + ".female.nnck", base + ".male.nnck"


def _cmd_train_gd(args, ns):
    seg_frames = int(round(ns.segment_seconds * 100))
    items, skipped = [], 0
    for entry, wav_path, csv_path in _manifest_entries(ns.data):
        feats = _features_for(ns.features, wav_path).data
        slices = single_speaker_slices(parse_segments(csv_path), ns.segment_seconds)
        for speaker, segs in slices.items():
            for s in segs:
                if s.gender not in ("f", "m"):
                    skipped += 1
                    continue
                lo, hi = span_to_frames(s.start_s, s.end_s)
                if hi - lo != seg_frames or hi > feats.shape[0]:
                    skipped += 1
                    continue
                items.append((feats[lo:hi], 0 if s.gender == "f" else 1))
    if skipped:
        log.info("skipped %d unusable slices", skipped)
    cfg = _train_cfg(ns)
    if ns.head == "gd1":
        model = train_gd1(items, cfg=cfg)
        model.meta["features"] = ns.features
        _atomic(ns.out, lambda tmp: save_checkpoint(tmp, model))
        print(f"checkpoint {ns.out}")
    else:
        female, male = train_gd2(items, cfg=cfg)
        female.meta["features"] = male.meta["features"] = ns.features
        path_f, path_m = _gd2_paths(ns.out)
        _atomic(path_f, lambda tmp: save_checkpoint(tmp, female))
        _atomic(path_m, lambda tmp: save_checkpoint(tmp, male))
        print(f"checkpoint {path_f}")
        print(f"checkpoint {path_m}")
    print(f"segments {len(items)}")
    return 0


DETECT_OPTS = (
    Opt("model", str, None, "OSD checkpoint", required=True),
    Opt("out", str, None, "output directory", required=True),
    Opt("threshold", float, 0.5, "overlap decision threshold"),
    Opt("median", int, 11, "median smoothing width in frames"),
    Opt("features", str, None, "feature kind override", choices=FEATURE_KINDS),
    Opt("jobs", int, 1, "parallel workers"),
)


def _feature_kind_for_model(model, override):
    kind = override or model.meta.get("features")
    if kind is None:
        raise UsageError("checkpoint does not record its feature kind; pass --features")
    return kind


def _cmd_detect(args, ns):
    model = load_checkpoint(ns.model)
    kind = _feature_kind_for_model(model, ns.features)
    os.makedirs(ns.out, exist_ok=True)

    def one(path):
        feats = _features_for(kind, path)
        labels, track = detect_overlap(model, feats, threshold=ns.threshold,
                                       median_frames=ns.median)
        scores = os.path.join(ns.out, _stem(path) + ".scores.csv")
        spans = os.path.join(ns.out, _stem(path) + ".segments.csv")
        _atomic(scores, lambda tmp: write_score_csv(tmp, track))
        _atomic(spans, lambda tmp: write_overlap_segments(tmp, labels))
        return scores, spans

    with ThreadPoolExecutor(max_workers=max(1, ns.jobs)) as pool:
        results = list(pool.map(one, args.inputs))
    for src, (scores, spans) in zip(args.inputs, results):
        print(f"{src} {scores} {spans}")
    return 0


def _load_gd_models(path):
    """A gd1 checkpoint file, or a prefix naming a gd2 .female/.male pair."""
    if os.path.isfile(path):
        model = load_checkpoint(path)
        if model.meta.get("task", "gd1").startswith("gd2"):
            raise UsageError("gd2 decisions need both regressors; pass the "
                             "checkpoint prefix instead of one file")
        return model
    path_f, path_m = _gd2_paths(path)
    if os.path.isfile(path_f) and os.path.isfile(path_m):
        return load_checkpoint(path_f), load_checkpoint(path_m)
    raise UsageError(f"no checkpoint at {path} and no pair {path_f} / {path_m}")


def _gd_feature_kind(models, override):
    model = models if isinstance(models, SequenceModel) else models[0]
    return _feature_kind_for_model(model, override)


CLASSIFY_OPTS = (
    Opt("model", str, None, "gd1 checkpoint or gd2 prefix", required=True),
    Opt("features", str, None, "feature kind override", choices=FEATURE_KINDS),
    Opt("offset-female", float, 0.0, "bias added to the female score (gd2)"),
    Opt("out", str, None, "output CSV (default stdout)"),
)


def _cmd_classify_gender(args, ns):
    models = _load_gd_models(ns.model)
    kind = _gd_feature_kind(models, ns.features)
    rows = ["file,label,score_female,score_male"]
    for path in args.inputs:
        feats = _features_for(kind, path)
        d = classify_segment(models, feats, offset_female=ns.offset_female)
        rows.append(f"{path},{d.label},{d.score_female:.6f},{d.score_male:.6f}")
    text = "\n".join(rows) + "\n"
    if ns.out:
        _atomic(ns.out, lambda tmp: _write_text(tmp, text))
    else:
        sys.stdout.write(text)
    return 0


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


ANALYZE_OPTS = (
    Opt("model", str, None, "gd1 checkpoint or gd2 prefix", required=True),
    Opt("features", str, None, "feature kind override", choices=FEATURE_KINDS),
    Opt("window", int, 100, "sliding window length in frames"),
    Opt("out", str, None, "gender track CSV", required=True),
)


def _cmd_analyze_show(args, ns):
    models = _load_gd_models(ns.model)
    if isinstance(models, SequenceModel):
        raise UsageError("sliding analysis needs the gd2 regressor pair")
    kind = _gd_feature_kind(models, ns.features)
    feats = _features_for(kind, args.inputs[0])
    track = sliding_gender_scores(models, feats, window=ns.window)
    _atomic(ns.out, lambda tmp: write_gender_track_csv(tmp, track))
    print(f"track {ns.out}")
    return 0


EVAL_OSD_OPTS = (
    Opt("ref", str, None, "reference annotation or span CSV", required=True),
    Opt("hyp", str, None, "hypothesis annotation or span CSV", required=True),
    Opt("collar", int, 0, "forgiveness collar in frames"),
    Opt("out", str, None, "report CSV path"),
)


def _overlap_frames(path):
    """Frame raster from either annotation format.

    Corpus CSVs (file,start_s,end_s,speaker,gender) rasterize speaker overlap;
    span CSVs (start_s,end_s,label) mark every listed span positive.
    """
    lines = _read_lines(path)
    header = lines[0].strip() if lines else ""
    if header == ",".join(CSV_HEADER):
        segments = parse_segments(path)
        duration = max((s.end_s for s in segments), default=0.0)
        return rasterize(segments, duration, "overlap").labels
    if header == "start_s,end_s,label":
        spans = []
        for line_no, line in enumerate(lines[1:], start=2):
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ParseError(line_no, f"expected 3 fields, got {len(parts)}")
            try:
                spans.append((float(parts[0]), float(parts[1])))
            except ValueError:
                raise ParseError(line_no, f"bad span {line!r}") from None
        n = max((span_to_frames(lo, hi)[1] for lo, hi in spans), default=0)
        frames = np.zeros(n, dtype=np.int8)
        for lo_s, hi_s in spans:
            lo, hi = span_to_frames(lo_s, hi_s)
            frames[lo:hi] = 1
        return frames
    raise ParseError(1, f"{path}: unrecognized header {header!r}")


def _cmd_eval_osd(args, ns):
    ref = _overlap_frames(ns.ref)
    hyp = _overlap_frames(ns.hyp)
    n = max(len(ref), len(hyp))
    ref = np.pad(ref, (0, n - len(ref)))
    hyp = np.pad(hyp, (0, n - len(hyp)))
    report = frame_prf(binary_labels(ref), binary_labels(hyp), collar_frames=ns.collar)
    for name, value in (("P", report.precision), ("R", report.recall), ("F1", report.f1)):
        print(f"{name} {'undef' if value is None else f'{100.0 * value:.1f}'}")
    print("counts " + " ".join(f"{k}={v}" for k, v in sorted(report.confusion.items())))
    if ns.out:
        _atomic(ns.out, lambda tmp: write_report_csv(tmp, report))
    return 0


EVAL_GD_OPTS = (
    Opt("ref", str, None, "reference file,label CSV", required=True),
    Opt("hyp", str, None, "hypothesis file,label CSV", required=True),
    Opt("out", str, None, "report CSV path"),
)


def _label_map(path):
    """file -> gender from any CSV whose header starts file,label."""
    lines = _read_lines(path)
    if not lines or not lines[0].startswith("file,label"):
        raise ParseError(1, f"{path}: expected a file,label CSV")
    out = {}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) < 2:
            raise ParseError(line_no, f"{path}: expected file,label fields")
        out[parts[0]] = normalize_gender(parts[1])
    return out


def _cmd_eval_gd(args, ns):
    ref, hyp = _label_map(ns.ref), _label_map(ns.hyp)
    missing = sorted(set(ref) ^ set(hyp))
    if missing:
        raise ParseError(0, f"ref and hyp disagree on files: {', '.join(missing[:5])}")
    pairs = [(ref[f], hyp[f]) for f in sorted(ref)]
    report = gender_accuracy(pairs)
    print(format_report(report))
    if ns.out:
        _atomic(ns.out, lambda tmp: write_report_csv(tmp, report))
    return 0


PITCH_OPTS = (
    Opt("out", str, None, "output directory (tracks) or CSV (histogram)", required=True),
    Opt("ref", str, None, "reference file,label CSV (histogram mode)"),
    Opt("hyp", str, None, "hypothesis file,label CSV (histogram mode)"),
    Opt("bin-width", float, 0.05, "histogram bin width in log-F0"),
    Opt("tail", float, 0.05, "tail fraction for the quantile report"),
)


def _write_f0_csv(path, track):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("time_s,f0_hz,voiced,cmnd_min\n")
        for t, f0, v, c in zip(track.times_s, track.f0_hz, track.voiced, track.cmnd_min):
            fh.write(f"{t:.6f},{f0:.6f},{int(v)},{c:.6f}\n")


def _cmd_pitch_analysis(args, ns):
    if ns.hyp is None:
        os.makedirs(ns.out, exist_ok=True)
        for path in args.inputs:
            track = yin_f0(read_wav(path))
            dest = os.path.join(ns.out, _stem(path) + ".f0.csv")
            _atomic(dest, lambda tmp: _write_f0_csv(tmp, track))
            print(f"{path} {dest}")
        return 0
    if ns.ref is None:
        raise UsageError("histogram mode needs both --ref and --hyp")
    ref, hyp = _label_map(ns.ref), _label_map(ns.hyp)
    missing = sorted(set(ref) ^ set(hyp))
    if missing:
        raise ParseError(0, f"ref and hyp disagree on files: {', '.join(missing[:5])}")
    results = []
    for path in sorted(ref):
        logf0 = segment_log_f0(yin_f0(read_wav(path)))
        results.append((ref[path], hyp[path], logf0))
    hist = error_pitch_histogram(results, bin_width=ns.bin_width, tail_fraction=ns.tail)
    _atomic(ns.out, lambda tmp: write_histogram_csv(tmp, hist))
    print(format_quantile_report(hist))
    return 0


SUBSET_OPTS = (
    Opt("data", str, None, "corpus annotation CSV", required=True),
    Opt("out", str, None, "output directory", required=True),
    Opt("test-speakers", int, 40, "test speakers per gender"),
    Opt("test-segments", int, 4000, "total test segments"),
    Opt("train-segments", int, 60000, "total train segments"),
    Opt("segment-seconds", float, 1.0, "slice length"),
    Opt("seed", int, 0, "selection RNG seed"),
)


def _cmd_subset(args, ns):
    rules = SubsetRules(n_test_speakers_per_gender=ns.test_speakers,
                        n_test_segments=ns.test_segments,
                        n_train_segments=ns.train_segments,
                        segment_s=ns.segment_seconds, seed=ns.seed)
    train, test, report = select_balanced_subset(parse_segments(ns.data), rules)
    os.makedirs(ns.out, exist_ok=True)
    train_path = os.path.join(ns.out, "train.csv")
    test_path = os.path.join(ns.out, "test.csv")
    _atomic(train_path, lambda tmp: save_segments(tmp, train))
    _atomic(test_path, lambda tmp: save_segments(tmp, test))
    for key in sorted(report):
        value = report[key]
        if isinstance(value, list):
            value = len(value)
        elif isinstance(value, dict):
            continue
        print(f"{key} {value}")
    print(f"train_csv {train_path}")
    print(f"test_csv {test_path}")
    return 0


def _cmd_stats(args, ns):
    path = args.path
    if os.path.isdir(path):
        path = os.path.join(path, "manifest.csv")
    lines = _read_lines(path)
    header = lines[0].strip() if lines else ""
    if header == "show,wav_path,csv_path,duration_s":
        root = os.path.dirname(os.path.abspath(path))
        segments, durations = [], {}
        for e in read_manifest(path):
            segments.extend(parse_segments(os.path.join(root, e.csv_path)))
            durations[e.show] = e.duration_s
        stats = compute_stats(segments, durations)
    else:
        stats = compute_stats(parse_segments(path))
    print(format_stats(stats))
    return 0


# --------------------------------------------------------------------------
# Parser assembly
# --------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="crosstalk",
                     description="Overlapped speech and speaker gender pipelines.")
    parser.add_argument("--version", action="version",
                        version=f"crosstalk {__version__} "
                                f"(checkpoint v{NNCK_VERSION}, feat v{FEAT_VERSION})")
    subs = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, opts, help_text, inputs=None):
        sub = subs.add_parser(name, help=help_text, description=help_text)
        _add_opts(sub, opts)
        if inputs:
            nargs, meta = inputs
            sub.add_argument("inputs", nargs=nargs, metavar=meta)
        sub.set_defaults(func=func, opts=opts)
        return sub

    add("synth", _cmd_synth, SYNTH_OPTS, "generate a synthetic overlap corpus")
    add("features", _cmd_features, FEATURES_OPTS, "extract features to .feat files",
        inputs=("+", "wav"))
    add("train-osd", _cmd_train_osd, TRAIN_OSD_OPTS, "train an overlap detector")
    add("train-gd", _cmd_train_gd, TRAIN_GD_OPTS, "train gender classifiers")
    add("detect", _cmd_detect, DETECT_OPTS, "run overlap detection on files",
        inputs=("+", "input"))
    add("classify-gender", _cmd_classify_gender, CLASSIFY_OPTS,
        "classify whole files as female/male", inputs=("+", "input"))
    add("analyze-show", _cmd_analyze_show, ANALYZE_OPTS,
        "sliding-window gender score track for one show", inputs=(1, "input"))
    add("eval-osd", _cmd_eval_osd, EVAL_OSD_OPTS, "frame-level overlap scoring")
    add("eval-gd", _cmd_eval_gd, EVAL_GD_OPTS, "segment-level gender scoring")
    add("pitch-analysis", _cmd_pitch_analysis, PITCH_OPTS,
        "YIN F0 tracks, or the error-vs-pitch histogram", inputs=("*", "wav"))
    add("subset", _cmd_subset, SUBSET_OPTS, "select a gender-balanced subset")

    stats = subs.add_parser("stats", help="corpus statistics",
                            description="Print duration/overlap/gender statistics.")
    stats.add_argument("--config", default=None, help="flat key=value config file")
    stats.add_argument("path", help="manifest.csv, corpus directory, or annotation CSV")
    stats.set_defaults(func=_cmd_stats, opts=())

    return parser


def run(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if getattr(args, "func", None) is None:
        parser.print_help(sys.stderr)
        return 1
    try:
        ns = _resolve(args, args.opts)
        return args.func(args, ns)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NonFiniteLoss as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except CrosstalkError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

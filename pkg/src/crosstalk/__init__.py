"""Overlapped-speech and speaker-gender analysis for 16 kHz mono audio."""

from . import errors
from .audio import AudioBuffer, MixResult, MixSpec, mix_overlap, read_wav, synth_voice, write_wav
from .features import (
    FeatureMatrix,
    MfccConfig,
    extract_mfcc,
    load_feature_file,
    save_feature_file,
    stub_features,
    upsample_frames,
)
from .frames import FRAME_RATE, FrameLabels, ScoreTrack

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer",
    "FRAME_RATE",
    "FeatureMatrix",
    "FrameLabels",
    "MfccConfig",
    "MixResult",
    "MixSpec",
    "ScoreTrack",
    "errors",
    "extract_mfcc",
    "load_feature_file",
    "mix_overlap",
    "read_wav",
    "save_feature_file",
    "stub_features",
    "synth_voice",
    "upsample_frames",
    "write_wav",
]

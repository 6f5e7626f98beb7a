"""Shared helpers: in-memory voice corpora and small trained models."""

from __future__ import annotations

import numpy as np
import pytest

from crosstalk.audio import synth_voice
from crosstalk.features import extract_mfcc, stub_features

F0_FEMALE = (180.0, 280.0)
F0_MALE = (90.0, 150.0)


def voice_f0s(rng, gender, n):
    lo, hi = F0_FEMALE if gender == "f" else F0_MALE
    return rng.uniform(lo, hi, n)


def gd_items(kind="mfcc", speakers_per_gender=4, per_speaker=12, seed=0,
             duration_s=1.0):
    """Balanced (features, gender index) pairs from synthetic voices.

    ``kind`` picks the feature family; labels use 0=female, 1=male.
    """
    rng = np.random.default_rng(seed)
    items = []
    for gender, label in (("f", 0), ("m", 1)):
        for f0 in voice_f0s(rng, gender, speakers_per_gender):
            for _ in range(per_speaker):
                audio = synth_voice(float(f0), duration_s, int(rng.integers(2 ** 31)))
                if kind == "mfcc":
                    x = extract_mfcc(audio).data
                else:
                    x = stub_features(audio, int(kind[4:])).data
                items.append((x, label))
    return items


@pytest.fixture(scope="session")
def tiny_corpus_dir(tmp_path_factory):
    """A small synthetic overlap corpus on disk, shared across tests."""
    from crosstalk.corpus import SynthCorpusConfig, build_synthetic_corpus

    out = tmp_path_factory.mktemp("corpus")
    build_synthetic_corpus(
        SynthCorpusConfig(n_shows=12, show_s=2.0, speakers_per_gender=3,
                          overlap_fraction=0.10, seed=21), out)
    return out

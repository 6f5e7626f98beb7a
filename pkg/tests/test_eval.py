import numpy as np
import pytest

from crosstalk.errors import BadAlphabet, EmptyInput, LengthMismatch
from crosstalk.eval import (
    f1_from_precision_recall,
    format_report,
    frame_prf,
    gender_accuracy,
    normalize_gender,
    write_report_csv,
)

# published precision/recall pairs with their F1 scores, in percent
PUBLISHED_F1 = [
    (34.2, 60.8, 43.8),
    (46.6, 59.8, 52.4),
    (61.0, 63.6, 62.3),
    (60.1, 67.1, 63.4),
    (57.2, 62.8, 59.9),
]


@pytest.mark.parametrize("p,r,f1", PUBLISHED_F1)
def test_f1_reproduces_published_values(p, r, f1):
    got = f1_from_precision_recall(p / 100, r / 100)
    assert abs(100 * got - f1) <= 0.05


def test_f1_degenerate():
    assert f1_from_precision_recall(0.0, 0.0) is None
    assert f1_from_precision_recall(1.0, 1.0) == pytest.approx(1.0)


def test_frame_prf_hand_case():
    ref = np.int8([0, 0, 1, 1, 1, 0, 1, 0])
    hyp = np.int8([0, 1, 1, 1, 0, 0, 0, 0])
    rep = frame_prf(ref, hyp)
    assert rep.confusion == {"tp": 2, "fp": 1, "fn": 2, "tn": 3}
    assert rep.precision == pytest.approx(2 / 3)
    assert rep.recall == pytest.approx(0.5)
    assert rep.f1 == pytest.approx(f1_from_precision_recall(2 / 3, 0.5))
    assert rep.support == {"frames": 8, "positives": 4}
    assert rep.undefined == ()


def test_frame_prf_matches_f1_identity():
    rng = np.random.default_rng(0)
    for _ in range(20):
        ref = rng.integers(0, 2, size=200)
        hyp = rng.integers(0, 2, size=200)
        rep = frame_prf(ref, hyp)
        if rep.f1 is not None:
            assert rep.f1 == pytest.approx(
                f1_from_precision_recall(rep.precision, rep.recall))


def test_frame_prf_swapping_roles_swaps_p_and_r():
    rng = np.random.default_rng(1)
    ref = rng.integers(0, 2, size=300)
    hyp = rng.integers(0, 2, size=300)
    a = frame_prf(ref, hyp)
    b = frame_prf(hyp, ref)
    assert a.precision == pytest.approx(b.recall)
    assert a.recall == pytest.approx(b.precision)
    assert a.f1 == pytest.approx(b.f1)


def test_collar_excludes_boundary_frames():
    ref = np.int8([0] * 10 + [1] * 10 + [0] * 10)
    hyp = ref.copy()
    hyp[8:10] = 1   # errors just before the onset boundary
    hyp[10:12] = 0  # and just after
    assert frame_prf(ref, hyp).f1 < 1.0
    rep = frame_prf(ref, hyp, collar_frames=2)
    assert rep.f1 == pytest.approx(1.0)
    assert rep.support["frames"] == 30 - 2 * 4  # two boundaries, 2r frames each


def test_frame_prf_undefined_cases():
    rep = frame_prf(np.zeros(10, dtype=np.int8), np.zeros(10, dtype=np.int8))
    assert rep.precision is None and rep.recall is None and rep.f1 is None
    assert rep.undefined == ("precision", "recall", "f1")

    rep = frame_prf(np.zeros(10, dtype=np.int8), np.ones(10, dtype=np.int8))
    assert rep.precision == 0.0 and rep.recall is None

    with pytest.raises(LengthMismatch):
        frame_prf(np.zeros(5, dtype=np.int8), np.zeros(6, dtype=np.int8))
    with pytest.raises(BadAlphabet):
        frame_prf(np.int8([0, 2]), np.int8([0, 1]))


def test_normalize_gender():
    for key in ("f", "F", " female ", "0", 0):
        assert normalize_gender(key) == "f"
    for key in ("m", "Male", "1", 1):
        assert normalize_gender(key) == "m"
    with pytest.raises(BadAlphabet):
        normalize_gender("unknown")
    with pytest.raises(BadAlphabet):
        normalize_gender(None)


def test_gender_accuracy_weighted_identity():
    """Balanced per-gender accuracies of 97.8 and 92.1 average to 94.95."""
    pairs = []
    pairs += [("f", "f")] * 978 + [("f", "m")] * 22
    pairs += [("m", "m")] * 921 + [("m", "f")] * 79
    rep = gender_accuracy(pairs)
    assert rep.acc_f == pytest.approx(0.978)
    assert rep.acc_m == pytest.approx(0.921)
    assert rep.acc == 1899 / 2000
    assert rep.acc == pytest.approx((rep.acc_f + rep.acc_m) / 2)
    assert rep.support == {"total": 2000, "f": 1000, "m": 1000}


def test_gender_accuracy_unbalanced_weighting():
    pairs = [("f", "f")] * 3 + [("m", "f")] * 1
    rep = gender_accuracy(pairs)
    assert rep.acc == pytest.approx(0.75)
    assert rep.acc_f == 1.0 and rep.acc_m == 0.0
    assert rep.confusion == {"f->f": 3, "f->m": 0, "m->f": 1, "m->m": 0}


def test_gender_accuracy_single_gender_leaves_other_undefined():
    rep = gender_accuracy([("f", "f"), ("f", "m")])
    assert rep.acc_m is None
    assert rep.undefined == ("acc_m",)


def test_gender_accuracy_validation():
    with pytest.raises(EmptyInput):
        gender_accuracy([])
    with pytest.raises(BadAlphabet):
        gender_accuracy([("f", "x")])


def test_format_report_layouts():
    osd = frame_prf(np.int8([0, 1, 1]), np.int8([0, 1, 0]))
    text = format_report(osd)
    assert text.splitlines()[0] == "metric     value"
    assert "precision  100.0" in text
    assert "recall     50.0" in text
    assert "counts" in text.splitlines()[-1]

    gd = gender_accuracy([("f", "f"), ("m", "m")])
    text = format_report(gd)
    assert "acc        100.0" in text

    und = format_report(frame_prf(np.zeros(4, dtype=np.int8),
                                  np.zeros(4, dtype=np.int8)))
    assert "precision  undef" in und


def test_write_report_csv(tmp_path):
    rep = frame_prf(np.int8([0, 1, 1, 0]), np.int8([0, 1, 0, 0]))
    p = tmp_path / "report.csv"
    write_report_csv(p, rep)
    lines = p.read_text().splitlines()
    assert lines[0] == "metric,value,support"
    assert lines[1] == "precision,1.000000,4"
    assert lines[3].startswith("f1,")
    assert any(line.startswith("tp,1,") for line in lines)

import math
import os
import subprocess
import sys

import numpy as np
import pytest

from crosstalk.errors import EmptyDataset, NonFiniteLoss
from crosstalk.neural import kernels
from crosstalk.neural.layers import Param
from crosstalk.neural.models import (
    build_gd_backbone,
    build_linear,
    build_rosd,
    build_tcn,
    forward,
)
from crosstalk.neural.train import (
    Adam,
    TrainConfig,
    batch_loss,
    grad_check,
    softmax,
    train,
)

RNG = np.random.default_rng(1234)


def test_softmax_rows_and_shift_invariance():
    z = RNG.standard_normal((3, 4, 5))
    p = softmax(z)
    assert np.allclose(p.sum(axis=-1), 1.0)
    assert np.allclose(softmax(z + 100.0), p)
    assert np.isfinite(softmax(np.array([[1e4, -1e4]]))).all()


# -- loss oracles -----------------------------------------------------------

def test_frame_ce_matches_hand_computation():
    out = RNG.standard_normal((2, 3, 4))
    tgt = RNG.integers(0, 4, size=(2, 3))
    loss, grads = batch_loss("cross_entropy", [out], [tgt], [None])
    expect = 0.0
    for b in range(2):
        for t in range(3):
            z = out[b, t]
            expect -= z[tgt[b, t]] - math.log(np.exp(z - z.max()).sum()) - z.max()
    assert abs(loss - expect / 6) < 1e-12
    # gradient rows: softmax minus one-hot, over the frame count
    g = grads[0][0, 0]
    p = softmax(out[0, 0])
    p[tgt[0, 0]] -= 1.0
    assert np.allclose(g, p / 6)


def test_frame_ce_mask_excludes_padding():
    out = RNG.standard_normal((1, 4, 2))
    tgt = np.array([[0, 1, 0, 1]])
    mask = np.array([[1.0, 1.0, 0.0, 0.0]])
    loss, grads = batch_loss("cross_entropy", [out], [tgt], [mask])
    short_loss, _ = batch_loss("cross_entropy", [out[:, :2]], [tgt[:, :2]], [None])
    assert abs(loss - short_loss) < 1e-12
    assert not grads[0][:, 2:].any()


def test_frame_ce_global_normalization():
    """Splitting a batch into length groups must not change the loss."""
    a = RNG.standard_normal((2, 3, 2))
    b = RNG.standard_normal((1, 5, 2))
    ta = RNG.integers(0, 2, size=(2, 3))
    tb = RNG.integers(0, 2, size=(1, 5))
    loss, grads = batch_loss("cross_entropy", [a, b], [ta, tb], [None, None])
    la, _ = batch_loss("cross_entropy", [a], [ta], [None])
    lb, _ = batch_loss("cross_entropy", [b], [tb], [None])
    assert abs(loss - (la * 6 + lb * 5) / 11) < 1e-12
    assert abs(np.concatenate([g.sum() for g in grads], axis=None).size - 2) == 0


def test_segment_ce_sums_logits_over_time():
    out = RNG.standard_normal((2, 4, 3))
    tgt = np.array([2, 0])
    loss, grads = batch_loss("cross_entropy", [out], [tgt], [None])
    expect = 0.0
    for b in range(2):
        s = out[b].sum(axis=0)
        expect -= s[tgt[b]] - math.log(np.exp(s - s.max()).sum()) - s.max()
    assert abs(loss - expect / 2) < 1e-12
    # every frame of a sequence shares the same output gradient
    assert np.allclose(grads[0][0], grads[0][0, :1])


def test_segment_rmse_oracle():
    out = np.array([[[1.0], [2.0]], [[0.5], [0.5]]])  # sums 3.0 and 1.0
    tgt = np.array([2.0, -1.0])
    loss, grads = batch_loss("rmse", [out], [tgt], [None])
    assert abs(loss - math.sqrt((1.0 + 4.0) / 2)) < 1e-12
    # d loss / d sum_b = resid_b / (n * loss)
    assert np.allclose(grads[0][:, 0, 0], np.array([1.0, 2.0]) / (2 * loss))


def test_frame_rmse_oracle():
    out = np.array([[[1.0, 0.0], [0.0, 2.0]]])
    tgt = np.zeros((1, 2, 2))
    loss, grads = batch_loss("rmse", [out], [tgt], [None])
    assert abs(loss - math.sqrt((1 + 4) / 4)) < 1e-12
    assert np.allclose(grads[0], out / (4 * loss))


# -- optimizer --------------------------------------------------------------

def test_adam_constant_gradient_steps():
    p = Param(np.zeros(3))
    opt = Adam({"w": p}, lr=0.01)
    g = np.array([0.5, -2.0, 1e-12])
    for k in range(1, 4):
        p.grad[...] = g
        opt.step()
        expect = -k * 0.01 * g / (np.abs(g) + 1e-8)
        assert np.allclose(p.value, expect, atol=1e-12)


# -- finite-difference checks ----------------------------------------------

TOY_CE = {
    "linear": (lambda: build_linear(5, 2, seed=0), 7),
    "gd": (lambda: build_gd_backbone(3, head="two_way", hidden=4, seed=1), 6),
    "rosd": (lambda: build_rosd(5, hidden=3, ff=4, seed=2), 6),
    "tcn": (lambda: build_tcn(5, 2, bottleneck=3, hidden=4, n_blocks=2,
                              n_repeats=1, seed=3), 9),
}


@pytest.mark.filterwarnings("ignore:input dim")
@pytest.mark.parametrize("arch", sorted(TOY_CE))
def test_grad_check_frame_ce(arch):
    factory, frames = TOY_CE[arch]
    model = factory()
    rng = np.random.default_rng(7)
    x = rng.standard_normal((frames, model.input_dim))
    y = rng.integers(0, model.n_out, size=frames)
    assert grad_check(model, x, y) <= 1e-3


def test_grad_check_segment_losses():
    rng = np.random.default_rng(8)
    ce = build_gd_backbone(3, head="two_way", hidden=4, seed=4)
    x = rng.standard_normal((6, 3))
    assert grad_check(ce, x, np.int64(1)) <= 1e-3
    reg = build_gd_backbone(3, head="scalar", hidden=4, seed=5)
    assert grad_check(reg, x, np.float64(0.7), loss="rmse") <= 1e-3


def test_grad_check_eps_validation():
    m = build_linear(3, 2)
    x = np.zeros((2, 3))
    with pytest.raises(ValueError):
        grad_check(m, x, np.array([0, 1]), eps=1e-2)


# -- the training loop ------------------------------------------------------

def _separable_items(n=24, dim=6, frames=10, seed=0):
    rng = np.random.default_rng(seed)
    items = []
    for i in range(n):
        label = i % 2
        x = rng.standard_normal((frames, dim)) + 2.0 * label
        items.append((x, np.full(frames, label)))
    return items


def test_train_reduces_loss_and_learns():
    items = _separable_items()
    model, hist = train(build_linear(6, 2), items,
                        TrainConfig(max_epochs=60, learning_rate=0.05, seed=0))
    assert hist.train_loss[-1] < hist.train_loss[0]
    frames = np.concatenate([np.argmax(forward(model, x), axis=1) == t
                             for x, t in items])
    assert frames.mean() >= 0.95


def test_train_is_seed_deterministic():
    items = _separable_items()
    cfg = TrainConfig(max_epochs=3, learning_rate=0.01, seed=5)
    a, _ = train(build_linear(6, 2, seed=1), items, cfg)
    b, _ = train(build_linear(6, 2, seed=1), items, cfg)
    c, _ = train(build_linear(6, 2, seed=1), items,
                 TrainConfig(max_epochs=3, learning_rate=0.01, seed=6))
    for k in a.params:
        assert a.params[k].value.tobytes() == b.params[k].value.tobytes()
    assert any(a.params[k].value.tobytes() != c.params[k].value.tobytes()
               for k in a.params)


def test_train_does_not_mutate_input_model():
    m = build_linear(6, 2, seed=2)
    before = {k: p.value.copy() for k, p in m.params.items()}
    train(m, _separable_items(), TrainConfig(max_epochs=2, learning_rate=0.1))
    for k, p in m.params.items():
        assert np.array_equal(p.value, before[k])


def test_train_mixed_length_batches():
    rng = np.random.default_rng(3)
    items = [(rng.standard_normal((t, 4)), rng.integers(0, 2, size=t))
             for t in (5, 9, 5, 7, 9, 5)]
    model, hist = train(build_linear(4, 2), items, TrainConfig(max_epochs=2))
    assert hist.n_epochs == 2 and np.isfinite(hist.train_loss).all()


def test_early_stopping_restores_best():
    """Dev labels oppose train labels, so dev loss rises while train falls."""
    items = _separable_items(seed=4)
    dev = [(x, 1 - t) for x, t in items[:8]]
    cfg = TrainConfig(max_epochs=50, learning_rate=0.05, seed=0, patience=3)
    model, hist = train(build_linear(6, 2), items, cfg, dev=dev)
    assert hist.n_epochs < 50
    assert hist.best_epoch == int(np.argmin(hist.dev_loss))
    outs = [forward(model, x)[None] for x, _ in dev]
    tgts = [np.asarray(t)[None] for _, t in dev]
    restored, _ = batch_loss("cross_entropy", outs, tgts, [None] * len(dev))
    assert abs(restored - min(hist.dev_loss)) < 1e-5


def test_empty_dataset_rejected():
    with pytest.raises(EmptyDataset):
        train(build_linear(3, 2), [], TrainConfig())


def test_non_finite_loss_reports_epoch():
    huge = np.full((4, 3), 1e38, dtype=np.float32)
    items = [(huge, np.float64(0.0))]
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(NonFiniteLoss) as exc:
            train(build_linear(3, 1), items,
                  TrainConfig(max_epochs=3, learning_rate=1.0, loss="rmse"))
    assert exc.value.epoch == 0


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(max_epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1.0)
    with pytest.raises(ValueError):
        TrainConfig(loss="hinge")


# -- kernel backends --------------------------------------------------------

def test_kernel_backends_agree():
    if kernels.backend_name() != "cython":
        pytest.skip("compiled kernel not loaded")
    _ckernels = kernels._ckernels
    for dtype, tol in ((np.float32, 1e-5), (np.float64, 1e-12)):
        rng = np.random.default_rng(17)
        B, T, H = 3, 12, 5
        xp = rng.standard_normal((B, T, 4 * H)).astype(dtype)
        w_hh = (rng.standard_normal((H, 4 * H)) * 0.2).astype(dtype)
        h0, c0, g0 = kernels.lstm_seq_forward_np(xp, w_hh)
        h1, c1, g1 = _ckernels.lstm_seq_forward(xp, w_hh)
        assert np.allclose(h0, h1, atol=tol)
        dh = rng.standard_normal(np.shape(h0)).astype(dtype)
        dxp0, dw0 = kernels.lstm_seq_backward_np(dh, g0, c0, h0, w_hh)
        dxp1, dw1 = _ckernels.lstm_seq_backward(dh, np.asarray(g1), np.asarray(c1),
                                                np.asarray(h1), w_hh)
        assert np.allclose(dxp0, dxp1, atol=tol)
        assert np.allclose(dw0, dw1, atol=tol)


def test_backend_override_env(tmp_path):
    code = (
        "from crosstalk.neural import kernels\n"
        "print(kernels.backend_name())\n"
    )
    env = dict(os.environ, CROSSTALK_NO_EXT="1")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                         text=True, env=env, check=True)
    assert out.stdout.strip() == "numpy"

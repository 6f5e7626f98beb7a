"""Losses, the Adam loop, early stopping, and the finite-difference oracle.

Targets select how a loss is applied:

* int array per frame  -> frame-wise cross-entropy (optional padding mask)
* int scalar           -> segment cross-entropy on time-summed logits
* float scalar         -> segment regression (RMSE) on time-summed outputs
* float array          -> frame-wise RMSE against same-shaped targets
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyDataset, NonFiniteLoss
from ..features import FeatureMatrix
from .models import SequenceModel

LOSSES = ("cross_entropy", "rmse")


@dataclass
class TrainConfig:
    max_epochs: int = 120
    learning_rate: float = 1e-3
    batch_size: int = 32
    seed: int = 0
    patience: int = 10
    loss: str = "cross_entropy"

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    dev_loss: list = field(default_factory=list)
    best_epoch: int | None = None

    @property
    def n_epochs(self) -> int:
        return len(self.train_loss)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def batch_loss(loss_name: str, outputs: list, targets: list, masks: list):
    """Loss and output gradients over a whole batch of same-shape groups.

    ``outputs`` are (B, T, K) arrays; the matching ``targets`` entry is a
    (B,)-or-(B, T, ...) array per group.  Normalization is global across
    the batch so grouping by length does not change the objective.
    """
    segment = targets[0].ndim == 1
    if loss_name == "cross_entropy":
        if segment:
            return _segment_ce(outputs, targets)
        return _frame_ce(outputs, targets, masks)
    if segment:
        return _segment_rmse(outputs, targets)
    return _frame_rmse(outputs, targets, masks)


def _frame_ce(outputs, targets, masks):
    n = 0
    for out, mask in zip(outputs, masks):
        n += out.shape[0] * out.shape[1] if mask is None else int(mask.sum())
    n = max(n, 1)
    loss = 0.0
    grads = []
    for out, tgt, mask in zip(outputs, targets, masks):
        p = softmax(out)
        logp = np.log(np.maximum(p, 1e-30))
        picked = np.take_along_axis(logp, tgt[..., None], axis=2)[..., 0]
        d = p.copy()
        np.put_along_axis(d, tgt[..., None],
                          np.take_along_axis(d, tgt[..., None], axis=2) - 1.0, axis=2)
        if mask is not None:
            picked = picked * mask
            d *= mask[..., None]
        loss -= float(picked.sum(dtype=np.float64))
        grads.append((d / n).astype(out.dtype))
    return loss / n, grads


def _segment_ce(outputs, targets):
    sums = [out.sum(axis=1) for out in outputs]
    n = sum(s.shape[0] for s in sums)
    loss = 0.0
    grads = []
    for out, s, tgt in zip(outputs, sums, targets):
        p = softmax(s)
        loss -= float(np.log(np.maximum(p[np.arange(len(tgt)), tgt], 1e-30)).sum(dtype=np.float64))
        d = p.copy()
        d[np.arange(len(tgt)), tgt] -= 1.0
        d /= n
        grads.append(np.broadcast_to(d[:, None, :], out.shape).astype(out.dtype))
    return loss / n, grads


def _segment_rmse(outputs, targets):
    sums = [out.sum(axis=(1, 2)) for out in outputs]
    resid = [s - t for s, t in zip(sums, targets)]
    n = sum(len(r) for r in resid)
    mse = sum(float(np.sum(r * r, dtype=np.float64)) for r in resid) / n
    loss = float(np.sqrt(mse))
    scale = 1.0 / (n * max(loss, 1e-12))
    grads = [
        np.broadcast_to((r * scale)[:, None, None], out.shape).astype(out.dtype)
        for r, out in zip(resid, outputs)
    ]
    return loss, grads


def _frame_rmse(outputs, targets, masks):
    n = 0
    sq = 0.0
    resid = []
    for out, tgt, mask in zip(outputs, targets, masks):
        r = out - tgt
        if mask is not None:
            r = r * mask[..., None]
            n += int(mask.sum()) * out.shape[2]
        else:
            n += out.size
        resid.append(r)
        sq += float(np.sum(r * r, dtype=np.float64))
    n = max(n, 1)
    loss = float(np.sqrt(sq / n))
    scale = 1.0 / (n * max(loss, 1e-12))
    grads = [(r * scale).astype(r.dtype) for r in resid]
    return loss, grads


class Adam:
    def __init__(self, params: dict, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(p.value) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.value) for k, p in params.items()}
        self.t = 0

    def step(self):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for k, p in self.params.items():
            g = p.grad
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.value -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


@dataclass
class _Item:
    x: np.ndarray          # (T, D)
    target: np.ndarray     # scalar or per-frame
    mask: np.ndarray | None


def _normalize_item(item, dtype) -> _Item:
    if len(item) == 3:
        feats, target, mask = item
    else:
        feats, target = item
        mask = None
    x = feats.data if isinstance(feats, FeatureMatrix) else np.asarray(feats)
    x = x.astype(dtype, copy=False)
    if np.ndim(target) == 0:
        target = np.asarray(target)
    else:
        target = np.asarray(target)
        if target.dtype.kind in "iub":
            target = target.astype(np.int64)
        else:
            target = target.astype(dtype, copy=False)
    if mask is not None:
        mask = np.asarray(mask).astype(dtype)
    return _Item(x, target, mask)


def _batch_groups(items: list[_Item], idx: np.ndarray):
    """Split a batch into groups of equal sequence length, stacked."""
    by_len: dict[int, list[int]] = {}
    for i in idx:
        by_len.setdefault(items[i].x.shape[0], []).append(i)
    for _, group in sorted(by_len.items()):
        xs = np.stack([items[i].x for i in group])
        if items[group[0]].target.ndim == 0:
            tgt = np.stack([items[i].target for i in group])
        else:
            tgt = np.stack([items[i].target for i in group])
        masks = [items[i].mask for i in group]
        mask = None if masks[0] is None else np.stack(masks)
        yield xs, tgt, mask


def _dataset_loss(model: SequenceModel, items: list[_Item], loss_name: str,
                  batch_size: int) -> float:
    """Forward-only loss over a dataset with global normalization."""
    outputs, targets, masks = [], [], []
    idx = np.arange(len(items))
    for lo in range(0, len(items), batch_size):
        for xs, tgt, mask in _batch_groups(items, idx[lo:lo + batch_size]):
            y, _ = model.forward_batch(xs)
            outputs.append(y)
            targets.append(tgt)
            masks.append(mask)
    loss, _ = batch_loss(loss_name, outputs, targets, masks)
    return loss


def train(model: SequenceModel, dataset, cfg: TrainConfig, dev=None):
    """Adam training with seeded shuffling and best-dev early stopping.

    Returns ``(trained_model, history)``; the input model is left untouched.
    """
    raw = list(dataset)
    if not raw:
        raise EmptyDataset("training dataset is empty")
    model = model.copy()
    items = [_normalize_item(it, model.dtype) for it in raw]
    dev_items = [_normalize_item(it, model.dtype) for it in dev] if dev else None

    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model.params, cfg.learning_rate)
    history = TrainHistory()
    best_state = None
    best_dev = np.inf
    bad_epochs = 0

    for epoch in range(cfg.max_epochs):
        order = rng.permutation(len(items))
        epoch_loss = 0.0
        epoch_weight = 0
        for lo in range(0, len(items), cfg.batch_size):
            batch_idx = order[lo:lo + cfg.batch_size]
            groups = list(_batch_groups(items, batch_idx))
            outputs, caches, targets, masks = [], [], [], []
            for xs, tgt, mask in groups:
                y, cache = model.forward_batch(xs)
                outputs.append(y)
                caches.append(cache)
                targets.append(tgt)
                masks.append(mask)
            loss, grads = batch_loss(cfg.loss, outputs, targets, masks)
            if not np.isfinite(loss):
                raise NonFiniteLoss(epoch)
            model.zero_grad()
            for dy, cache in zip(grads, caches):
                model.backward_batch(dy, cache)
            opt.step()
            epoch_loss += loss * len(batch_idx)
            epoch_weight += len(batch_idx)
        history.train_loss.append(epoch_loss / epoch_weight)

        if dev_items is not None:
            dev_loss = _dataset_loss(model, dev_items, cfg.loss, cfg.batch_size)
            history.dev_loss.append(dev_loss)
            if dev_loss < best_dev - 1e-12:
                best_dev = dev_loss
                best_state = model.state()
                history.best_epoch = epoch
                bad_epochs = 0
            else:
                bad_epochs += 1
                if bad_epochs >= cfg.patience:
                    break

    if best_state is not None:
        model.load_state(best_state)
    return model, history


def grad_check(model: SequenceModel, features, targets, loss: str = "cross_entropy",
               eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs in float64; intended for models of at most a few tens of
    thousands of parameters.
    """
    if not (1e-6 <= eps <= 1e-3):
        raise ValueError("eps must lie in [1e-6, 1e-3]")
    m = model.astype(np.float64)
    item = _normalize_item((features, targets), np.float64)
    x = item.x[None]
    tgt = item.target[None] if item.target.ndim else np.asarray([item.target])

    def loss_only():
        y, _ = m.forward_batch(x)
        val, _ = batch_loss(loss, [y], [tgt], [None])
        return val

    y, cache = m.forward_batch(x)
    val, grads = batch_loss(loss, [y], [tgt], [None])
    m.zero_grad()
    m.backward_batch(grads[0], cache)

    worst = 0.0
    for p in m.params.values():
        flat_v = p.value.reshape(-1)
        flat_g = p.grad.reshape(-1)
        for i in range(flat_v.size):
            keep = flat_v[i]
            flat_v[i] = keep + eps
            up = loss_only()
            flat_v[i] = keep - eps
            down = loss_only()
            flat_v[i] = keep
            numeric = (up - down) / (2 * eps)
            denom = max(abs(flat_g[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(flat_g[i] - numeric) / denom)
    return worst

"""Sequence-labeling model definitions and the public forward pass.

Three production architectures plus a plain linear baseline used in tests:

* ``rosd``  - two BiLSTM-128 layers, two 128-d linear layers, 2-d output
* ``tcn``   - 1x1 bottleneck, 3 repeats of 5 dilated residual blocks, head
* ``gd_backbone`` - one LSTM-64 with a two-way or scalar head
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimMismatch, EmptySequence
from ..features import FeatureMatrix
from .layers import BiLSTM, Linear, LSTM, Param, Sequential, Tanh, TcnBlock

KNOWN_INPUT_DIMS = (59, 768, 1024)
ARCH_IDS = {"rosd": 1, "tcn": 2, "gd_backbone": 3, "linear": 4}


@dataclass
class SequenceModel:
    """Architecture descriptor plus named parameter tensors."""

    arch: str
    hyper: dict
    net: Sequential
    meta: dict = field(default_factory=dict)
    params: dict[str, Param] = field(init=False)

    def __post_init__(self):
        self.params = dict(self.net.named_params())

    @property
    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    @property
    def input_dim(self) -> int:
        return int(self.hyper["input_dim"])

    @property
    def n_out(self) -> int:
        return int(self.hyper.get("n_out", 2 if self.hyper.get("head") == "two_way" else 1))

    @property
    def dtype(self):
        return next(iter(self.params.values())).value.dtype

    def zero_grad(self):
        for p in self.params.values():
            p.grad[...] = 0

    def forward_batch(self, x: np.ndarray):
        if x.shape[1] < 1:
            raise EmptySequence("zero-length input sequence")
        if x.shape[2] != self.input_dim:
            raise DimMismatch(f"input dim {x.shape[2]}, model expects {self.input_dim}")
        return self.net.forward(x)

    def backward_batch(self, dy: np.ndarray, cache):
        return self.net.backward(dy, cache)

    def state(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self.params.items()}

    def load_state(self, state: dict[str, np.ndarray]):
        for name, p in self.params.items():
            p.value[...] = state[name]

    def copy(self) -> "SequenceModel":
        m = build_model(self.arch, self.hyper)
        m.meta = dict(self.meta)
        for name, p in m.params.items():
            p.value = self.params[name].value.copy()
        m.params = dict(m.net.named_params())
        return m

    def astype(self, dtype) -> "SequenceModel":
        m = self.copy()
        for p in m.params.values():
            p.value = p.value.astype(dtype)
            p.grad = np.zeros_like(p.value)
        _rebind(m)
        return m


def _rebind(model: SequenceModel):
    """Point layer attributes at the (possibly re-typed) Param objects."""
    model.params = dict(model.net.named_params())


def _warn_unusual_dim(input_dim: int):
    if input_dim not in KNOWN_INPUT_DIMS:
        warnings.warn(
            f"input dim {input_dim} is not one of the pipeline dims {KNOWN_INPUT_DIMS}",
            stacklevel=3,
        )


def build_rosd(input_dim: int, hidden: int = 128, ff: int = 128, n_out: int = 2,
               seed: int = 0) -> SequenceModel:
    """Recurrent overlap detector: BiLSTM x2 then a three-linear head."""
    _warn_unusual_dim(input_dim)
    rng = np.random.default_rng(seed)
    net = Sequential([
        ("bilstm0", BiLSTM(input_dim, hidden, rng)),
        ("bilstm1", BiLSTM(2 * hidden, hidden, rng)),
        ("ff0", Linear(2 * hidden, ff, rng)),
        ("act0", Tanh()),
        ("ff1", Linear(ff, ff, rng)),
        ("act1", Tanh()),
        ("out", Linear(ff, n_out, rng)),
    ])
    hyper = {"input_dim": input_dim, "hidden": hidden, "ff": ff, "n_out": n_out}
    return SequenceModel("rosd", hyper, net)


def build_tcn(input_dim: int, n_out: int, bottleneck: int = 64, hidden: int = 128,
              kernel: int = 3, n_blocks: int = 5, n_repeats: int = 3,
              seed: int = 0) -> SequenceModel:
    """Dilated-convolution detector with residual blocks (dilations 1..2^(n_blocks-1))."""
    if n_out < 1:
        raise ValueError("n_out must be >= 1")
    rng = np.random.default_rng(seed)
    stack: list = [("input", Linear(input_dim, bottleneck, rng))]
    for i in range(n_repeats * n_blocks):
        dilation = 2 ** (i % n_blocks)
        stack.append((f"block{i}", TcnBlock(bottleneck, hidden, kernel, dilation, rng)))
    stack.append(("head", Linear(bottleneck, n_out, rng)))
    hyper = {
        "input_dim": input_dim, "n_out": n_out, "bottleneck": bottleneck,
        "hidden": hidden, "kernel": kernel, "n_blocks": n_blocks,
        "n_repeats": n_repeats,
    }
    return SequenceModel("tcn", hyper, net=Sequential(stack))


def build_gd_backbone(input_dim: int, head: str = "two_way", hidden: int = 64,
                      seed: int = 0) -> SequenceModel:
    """Gender backbone: one unidirectional LSTM and a linear head."""
    if input_dim <= 0:
        raise ValueError("input_dim must be positive")
    if head not in ("two_way", "scalar"):
        raise ValueError(f"head must be 'two_way' or 'scalar', got {head!r}")
    rng = np.random.default_rng(seed)
    n_out = 2 if head == "two_way" else 1
    net = Sequential([
        ("lstm", LSTM(input_dim, hidden, rng)),
        ("head", Linear(hidden, n_out, rng)),
    ])
    hyper = {"input_dim": input_dim, "hidden": hidden, "head": head, "n_out": n_out}
    return SequenceModel("gd_backbone", hyper, net)


def build_linear(input_dim: int, n_out: int, seed: int = 0) -> SequenceModel:
    """Framewise logistic/linear baseline (convex under cross-entropy)."""
    rng = np.random.default_rng(seed)
    net = Sequential([("out", Linear(input_dim, n_out, rng))])
    return SequenceModel("linear", {"input_dim": input_dim, "n_out": n_out}, net)


_BUILDERS = {
    "rosd": build_rosd,
    "tcn": build_tcn,
    "gd_backbone": build_gd_backbone,
    "linear": build_linear,
}


def build_model(arch: str, hyper: dict, seed: int = 0) -> SequenceModel:
    if arch not in _BUILDERS:
        raise ValueError(f"unknown arch {arch!r}")
    kwargs = {k: v for k, v in hyper.items() if k != "n_out" or arch != "gd_backbone"}
    return _BUILDERS[arch](seed=seed, **kwargs)


def receptive_field(model: SequenceModel) -> int:
    """Frames a single output can depend on (TCN only; recurrent nets are unbounded)."""
    if model.arch != "tcn":
        raise ValueError("receptive_field is defined for the tcn arch")
    span = model.hyper["kernel"] - 1
    total = sum(
        span * 2 ** (i % model.hyper["n_blocks"])
        for i in range(model.hyper["n_repeats"] * model.hyper["n_blocks"])
    )
    return 1 + total


def forward(model: SequenceModel, features: FeatureMatrix | np.ndarray) -> np.ndarray:
    """Per-frame outputs for one sequence; pure in the model parameters."""
    x = features.data if isinstance(features, FeatureMatrix) else np.asarray(features)
    if x.ndim != 2:
        raise DimMismatch(f"expected (frames, dim), got shape {x.shape}")
    if x.shape[0] < 1:
        raise EmptySequence("zero-length input sequence")
    y, _ = model.forward_batch(x[None].astype(model.dtype, copy=False))
    return y[0]

"""Layers with explicit reverse-mode passes.

All activations flow as (batch, time, channels) arrays.  ``forward``
returns ``(y, cache)`` and touches no layer state, so concurrent inference
is safe; ``backward`` consumes the cache and accumulates into the
parameters' ``grad`` buffers (single writer during training).
"""

from __future__ import annotations

import numpy as np

from . import kernels


class Param:
    __slots__ = ("value", "grad")

    def __init__(self, value: np.ndarray):
        self.value = np.asarray(value)
        self.grad = np.zeros_like(self.value)

    @property
    def size(self) -> int:
        return self.value.size


def glorot(rng: np.random.Generator, shape, dtype=np.float32) -> np.ndarray:
    fan_in, fan_out = shape[0], shape[-1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    def named_params(self):
        for name in self._param_names:
            yield name, getattr(self, name)

    def forward(self, x):
        raise NotImplementedError

    def backward(self, dy, cache):
        raise NotImplementedError


class Linear(Layer):
    """Framewise affine map; doubles as a 1x1 convolution."""

    _param_names = ("weight", "bias")

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator):
        self.weight = Param(glorot(rng, (d_in, d_out)))
        self.bias = Param(np.zeros(d_out, dtype=np.float32))

    def forward(self, x):
        return x @ self.weight.value + self.bias.value, x

    def backward(self, dy, cache):
        x = cache
        self.weight.grad += np.tensordot(x, dy, axes=([0, 1], [0, 1]))
        self.bias.grad += dy.sum(axis=(0, 1))
        return dy @ self.weight.value.T


class Tanh(Layer):
    _param_names = ()

    def forward(self, x):
        y = np.tanh(x)
        return y, y

    def backward(self, dy, cache):
        return dy * (1.0 - cache * cache)


class PReLU(Layer):
    """Single-parameter parametric ReLU (shared across channels)."""

    _param_names = ("alpha",)

    def __init__(self, init: float = 0.25):
        self.alpha = Param(np.array([init], dtype=np.float32))

    def forward(self, x):
        a = self.alpha.value[0]
        return np.where(x > 0, x, a * x), x

    def backward(self, dy, cache):
        x = cache
        neg = np.minimum(x, 0)
        self.alpha.grad += np.array([np.sum(dy * neg)], dtype=self.alpha.grad.dtype)
        return dy * np.where(x > 0, 1.0, self.alpha.value[0]).astype(dy.dtype)


class ChannelNorm(Layer):
    """Per-frame normalization over the channel axis with affine rescale."""

    _param_names = ("gamma", "beta")

    def __init__(self, channels: int, eps: float = 1e-5):
        self.gamma = Param(np.ones(channels, dtype=np.float32))
        self.beta = Param(np.zeros(channels, dtype=np.float32))
        self.eps = eps

    def forward(self, x):
        mu = x.mean(axis=2, keepdims=True)
        var = x.var(axis=2, keepdims=True)
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mu) * inv
        return xhat * self.gamma.value + self.beta.value, (xhat, inv)

    def backward(self, dy, cache):
        xhat, inv = cache
        self.gamma.grad += np.sum(dy * xhat, axis=(0, 1))
        self.beta.grad += dy.sum(axis=(0, 1))
        dxhat = dy * self.gamma.value
        m1 = dxhat.mean(axis=2, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=2, keepdims=True)
        return inv * (dxhat - m1 - xhat * m2)


class DepthwiseConv(Layer):
    """Per-channel dilated convolution, zero padded to preserve length."""

    _param_names = ("weight", "bias")

    def __init__(self, channels: int, kernel: int, dilation: int, rng: np.random.Generator):
        limit = np.sqrt(6.0 / (2 * kernel))
        self.weight = Param(rng.uniform(-limit, limit, size=(channels, kernel)).astype(np.float32))
        self.bias = Param(np.zeros(channels, dtype=np.float32))
        self.kernel = kernel
        self.dilation = dilation

    def _pad(self):
        return self.dilation * (self.kernel - 1) // 2

    def forward(self, x):
        B, T, C = x.shape
        pad = self._pad()
        xpad = np.zeros((B, T + 2 * pad, C), dtype=x.dtype)
        xpad[:, pad:pad + T] = x
        y = np.zeros_like(x)
        for j in range(self.kernel):
            y += self.weight.value[:, j] * xpad[:, j * self.dilation: j * self.dilation + T]
        y += self.bias.value
        return y, xpad

    def backward(self, dy, cache):
        xpad = cache
        B, T, C = dy.shape
        pad = self._pad()
        dxpad = np.zeros_like(xpad)
        for j in range(self.kernel):
            sl = slice(j * self.dilation, j * self.dilation + T)
            self.weight.grad[:, j] += np.sum(dy * xpad[:, sl], axis=(0, 1))
            dxpad[:, sl] += dy * self.weight.value[:, j]
        self.bias.grad += dy.sum(axis=(0, 1))
        return dxpad[:, pad:pad + T]


class LSTM(Layer):
    """Single-direction LSTM with separate input and recurrent biases."""

    _param_names = ("w_ih", "w_hh", "b_ih", "b_hh")

    def __init__(self, d_in: int, hidden: int, rng: np.random.Generator, reverse: bool = False):
        self.w_ih = Param(glorot(rng, (d_in, 4 * hidden)))
        self.w_hh = Param(glorot(rng, (hidden, 4 * hidden)))
        b = np.zeros(4 * hidden, dtype=np.float32)
        b[hidden:2 * hidden] = 1.0  # forget-gate bias
        self.b_ih = Param(b)
        self.b_hh = Param(np.zeros(4 * hidden, dtype=np.float32))
        self.hidden = hidden
        self.reverse = reverse

    def forward(self, x):
        xp = x @ self.w_ih.value + (self.b_ih.value + self.b_hh.value)
        if self.reverse:
            xp = xp[:, ::-1]
        h, c, gates = kernels.lstm_seq_forward(xp, self.w_hh.value)
        y = h[:, ::-1] if self.reverse else h
        return np.ascontiguousarray(y), (x, gates, c, h)

    def backward(self, dy, cache):
        x, gates, c, h = cache
        if self.reverse:
            dy = dy[:, ::-1]
        dxp, dw_hh = kernels.lstm_seq_backward(dy, gates, c, h, self.w_hh.value)
        self.w_hh.grad += dw_hh
        if self.reverse:
            dxp = np.ascontiguousarray(dxp[:, ::-1])
        self.w_ih.grad += np.tensordot(x, dxp, axes=([0, 1], [0, 1]))
        db = dxp.sum(axis=(0, 1))
        self.b_ih.grad += db
        self.b_hh.grad += db
        return dxp @ self.w_ih.value.T


class BiLSTM(Layer):
    """Forward and backward LSTMs with concatenated outputs."""

    _param_names = ()

    def __init__(self, d_in: int, hidden: int, rng: np.random.Generator):
        self.fwd = LSTM(d_in, hidden, rng, reverse=False)
        self.bwd = LSTM(d_in, hidden, rng, reverse=True)
        self.hidden = hidden

    def named_params(self):
        for name, p in self.fwd.named_params():
            yield f"fwd.{name}", p
        for name, p in self.bwd.named_params():
            yield f"bwd.{name}", p

    def forward(self, x):
        yf, cf = self.fwd.forward(x)
        yb, cb = self.bwd.forward(x)
        return np.concatenate([yf, yb], axis=2), (cf, cb)

    def backward(self, dy, cache):
        cf, cb = cache
        H = self.hidden
        dx = self.fwd.backward(np.ascontiguousarray(dy[:, :, :H]), cf)
        dx += self.bwd.backward(np.ascontiguousarray(dy[:, :, H:]), cb)
        return dx


class TcnBlock(Layer):
    """Residual block: 1x1 up, PReLU, norm, dilated depthwise, PReLU, norm, 1x1 down."""

    _param_names = ()

    def __init__(self, channels: int, hidden: int, kernel: int, dilation: int,
                 rng: np.random.Generator):
        self.conv_in = Linear(channels, hidden, rng)
        self.prelu_in = PReLU()
        self.norm_in = ChannelNorm(hidden)
        self.dconv = DepthwiseConv(hidden, kernel, dilation, rng)
        self.prelu_out = PReLU()
        self.norm_out = ChannelNorm(hidden)
        self.conv_out = Linear(hidden, channels, rng)
        self.dilation = dilation
        self._parts = ("conv_in", "prelu_in", "norm_in", "dconv",
                       "prelu_out", "norm_out", "conv_out")

    def named_params(self):
        for part in self._parts:
            for name, p in getattr(self, part).named_params():
                yield f"{part}.{name}", p

    def forward(self, x):
        caches = []
        y = x
        for part in self._parts:
            y, cache = getattr(self, part).forward(y)
            caches.append(cache)
        return x + y, caches

    def backward(self, dy, cache):
        dbranch = dy
        for part, part_cache in zip(reversed(self._parts), reversed(cache)):
            dbranch = getattr(self, part).backward(dbranch, part_cache)
        return dy + dbranch


class Sequential(Layer):
    _param_names = ()

    def __init__(self, named_layers):
        self.named_layers = list(named_layers)

    def named_params(self):
        for lname, layer in self.named_layers:
            for pname, p in layer.named_params():
                yield f"{lname}.{pname}", p

    def forward(self, x):
        caches = []
        for _, layer in self.named_layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x, caches

    def backward(self, dy, cache):
        for (_, layer), layer_cache in zip(reversed(self.named_layers), reversed(cache)):
            dy = layer.backward(dy, layer_cache)
        return dy

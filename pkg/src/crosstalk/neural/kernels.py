"""LSTM sequence recurrence: compiled kernel with numpy fallback.

The per-timestep recurrence is the one hot loop of training that cannot be
expressed as a single large matrix product, so it is implemented twice:
a Cython extension (``crosstalk._ckernels``) and a pure-numpy reference.
The backend is chosen once at import; ``CROSSTALK_NO_EXT=1`` forces the
fallback.  Both accept float32 and float64 and use the same update order,
so they agree to rounding error and either one may back the test suite.

Gate layout along the last axis is [input, forget, cell, output]; the
input projections ``xp`` must already include both bias terms.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from crosstalk import _ckernels
except ImportError:  # pragma: no cover - depends on whether the ext was built
    _ckernels = None

_USE_EXT = _ckernels is not None and os.environ.get("CROSSTALK_NO_EXT", "0") in ("", "0")


def backend_name() -> str:
    return "cython" if _USE_EXT else "numpy"


def _sigmoid(x):
    out = np.empty_like(x)
    np.negative(x, out=out)
    np.exp(out, out=out)
    out += 1.0
    np.reciprocal(out, out=out)
    return out


def lstm_seq_forward_np(xp: np.ndarray, w_hh: np.ndarray):
    """Reference recurrence.

    xp: (B, T, 4H) input projections including biases, w_hh: (H, 4H).
    Returns (h, c, gates) with h, c of shape (B, T, H) and gates the
    activated [i, f, g, o] values of shape (B, T, 4H).
    """
    B, T, H4 = xp.shape
    H = H4 // 4
    h = np.empty((B, T, H), dtype=xp.dtype)
    c = np.empty((B, T, H), dtype=xp.dtype)
    gates = np.empty((B, T, H4), dtype=xp.dtype)
    h_prev = np.zeros((B, H), dtype=xp.dtype)
    c_prev = np.zeros((B, H), dtype=xp.dtype)
    for t in range(T):
        a = xp[:, t] + h_prev @ w_hh
        i = _sigmoid(a[:, :H])
        f = _sigmoid(a[:, H:2 * H])
        g = np.tanh(a[:, 2 * H:3 * H])
        o = _sigmoid(a[:, 3 * H:])
        c_t = f * c_prev + i * g
        h_t = o * np.tanh(c_t)
        gates[:, t, :H] = i
        gates[:, t, H:2 * H] = f
        gates[:, t, 2 * H:3 * H] = g
        gates[:, t, 3 * H:] = o
        c[:, t] = c_t
        h[:, t] = h_t
        h_prev, c_prev = h_t, c_t
    return h, c, gates


def lstm_seq_backward_np(dh_out: np.ndarray, gates: np.ndarray, c: np.ndarray,
                         h: np.ndarray, w_hh: np.ndarray):
    """Reverse-mode pass matching :func:`lstm_seq_forward_np`.

    dh_out: (B, T, H) gradient wrt the hidden outputs.
    Returns (dxp, dw_hh): gradients wrt the input projections and w_hh.
    """
    B, T, H = dh_out.shape
    dxp = np.empty((B, T, 4 * H), dtype=dh_out.dtype)
    dw_hh = np.zeros_like(w_hh)
    dh_next = np.zeros((B, H), dtype=dh_out.dtype)
    dc_next = np.zeros((B, H), dtype=dh_out.dtype)
    w_hh_T = w_hh.T.copy()
    for t in range(T - 1, -1, -1):
        i = gates[:, t, :H]
        f = gates[:, t, H:2 * H]
        g = gates[:, t, 2 * H:3 * H]
        o = gates[:, t, 3 * H:]
        tc = np.tanh(c[:, t])
        dh_t = dh_out[:, t] + dh_next
        do = dh_t * tc
        dc = dc_next + dh_t * o * (1.0 - tc * tc)
        c_prev = c[:, t - 1] if t > 0 else 0.0
        da = dxp[:, t]
        da[:, :H] = dc * g * i * (1.0 - i)
        da[:, H:2 * H] = dc * c_prev * f * (1.0 - f)
        da[:, 2 * H:3 * H] = dc * i * (1.0 - g * g)
        da[:, 3 * H:] = do * o * (1.0 - o)
        if t > 0:
            dw_hh += h[:, t - 1].T @ da
        dh_next = da @ w_hh_T
        dc_next = dc * f
    return dxp, dw_hh


def lstm_seq_forward(xp: np.ndarray, w_hh: np.ndarray):
    xp = np.ascontiguousarray(xp)
    w_hh = np.ascontiguousarray(w_hh, dtype=xp.dtype)
    if _USE_EXT:
        return _ckernels.lstm_seq_forward(xp, w_hh)
    return lstm_seq_forward_np(xp, w_hh)


def lstm_seq_backward(dh_out: np.ndarray, gates: np.ndarray, c: np.ndarray,
                      h: np.ndarray, w_hh: np.ndarray):
    dh_out = np.ascontiguousarray(dh_out)
    w_hh = np.ascontiguousarray(w_hh, dtype=dh_out.dtype)
    if _USE_EXT:
        return _ckernels.lstm_seq_backward(dh_out, gates, c, h, w_hh)
    return lstm_seq_backward_np(dh_out, gates, c, h, w_hh)

# cython: language_level=3
"""Compiled LSTM sequence recurrence.

Mirrors the numpy reference in ``crosstalk.neural.kernels`` exactly:
same gate layout [i, f, g, o], same update order, float32 or float64.
The per-step matrix products go through BLAS; everything else is a
flat elementwise pass per timestep.
"""

import numpy as np

from libc.math cimport exp, expf, tanh, tanhf
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport dgemm, sgemm

ctypedef fused real:
    float
    double


cdef inline real _sig(real x) noexcept nogil:
    if real is float:
        return <real>(1.0 / (1.0 + expf(-x)))
    else:
        return <real>(1.0 / (1.0 + exp(-x)))


cdef inline real _tanh(real x) noexcept nogil:
    if real is float:
        return tanhf(x)
    else:
        return tanh(x)


cdef void _gemm(char ta, char tb, int m, int n, int k, real* a, int lda,
                real* b, int ldb, real beta, real* c, int ldc) noexcept nogil:
    cdef real one = 1.0
    if real is float:
        sgemm(&ta, &tb, &m, &n, &k, &one, a, &lda, b, &ldb, &beta, c, &ldc)
    else:
        dgemm(&ta, &tb, &m, &n, &k, &one, a, &lda, b, &ldb, &beta, c, &ldc)


def lstm_seq_forward(real[:, :, ::1] xp, real[:, ::1] w_hh):
    cdef Py_ssize_t B = xp.shape[0], T = xp.shape[1], H4 = xp.shape[2]
    cdef Py_ssize_t H = H4 // 4
    dt = np.asarray(xp).dtype
    h_np = np.empty((B, T, H), dtype=dt)
    c_np = np.empty((B, T, H), dtype=dt)
    g_np = np.empty((B, T, H4), dtype=dt)
    cdef real[:, :, ::1] h = h_np
    cdef real[:, :, ::1] c = c_np
    cdef real[:, :, ::1] g = g_np
    cdef real[:, ::1] hprev = np.zeros((B, H), dtype=dt)
    cdef real[:, ::1] cprev = np.zeros((B, H), dtype=dt)
    cdef real[:, ::1] a = np.empty((B, H4), dtype=dt)
    cdef Py_ssize_t b, t, j
    cdef real iv, fv, gv, ov, cv

    with nogil:
        for t in range(T):
            for b in range(B):
                memcpy(&a[b, 0], &xp[b, t, 0], H4 * sizeof(real))
            # a += hprev @ w_hh, both row-major: run as a^T = w_hh^T @ hprev^T
            _gemm[real](b'N', b'N', <int>H4, <int>B, <int>H,
                  &w_hh[0, 0], <int>H4, &hprev[0, 0], <int>H,
                  <real>1.0, &a[0, 0], <int>H4)
            for b in range(B):
                for j in range(H):
                    iv = _sig(a[b, j])
                    fv = _sig(a[b, H + j])
                    gv = _tanh(a[b, 2 * H + j])
                    ov = _sig(a[b, 3 * H + j])
                    cv = fv * cprev[b, j] + iv * gv
                    g[b, t, j] = iv
                    g[b, t, H + j] = fv
                    g[b, t, 2 * H + j] = gv
                    g[b, t, 3 * H + j] = ov
                    c[b, t, j] = cv
                    cprev[b, j] = cv
                    hprev[b, j] = ov * _tanh(cv)
                    h[b, t, j] = hprev[b, j]
    return h_np, c_np, g_np


def lstm_seq_backward(real[:, :, ::1] dh_out, real[:, :, ::1] gates,
                      real[:, :, ::1] c, real[:, :, ::1] h, real[:, ::1] w_hh):
    cdef Py_ssize_t B = dh_out.shape[0], T = dh_out.shape[1], H = dh_out.shape[2]
    cdef Py_ssize_t H4 = 4 * H
    dt = np.asarray(dh_out).dtype
    dxp_np = np.empty((B, T, H4), dtype=dt)
    dw_np = np.zeros((H, H4), dtype=dt)
    cdef real[:, :, ::1] dxp = dxp_np
    cdef real[:, ::1] dw = dw_np
    cdef real[:, ::1] dh_next = np.zeros((B, H), dtype=dt)
    cdef real[:, ::1] dc_next = np.zeros((B, H), dtype=dt)
    cdef real[:, ::1] da = np.empty((B, H4), dtype=dt)
    cdef real[:, ::1] hbuf = np.empty((B, H), dtype=dt)
    cdef Py_ssize_t b, t, j
    cdef real iv, fv, gv, ov, tc, dh, dc, cp, dov

    with nogil:
        for t in range(T - 1, -1, -1):
            for b in range(B):
                for j in range(H):
                    iv = gates[b, t, j]
                    fv = gates[b, t, H + j]
                    gv = gates[b, t, 2 * H + j]
                    ov = gates[b, t, 3 * H + j]
                    tc = _tanh(c[b, t, j])
                    dh = dh_out[b, t, j] + dh_next[b, j]
                    dov = dh * tc
                    dc = dc_next[b, j] + dh * ov * (<real>1.0 - tc * tc)
                    cp = c[b, t - 1, j] if t > 0 else <real>0.0
                    da[b, j] = dc * gv * iv * (<real>1.0 - iv)
                    da[b, H + j] = dc * cp * fv * (<real>1.0 - fv)
                    da[b, 2 * H + j] = dc * iv * (<real>1.0 - gv * gv)
                    da[b, 3 * H + j] = dov * ov * (<real>1.0 - ov)
                    dc_next[b, j] = dc * fv
                memcpy(&dxp[b, t, 0], &da[b, 0], H4 * sizeof(real))
            if t > 0:
                for b in range(B):
                    memcpy(&hbuf[b, 0], &h[b, t - 1, 0], H * sizeof(real))
                # dw += h_{t-1}^T @ da: col-major dw^T = da^T @ (hbuf^T)^T
                _gemm[real](b'N', b'T', <int>H4, <int>H, <int>B,
                      &da[0, 0], <int>H4, &hbuf[0, 0], <int>H,
                      <real>1.0, &dw[0, 0], <int>H4)
            # dh_next = da @ w_hh^T: col-major dh_next^T = (w_hh^T)^T @ da^T
            _gemm[real](b'T', b'N', <int>H, <int>B, <int>H4,
                  &w_hh[0, 0], <int>H4, &da[0, 0], <int>H4,
                  <real>0.0, &dh_next[0, 0], <int>H)
    return dxp_np, dw_np

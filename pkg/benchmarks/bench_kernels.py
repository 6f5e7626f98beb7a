"""Timing comparison of the compiled and numpy LSTM sequence kernels.

Runs the forward and backward recurrences at OSD-shaped sizes through both
backends and prints a small table with the speedup.  Usage:

    python benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from crosstalk.neural import kernels


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(batch, frames, hidden, dtype, repeat):
    rng = np.random.default_rng(0)
    xp = rng.standard_normal((batch, frames, 4 * hidden)).astype(dtype)
    w_hh = (rng.standard_normal((hidden, 4 * hidden)) / np.sqrt(hidden)).astype(dtype)

    rows = []
    backends = [("numpy", kernels.lstm_seq_forward_np, kernels.lstm_seq_backward_np)]
    if kernels.backend_name() == "cython":
        backends.append(("cython", kernels._ckernels.lstm_seq_forward,
                         kernels._ckernels.lstm_seq_backward))

    for name, fwd, bwd in backends:
        h, c, gates = fwd(xp, w_hh)
        dh = np.ones_like(h)
        t_fwd = _time(lambda: fwd(xp, w_hh), repeat)
        t_bwd = _time(lambda: bwd(dh, gates, c, h, w_hh), repeat)
        rows.append((name, t_fwd, t_bwd))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5, help="timing repetitions")
    args = ap.parse_args()

    print(f"active backend: {kernels.backend_name()}")
    print(f"{'shape':<24} {'dtype':<8} {'backend':<8} {'fwd ms':>8} {'bwd ms':>8}")
    # training-shaped batches, then the small-batch inference shapes where
    # per-step dispatch overhead dominates the numpy path
    for batch, frames, hidden in ((32, 200, 128), (256, 100, 64),
                                  (1, 200, 128), (1, 2000, 128), (4, 100, 64)):
        for dtype in (np.float32, np.float64):
            rows = bench(batch, frames, hidden, dtype, args.repeat)
            base = rows[0]
            for name, t_fwd, t_bwd in rows:
                note = ""
                if name != "numpy":
                    note = f"  ({base[1] / t_fwd:.1f}x / {base[2] / t_bwd:.1f}x vs numpy)"
                print(f"B={batch} T={frames} H={hidden:<6} {np.dtype(dtype).name:<8} "
                      f"{name:<8} {1e3 * t_fwd:8.1f} {1e3 * t_bwd:8.1f}{note}")


if __name__ == "__main__":
    main()

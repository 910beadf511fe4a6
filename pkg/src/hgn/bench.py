"""Benchmark the span kernels: pure numpy versus the numba twins.

Usage: python -m hgn.bench [--tokens N] [--d D] [--repeats R]
Times one fused forward+backward pass per cell kind and window size on both
backends and prints the speedup table.  Numba timings exclude compilation
(one warm-up call per kernel).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from . import backend
from .gang import param_shapes


def _make_args(rng: np.random.Generator, cell: str, n_tokens: int, d: int):
    z = rng.normal(0.0, 0.5, size=(n_tokens, d))
    params = [rng.normal(0.0, 0.3, size=shape) for _, shape in param_shapes(cell, d)]
    d_out = rng.normal(0.0, 1.0, size=(n_tokens, d))
    return z, params, d_out


def _time_pass(table, cell, z, params, d_out, k, repeats) -> float:
    fwd, bwd = table[f"{cell}_window_fwd"], table[f"{cell}_window_bwd"]
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fwd(z, k, *params)
        bwd(d_out, z, k, *params, *out[1:])
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--tokens", type=int, default=32)
    parser.add_argument("--d", type=int, default=64)
    parser.add_argument("--windows", default="3,7,11")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args(argv)
    windows = [int(w) for w in args.windows.split(",")]

    rng = np.random.default_rng(0)
    numpy_table = backend.kernels("numpy")
    numba_table = backend.kernels("numba") if backend.numba_available() else None
    if numba_table is None:
        print("numba not importable; timing the numpy path only")

    print(f"tokens={args.tokens} d={args.d} (seconds per fused forward+backward)")
    header = f"{'cell':6s} {'w':>3s} {'numpy':>10s}"
    if numba_table:
        header += f" {'numba':>10s} {'speedup':>8s}"
    print(header)
    for cell in ("rnn", "gru", "lstm", "cnn", "mlp"):
        z, params, d_out = _make_args(rng, cell, args.tokens, args.d)
        for w in windows:
            k = (w - 1) // 2
            t_np = _time_pass(numpy_table, cell, z, params, d_out, k, args.repeats)
            line = f"{cell:6s} {w:3d} {t_np:10.5f}"
            if numba_table:
                _time_pass(numba_table, cell, z, params, d_out, k, 1)  # compile
                t_nb = _time_pass(numba_table, cell, z, params, d_out, k, args.repeats)
                line += f" {t_nb:10.5f} {t_np / t_nb:8.1f}x"
            print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

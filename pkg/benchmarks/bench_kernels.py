"""
Benchmark the belief-sweep kernel: numba vs the pure-numpy fallback.

Runs both backends on identical frames drawn from the 8x8 BPSK and 16x16
4-PAM setups, checks they agree, and reports per-frame timings.

    python benchmarks/bench_kernels.py [--frames N]
"""

import argparse
import time

import numpy as np

from lattice_tomo import kernels
from lattice_tomo.core import make_constellation, sample_channel, sigma2_from_snr
from lattice_tomo.tlsd import TlsdDecoder


def make_frame(rng, d, m, snr_db, frame_len=100):
    c = make_constellation(m)
    sigma2 = sigma2_from_snr(snr_db, c, d)
    H = sample_channel(rng, d, d)
    S = rng.integers(0, m, (frame_len, d))
    X = c.symbols[S] @ H.T + rng.standard_normal((frame_len, d)) * np.sqrt(sigma2)
    dec = TlsdDecoder(H, sigma2, c)
    return dec.initial_beliefs(X), np.exp(dec.log_tables(X)), dec.proj.pairs


def time_kernel(fn, frames, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for theta, tables, pairs in frames:
            fn(theta.copy(), tables, pairs[:, 0], pairs[:, 1], 10, 1e-6)
        best = min(best, time.perf_counter() - t0)
    return best / len(frames)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--frames", type=int, default=20)
    args = ap.parse_args()

    print("=" * 60)
    print("TLSD sweep kernel benchmark (time per 100-vector frame)")
    print("=" * 60)
    rng = np.random.default_rng(0)
    # warm up the JIT
    theta, tables, pairs = make_frame(rng, 4, 2, 10.0)
    kernels.run_sweeps_numba(theta.copy(), tables, pairs[:, 0], pairs[:, 1], 10, 1e-6)

    for label, d, m, snr in [("8x8 BPSK @ 10 dB", 8, 2, 10.0), ("16x16 4-PAM @ 14 dB", 16, 4, 14.0)]:
        frames = [make_frame(rng, d, m, snr) for _ in range(args.frames)]
        for theta, tables, pairs in frames[:3]:
            a, b = theta.copy(), theta.copy()
            kernels.run_sweeps_numpy(a, tables, pairs[:, 0], pairs[:, 1], 10, 1e-6)
            kernels.run_sweeps_numba(b, tables, pairs[:, 0], pairs[:, 1], 10, 1e-6)
            assert np.allclose(a, b, rtol=0, atol=1e-12)
        t_np = time_kernel(kernels.run_sweeps_numpy, frames)
        t_nb = time_kernel(kernels.run_sweeps_numba, frames)
        print(f"{label:22s} numpy {t_np * 1e3:8.3f} ms   numba {t_nb * 1e3:8.3f} ms   speedup {t_np / t_nb:6.1f}x")


if __name__ == "__main__":
    main()

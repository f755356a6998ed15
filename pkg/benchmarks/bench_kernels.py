#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Runs the three hot paths (orbit iteration, Green escape rates, multi-start
Newton) on identical inputs through both backends, reports wall times and
the worst numeric disagreement.  The backends execute the same per-point
arithmetic, so disagreement beyond ULP accumulation indicates a bug.

    python3 benchmarks/bench_kernels.py [--points 200000] [--seeds 20000]
"""

import argparse
import time

import numpy as np

from henonmix import _kernels_numpy as knp

try:
    from henonmix import _kernels_numba as knb
except ImportError:
    knb = None

from henonmix.green import escape_radius
from henonmix.henon import HORSESHOE


def timed(fn, *args, repeat=3):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return out, best


def rel_dev(a, b):
    a = np.asarray(a, dtype=np.complex128).ravel()
    b = np.asarray(b, dtype=np.complex128).ravel()
    finite = np.isfinite(a) & np.isfinite(b)
    assert np.array_equal(np.isfinite(a), np.isfinite(b))
    if not finite.any():
        return 0.0
    scale = np.maximum(np.abs(a[finite]), 1.0)
    return float(np.max(np.abs(a[finite] - b[finite]) / scale))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--seeds", type=int, default=20_000)
    ap.add_argument("--period", type=int, default=8)
    args = ap.parse_args()

    if knb is None:
        raise SystemExit("numba backend unavailable; nothing to compare")

    f = HORSESHOE
    packed = f.packed()
    R = escape_radius(f)
    rng = np.random.default_rng(0)
    raw = rng.uniform(-6, 6, (args.points, 4))
    z = raw[:, 0] + 1j * raw[:, 1]
    w = raw[:, 2] + 1j * raw[:, 3]
    z0 = rng.uniform(-4, 4, args.seeds) + 0j
    w0 = rng.uniform(-4, 4, args.seeds) + 0j

    # warm the JIT outside the timers
    knb.iterate_batch(*packed, z[:4], w[:4], 1, True)
    knb.green_batch(*packed, z[:4], w[:4], 5, True, R, 1e30, 2.0, 20.0, 8.1, 0.0)
    knb.newton_batch(*packed, z0[:4], w0[:4], 2, 1e-11, 20, 10, 4 * R)

    # bounded workload: saddle points of the horseshoe stay in the box, so
    # every point runs the full per-point loop (branch-heavy regime)
    from henonmix.sampler import sample_mu

    s = sample_mu(f, 10, budget=4000, rng_seed=1)
    reps = max(1, args.points // s.n_points)
    zk = np.tile(s.z, reps)
    wk = np.tile(s.w, reps)

    rows = []

    (za, wa), t_nb = timed(knb.iterate_batch, *packed, zk, wk, 10, True)
    (zb, wb), t_np = timed(knp.iterate_batch, *packed, zk, wk, 10, True)
    rows.append(
        ("iterate x10 (bounded)", t_nb, t_np, max(rel_dev(za, zb), rel_dev(wa, wb)))
    )

    g_args = (100, True, R, 1e30, 2.0, 20.0, 8.1, 0.0)
    (va, ea, na, sa), t_nb = timed(knb.green_batch, *packed, zk, wk, *g_args)
    (vb, eb, nb, sb), t_np = timed(knp.green_batch, *packed, zk, wk, *g_args)
    assert np.array_equal(na, nb) and np.array_equal(sa, sb)
    rows.append(("green (bounded)", t_nb, t_np, rel_dev(va, vb)))

    (va, ea, na, sa), t_nb = timed(knb.green_batch, *packed, z, w, *g_args)
    (vb, eb, nb, sb), t_np = timed(knp.green_batch, *packed, z, w, *g_args)
    assert np.array_equal(na, nb) and np.array_equal(sa, sb)
    rows.append(("green (escaping)", t_nb, t_np, rel_dev(va, vb)))

    # small batches (render rows, scalar API calls): per-call overhead
    # dominates the vectorized path and the compiled loops win
    zs, ws = zk[:128], wk[:128]

    def many_nb():
        for _ in range(50):
            knb.green_batch(*packed, zs, ws, *g_args)

    def many_np():
        for _ in range(50):
            knp.green_batch(*packed, zs, ws, *g_args)

    (va, ea, na, sa) = knb.green_batch(*packed, zs, ws, *g_args)
    (vb, eb, nb, sb) = knp.green_batch(*packed, zs, ws, *g_args)
    _, t_nb = timed(many_nb)
    _, t_np = timed(many_np)
    rows.append(("green (128 pts x50)", t_nb, t_np, rel_dev(va, vb)))

    n_args = (args.period, 1e-11, 200, 30, 4 * R)
    (za, wa, ra, st_a, _), t_nb = timed(
        knb.newton_batch, *packed, z0, w0, *n_args, repeat=1
    )
    (zb, wb, rb, st_b, _), t_np = timed(
        knp.newton_batch, *packed, z0, w0, *n_args, repeat=1
    )
    conv = (st_a == 0) & (st_b == 0)
    dev = rel_dev(za[conv], zb[conv]) if conv.any() else 0.0
    rows.append((f"newton p={args.period}", t_nb, t_np, dev))

    print(f"{'kernel':<22} {'numba':>10} {'numpy':>10} {'speedup':>8} {'max rel dev':>12}")
    worst = 0.0
    for name, t_nb, t_np, dev in rows:
        print(f"{name:<22} {t_nb:>9.3f}s {t_np:>9.3f}s {t_np / t_nb:>7.1f}x {dev:>12.2e}")
        worst = max(worst, dev)
    if worst > 1e-9:
        raise SystemExit(f"backend disagreement {worst:.2e} exceeds 1e-9")
    print("backends agree within tolerance")


if __name__ == "__main__":
    main()

"""Numba vs numpy timings for the two hot kernels.

Run with ``python benchmarks/bench_kernels.py``.  The numpy path is what
``SMERO_DISABLE_NUMBA=1`` selects; both are called explicitly here so one
process can compare them.
"""
import argparse
import time

import numpy as np

from smero.elliptic import WeierstrassData
from smero.kernels import HAVE_NUMBA, rk4_linear2, theta1_series


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--steps", type=int, default=4096)
    ap.add_argument("--batch", type=int, default=16)
    ap.add_argument("--points", type=int, default=200_000)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    n = args.steps
    h = 2 * np.pi / n
    theta = np.arange(2 * n + 1) * (h / 2)
    dz = 1j * np.exp(1j * theta)
    b = (2.0 / np.exp(2j * theta))[None, :] * dz[None, :] - rng.normal(size=(args.batch, 1)) * dz[None, :]

    data = WeierstrassData.rhombic()
    v = rng.uniform(-1, 1, args.points) + 1j * rng.uniform(-0.5, 0.5, args.points)
    c = data.theta_coeffs

    rows = []
    for name, call in [
        ("rk4_linear2", lambda use: rk4_linear2(dz, b, h, use_numba=use)),
        ("theta1_series", lambda use: theta1_series(v, c, use_numba=use)),
    ]:
        t_np = best_of(lambda: call(False), args.repeat)
        if HAVE_NUMBA:
            ref, got = call(False), call(True)  # also compiles
            err = max(float(np.max(np.abs(np.asarray(a) - np.asarray(g)))) for a, g in zip(ref, got))
            t_nb = best_of(lambda: call(True), args.repeat)
        else:
            err, t_nb = float("nan"), float("nan")
        rows.append((name, t_np, t_nb, err))

    print(f"{'kernel':<16}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}{'max diff':>12}")
    for name, t_np, t_nb, err in rows:
        print(f"{name:<16}{t_np:12.4f}{t_nb:12.4f}{t_np / t_nb:10.1f}{err:12.2e}")
    if not HAVE_NUMBA:
        print("numba disabled or missing; only the numpy path was timed")


if __name__ == "__main__":
    main()

"""Compare the numba and numpy backends of the two hot kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5]

The library picks its backend at import time (set EMHEAT_DISABLE_NUMBA=1 to
force numpy); this script calls both implementations directly so a single
run shows both columns.
"""

import argparse
import time

import numpy as np

from emheat import kernels
from emheat._accel import HAVE_NUMBA


def best_of(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bessel_case(n=200_000, seed=0):
    rng = np.random.default_rng(seed)
    nu = rng.uniform(0, 60, n)
    z = rng.uniform(0, 80, n)
    return nu, z


def march_case(n=2000, rows=2, steps=400):
    r = np.linspace(0.01, 12, n)
    dr = r[1] - r[0]
    lo = np.full(n, 1 / dr**2)
    up = np.full(n, 1 / dr**2)
    di = -2 / dr**2 - 0.09 / r**2
    u = np.vstack([np.exp(-r**2 / 4)] * rows)
    return lo, di, up, u, 2.5e-3, 0.5, steps


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    nu, z = bessel_case()
    march = march_case()
    rows = []

    t_np = best_of(lambda: kernels.ive_numpy(nu, z), args.repeat)
    t_nb = best_of(lambda: kernels.ive_numba(nu, z), args.repeat) if HAVE_NUMBA else float("nan")
    err = np.max(np.abs(kernels.ive_numpy(nu, z) - kernels.ive_numba(nu, z)))
    rows.append(("ive (2e5 points)", t_np, t_nb, err))

    t_np = best_of(lambda: kernels.theta_march_numpy(*march), args.repeat)
    t_nb = best_of(lambda: kernels.theta_march_numba(*march), args.repeat) if HAVE_NUMBA else float("nan")
    err = np.max(np.abs(kernels.theta_march_numpy(*march) - kernels.theta_march_numba(*march)))
    rows.append(("CN march (2000 x 400)", t_np, t_nb, err))

    print(f"numba available: {HAVE_NUMBA}")
    print(f"{'kernel':24s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, a, b, e in rows:
        print(f"{name:24s} {a:10.4f} {b:10.4f} {a / b:8.1f} {e:10.2e}")


if __name__ == "__main__":
    main()

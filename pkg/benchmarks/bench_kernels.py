"""Time the numba and pure-numpy kernel backends on the same inputs.

    python benchmarks/bench_kernels.py [--repeat N]

Both backends are imported directly, so FRACDELAY_NUMBA does not matter here.
Results are checked for agreement before timing.
"""

import argparse
import time

import numpy as np

from fracdelay import _kernels_numba as nb
from fracdelay import _kernels_numpy as npk
from fracdelay.special import EPS_ABS, EPS_REL, K_MAX


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases():
    rng = np.random.default_rng(0)
    z = rng.uniform(-5.0, 5.0, 20000)
    yield "ml_series  (20k points)", lambda k: k.ml_series(0.6, 1.0, 1.0, z, EPS_ABS, EPS_REL, K_MAX)

    shifts = np.array([0.0, 0.5, 1.0, 1.5])
    weights = np.array([1.0, 0.4, 0.16, 0.064])
    orders = np.arange(4)
    base = np.zeros(20000)
    off = np.linspace(1e-3, 2.0, 20000)
    yield "gated_sum  (20k x 4 terms)", lambda k: k.gated_sum(
        base, off, shifts, weights, orders, 0.6, -1.0, 0.6, EPS_ABS, EPS_REL, K_MAX)

    f = np.sin(np.linspace(0, 3, 2049))[None, :].repeat(21, axis=0)
    yield "l1_sums    (21 x 2049)", lambda k: k.l1_sums(f, 0.6)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'kernel':28s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s}  max|diff|")
    for name, call in cases():
        a, b = call(npk), call(nb)  # also warms up the jit
        a = a[0] if isinstance(a, tuple) else a
        b = b[0] if isinstance(b, tuple) else b
        diff = float(np.max(np.abs(a - b)))
        tn = best_of(lambda: call(npk), args.repeat)
        tb = best_of(lambda: call(nb), args.repeat)
        print(f"{name:28s} {tn:10.4f} {tb:10.4f} {tn / tb:8.1f}  {diff:.1e}")


if __name__ == "__main__":
    main()

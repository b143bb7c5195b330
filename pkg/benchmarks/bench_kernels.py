"""Compiled kernels vs numpy fallback: best-of-N wall time per call.

    python3 benchmarks/bench_kernels.py
"""
import timeit

import numpy as np

from extremal_sv import _kernels_py

try:
    from extremal_sv import _kernels
except ImportError:
    _kernels = None


def cases():
    rng = np.random.default_rng(0)
    eta = rng.laplace(size=10 ** 6 + 60)
    lags = np.arange(60, dtype=np.intp)
    weights = 0.7 ** np.arange(60.0)
    a = rng.random(200)
    b = rng.random(200)
    p = rng.random(10 ** 5) * 0.9
    return {
        "ma_filter (T=1e6, 60 taps)": lambda k: k.ma_filter(eta, lags, weights, 10 ** 6),
        "lp_candidates (n=200)": lambda k: k.lp_candidates(a, b, 1e-9, 1e-14, 1e-12),
        "custom_tail_quantile (1e5)": lambda k: k.custom_tail_quantile(p, np.log(0.01), -2.0, 0.5, 1e-13),
    }


def best(fn, repeat=5):
    n, _ = timeit.Timer(fn).autorange()
    return min(timeit.repeat(fn, number=n, repeat=repeat)) / n


def main():
    print(f"{'kernel':32s} {'python':>10s} {'cython':>10s} {'speedup':>8s}")
    for name, call in cases().items():
        tp = best(lambda: call(_kernels_py))
        if _kernels is None:
            print(f"{name:32s} {tp * 1e3:9.2f}ms {'n/a':>10s}")
            continue
        tc = best(lambda: call(_kernels))
        print(f"{name:32s} {tp * 1e3:9.2f}ms {tc * 1e3:9.2f}ms {tp / tc:7.1f}x")


if __name__ == "__main__":
    main()

"""Counter-based random streams keyed by (seed, *key).

Every replication or Monte Carlo chunk owns its own Philox stream, so
results do not depend on which worker happens to run it.
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def stream(seed, *key):
    """Independent generator for the stream identified by ``(seed, *key)``."""
    ss = np.random.SeedSequence([int(seed), *(int(k) for k in key)])
    return np.random.Generator(np.random.Philox(ss))


def resolve_workers(workers=None):
    env = os.environ.get("EXTREMAL_SV_THREADS")
    if env:
        return max(1, int(env))
    if workers is None:
        return 1
    return max(1, int(workers))


def parallel_map(fn, items, workers=None):
    """Ordered map over ``items``; threads only change wall time, never results."""
    items = list(items)
    n = resolve_workers(workers)
    if n == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def split_counts(total, parts):
    """Split ``total`` samples into ``parts`` nearly equal chunk sizes."""
    parts = max(1, int(parts))
    base, extra = divmod(int(total), parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]

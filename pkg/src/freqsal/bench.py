"""Cost of spectral token mixing versus naive quadratic self-attention.

The spectral mixer is the encoder's global-filter block (lift, rfft2,
dynamic filter, irfft2, projection). The reference is single-head
attention that materialises the full (HW) x (HW) similarity matrix.
"""

import csv
import math
import os
import time
import tracemalloc

import numpy as np

from . import nn
from .model import MixerBlock, spectral_mix
from .tensor import Tensor

BYTES = 8  # float64
DEFAULT_BUDGET_FRACTION = 0.25
FIELDS = ["size", "channels", "spectral_seconds", "spectral_peak_bytes", "quadratic_seconds",
          "quadratic_peak_bytes", "similarity_elements", "quadratic_status"]


def host_memory():
    try:
        return os.sysconf("SC_PHYS_PAGES") * os.sysconf("SC_PAGE_SIZE")
    except (ValueError, OSError, AttributeError):
        return 8 * 2**30


def similarity_elements(size):
    return (size * size) ** 2


def quadratic_mix(x, wq, wk, wv):
    """softmax(Q K^T / sqrt(C)) V over all HW tokens of a C x H x W map."""
    c, h, w = x.shape
    tokens = x.reshape(c, h * w).T
    q, k, v = tokens @ wq, tokens @ wk, tokens @ wv
    sim = q @ k.T / math.sqrt(c)
    sim -= sim.max(axis=1, keepdims=True)
    np.exp(sim, out=sim)
    sim /= sim.sum(axis=1, keepdims=True)
    return (sim @ v).T.reshape(c, h, w)


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _peak(fn):
    tracemalloc.start()
    try:
        tracemalloc.reset_peak()
        base = tracemalloc.get_traced_memory()[0]
        fn()
        return tracemalloc.get_traced_memory()[1] - base
    finally:
        tracemalloc.stop()


def bench_size(size, channels=16, repeats=5, budget=None, seed=0):
    rng = np.random.default_rng(seed)
    budget = budget or DEFAULT_BUDGET_FRACTION * host_memory()
    store = nn.ParamStore()
    block = MixerBlock.init(store, "bench", channels, size, 8, rng)
    x = Tensor(rng.standard_normal((channels, size, size)))
    row = {"size": size, "channels": channels, "similarity_elements": similarity_elements(size)}

    def spectral():
        return spectral_mix(x, block)

    row["spectral_seconds"] = _time(spectral, repeats)
    row["spectral_peak_bytes"] = _peak(spectral)

    wq, wk, wv = (rng.standard_normal((channels, channels)) / math.sqrt(channels) for _ in range(3))
    # similarity matrix plus the q/k/v token copies
    need = BYTES * (similarity_elements(size) + 4 * channels * size * size)
    if need > budget:
        row.update(quadratic_seconds=float("nan"), quadratic_peak_bytes=need, quadratic_status="oom-skipped")
        return row

    def quadratic():
        return quadratic_mix(x.data, wq, wk, wv)

    try:
        row["quadratic_seconds"] = _time(quadratic, max(1, repeats // 2))
        row["quadratic_peak_bytes"] = _peak(quadratic)
        row["quadratic_status"] = "ok"
    except MemoryError:
        row.update(quadratic_seconds=float("nan"), quadratic_peak_bytes=need, quadratic_status="oom-skipped")
    return row


def run(sizes, channels=16, repeats=5, budget=None, out=None):
    rows = [bench_size(s, channels, repeats, budget) for s in sizes]
    if out:
        with open(out, "w", newline="") as fh:
            w = csv.DictWriter(fh, FIELDS)
            w.writeheader()
            w.writerows(rows)
    return rows

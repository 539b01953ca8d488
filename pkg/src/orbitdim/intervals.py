"""Measure of finite unions of closed intervals."""

from __future__ import annotations

import math

import numpy as np


def merge(lo: np.ndarray, hi: np.ndarray, clip: tuple[float, float] | None = (0.0, 1.0)) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint sorted components of ``∪ [lo_i, hi_i]`` (optionally clipped)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if clip is not None:
        lo = np.maximum(lo, clip[0])
        hi = np.minimum(hi, clip[1])
    keep = hi >= lo
    lo, hi = lo[keep], hi[keep]
    if not len(lo):
        return lo, hi
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    reach = np.maximum.accumulate(hi)
    # A new component starts where the left end passes everything seen so far.
    starts = np.ones(len(lo), dtype=bool)
    starts[1:] = lo[1:] > reach[:-1]
    idx = np.flatnonzero(starts)
    ends = np.append(idx[1:] - 1, len(lo) - 1)
    return lo[idx], reach[ends]


def union_measure(lo: np.ndarray, hi: np.ndarray, clip: tuple[float, float] | None = (0.0, 1.0)) -> float:
    a, b = merge(lo, hi, clip)
    return math.fsum((b - a).tolist())

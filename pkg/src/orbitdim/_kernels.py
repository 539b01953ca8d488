"""Compiled inner loops for the streaming experiments."""

from __future__ import annotations

import numpy as np
from numba import njit

# Decision codes in ball tries; non-negative entries are node ids.
HIT = -1
MISS = -2
UNDECIDED = -3


@njit(cache=True)
def sample_chain(state, u, cdf, succ, sym, out):
    """Advance the word chain once per uniform, writing the appended symbols."""
    Q = cdf.shape[1]
    for i in range(u.shape[0]):
        x = u[i]
        c = 0
        while c < Q - 1 and x >= cdf[state, c]:
            c += 1
        out[i] = sym[state, c]
        state = succ[state, c]
    return state


@njit(cache=True)
def first_ball_hit(delta, symbols, start, stop):
    """First position ``p`` in ``[start, stop)`` whose itinerary walks ``delta``
    to HIT. Returns ``(p, code)``: code is HIT, UNDECIDED (the walk reached a
    floor-width leaf first) or MISS with ``p = stop`` when nothing was found."""
    for p in range(start, stop):
        node = 0
        d = 0
        while node >= 0:
            node = delta[node, symbols[p + d]]
            d += 1
        if node == HIT:
            return p, HIT
        if node == UNDECIDED:
            return p, UNDECIDED
    return stop, MISS


@njit(cache=True)
def ac_first_hits(delta, out_ptr, out_pat, pat_len, symbols, n_end, max_start, first):
    """Scan ``symbols[:n_end]`` with an Aho-Corasick DFA, recording the first
    start position (``<= max_start``) of every pattern in ``first`` (-1 = none).
    Returns the number of patterns still unseen."""
    remaining = 0
    for k in range(first.shape[0]):
        if first[k] < 0:
            remaining += 1
    state = 0
    for i in range(n_end):
        state = delta[state, symbols[i]]
        for k in range(out_ptr[state], out_ptr[state + 1]):
            pid = out_pat[k]
            if first[pid] < 0:
                s = i - pat_len[pid] + 1
                if s <= max_start:
                    first[pid] = s
                    remaining -= 1
        if remaining == 0:
            break
    return remaining


def warm_up() -> None:
    """Compile the kernels once (cached on disk afterwards)."""
    cdf = np.array([[0.5, 1.0]])
    succ = np.zeros((1, 2), dtype=np.int64)
    sym = np.array([[0, 1]], dtype=np.int64)
    sample_chain(0, np.zeros(2), cdf, succ, sym, np.zeros(2, dtype=np.uint8))
    delta = np.array([[HIT, MISS]], dtype=np.int64)
    first_ball_hit(delta, np.zeros(4, dtype=np.uint8), 0, 2)
    ac_first_hits(
        np.zeros((1, 2), dtype=np.int64),
        np.zeros(2, dtype=np.int64),
        np.zeros(0, dtype=np.int64),
        np.zeros(0, dtype=np.int64),
        np.zeros(4, dtype=np.uint8),
        4,
        4,
        np.zeros(0, dtype=np.int64),
    )

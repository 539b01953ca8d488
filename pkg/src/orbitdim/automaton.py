"""Multi-pattern first-occurrence search over symbol streams (Aho-Corasick)."""

from __future__ import annotations

from collections import deque
from typing import Sequence

import numpy as np

from . import _kernels


class PatternAutomaton:
    """Failure-link automaton over a fixed alphabet, compiled to a dense DFA.

    ``delta[state, symbol]`` already follows failure links, and
    ``out_ptr``/``out_pat`` list (CSR style) every pattern ending at a state,
    including those inherited through the failure chain.
    """

    def __init__(self, patterns: Sequence[Sequence[int]], alphabet: int):
        if alphabet < 1:
            raise ValueError("alphabet must be non-empty")
        self.patterns = [tuple(int(s) for s in p) for p in patterns]
        if any(len(p) == 0 for p in self.patterns):
            raise ValueError("empty pattern")
        self.alphabet = alphabet
        goto: list[dict[int, int]] = [{}]
        ends: list[list[int]] = [[]]
        for pid, pat in enumerate(self.patterns):
            node = 0
            for s in pat:
                if not 0 <= s < alphabet:
                    raise ValueError(f"symbol {s} outside alphabet of size {alphabet}")
                nxt = goto[node].get(s)
                if nxt is None:
                    nxt = len(goto)
                    goto[node][s] = nxt
                    goto.append({})
                    ends.append([])
                node = nxt
            ends[node].append(pid)

        n = len(goto)
        delta = np.zeros((n, alphabet), dtype=np.int64)
        fail = np.zeros(n, dtype=np.int64)
        outputs: list[list[int]] = [list(e) for e in ends]
        order = deque()
        for s in range(alphabet):
            child = goto[0].get(s)
            if child is not None:
                delta[0, s] = child
                order.append(child)
        while order:
            u = order.popleft()
            outputs[u] = outputs[u] + outputs[fail[u]]
            for s in range(alphabet):
                child = goto[u].get(s)
                if child is None:
                    delta[u, s] = delta[fail[u], s]
                else:
                    delta[u, s] = child
                    fail[child] = delta[fail[u], s]
                    order.append(child)
        self.delta = delta
        self.fail = fail
        self.out_ptr = np.zeros(n + 1, dtype=np.int64)
        self.out_ptr[1:] = np.cumsum([len(o) for o in outputs])
        self.out_pat = np.array([p for o in outputs for p in o], dtype=np.int64)
        self.pat_len = np.array([len(p) for p in self.patterns], dtype=np.int64)

    @property
    def states(self) -> int:
        return self.delta.shape[0]

    @property
    def max_length(self) -> int:
        return int(self.pat_len.max()) if len(self.pat_len) else 0

    def first_hits(self, symbols: np.ndarray, max_start: int) -> np.ndarray:
        """First start position ``<= max_start`` of each pattern in ``symbols``; -1 if none."""
        first = np.full(len(self.patterns), -1, dtype=np.int64)
        if not len(self.patterns) or max_start < 0:
            return first
        n_end = min(len(symbols), max_start + self.max_length)
        _kernels.ac_first_hits(
            self.delta, self.out_ptr, self.out_pat, self.pat_len,
            np.ascontiguousarray(symbols, dtype=np.uint8), n_end, max_start, first,
        )
        return first


def naive_first_hits(patterns: Sequence[Sequence[int]], symbols: np.ndarray, max_start: int) -> np.ndarray:
    """Independent reference: one ``bytes.find`` per pattern."""
    hay = np.asarray(symbols, dtype=np.uint8).tobytes()
    out = np.full(len(patterns), -1, dtype=np.int64)
    for i, p in enumerate(patterns):
        j = hay.find(bytes(p))
        if 0 <= j <= max_start:
            out[i] = j
    return out

"""Symbolic orbits: itineraries are the exact representation of ``x`` and ``T^p x``.

A stream yields the itinerary ``i_0 i_1 i_2 ...`` of a point ``x``; shifting by
``p`` gives the itinerary of ``T^p x``. Numeric positions are only ever
derived views (rational cylinders, or outward-rounded float enclosures for
bulk work).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _kernels
from .markov_map import Cylinder, MarkovMap, _compose, _image_interval, _IDENTITY
from .thermo import GibbsModel

# Absolute outward widening of float enclosures; covers accumulated rounding
# of up to ~400 composed affine steps on [0, 1].
FLOAT_ENCLOSURE_SLACK = 1e-13


class StreamExhausted(IndexError):
    pass


class _GibbsSource:
    """Seeded sampler of the stationary word chain of a Gibbs model."""

    _MIN_CHUNK = 1 << 12

    def __init__(self, model: GibbsModel, seed: int):
        self.model = model
        self.seed = int(seed)
        self.rng = np.random.Generator(np.random.PCG64(self.seed))
        start, self.cdf, self.succ, self.sym = model.sampler_tables()
        u0 = self.rng.random()
        self.state = int(np.searchsorted(start, u0, side="right"))
        self.state = min(self.state, len(start) - 1)
        init = np.array(model.graph.states[self.state], dtype=np.uint8)
        self.buf = np.zeros(max(self._MIN_CHUNK, 2 * len(init)), dtype=np.uint8)
        self.buf[: len(init)] = init
        self.n = len(init)

    def ensure(self, n: int) -> None:
        if n <= self.n:
            return
        if n > len(self.buf):
            cap = len(self.buf)
            while cap < n:
                cap *= 2
            grown = np.zeros(cap, dtype=np.uint8)
            grown[: self.n] = self.buf[: self.n]
            self.buf = grown
        need = n - self.n
        u = self.rng.random(need)
        self.state = _kernels.sample_chain(self.state, u, self.cdf, self.succ, self.sym, self.buf[self.n : n])
        self.n = n

    def get(self, start: int, stop: int) -> np.ndarray:
        self.ensure(stop)
        return self.buf[start:stop]

    def describe(self) -> str:
        return f"sampled(seed={self.seed})"


class _ExplicitSource:
    """Eventually periodic word ``preperiod + period^∞`` (finite if no period)."""

    def __init__(self, preperiod: Sequence[int], period: Sequence[int]):
        self.preperiod = np.array(list(preperiod), dtype=np.uint8)
        self.period = np.array(list(period), dtype=np.uint8)
        self.seed = None

    @property
    def length(self) -> float:
        return math.inf if len(self.period) else len(self.preperiod)

    def get(self, start: int, stop: int) -> np.ndarray:
        if stop > self.length:
            raise StreamExhausted(f"explicit stream has only {len(self.preperiod)} symbols")
        idx = np.arange(start, stop)
        out = np.empty(len(idx), dtype=np.uint8)
        pre = idx < len(self.preperiod)
        out[pre] = self.preperiod[idx[pre]]
        if len(self.period):
            out[~pre] = self.period[(idx[~pre] - len(self.preperiod)) % len(self.period)]
        return out

    def describe(self) -> str:
        pre = "".join(map(str, self.preperiod.tolist()))
        per = "".join(map(str, self.period.tolist()))
        return f"explicit({pre}|{per})"


class ItineraryStream:
    """Append-only itinerary of a point, viewed from a shift offset.

    Symbol ``j`` of the view is symbol ``j + offset`` of the source; once
    generated a symbol never changes.
    """

    def __init__(self, source, offset: int = 0):
        self._source = source
        self.offset = int(offset)

    @property
    def seed(self) -> int | None:
        return self._source.seed

    @property
    def explicit(self) -> bool:
        return isinstance(self._source, _ExplicitSource)

    @property
    def length(self) -> float:
        return getattr(self._source, "length", math.inf) - self.offset

    def symbols(self, start: int, stop: int) -> np.ndarray:
        return self._source.get(self.offset + start, self.offset + stop)

    def __getitem__(self, j: int) -> int:
        return int(self.symbols(j, j + 1)[0])

    def prefix(self, n: int) -> tuple[int, ...]:
        return tuple(int(s) for s in self.symbols(0, n))

    def shift(self, p: int) -> "ItineraryStream":
        if p < 0:
            raise ValueError("shift must be >= 0")
        return ItineraryStream(self._source, self.offset + p)

    def describe(self) -> str:
        return f"{self._source.describe()}+{self.offset}"

    def exact_point(self, m: MarkovMap) -> Fraction:
        """Exact rational point of an eventually periodic explicit stream."""
        if not self.explicit or not len(self._source.period):
            raise ValueError("exact points exist only for eventually periodic explicit streams")
        src = self._source
        pre = [int(s) for s in src.preperiod]
        per = [int(s) for s in src.period]
        # Skip whole preperiod / period cycles covered by the offset.
        off = self.offset
        if off >= len(pre):
            k = (off - len(pre)) % len(per)
            pre, per = [], per[k:] + per[:k]
        else:
            pre = pre[off:]
        f = _pullback(m, per)
        y = f[0] / (1 - f[1])  # fixed point of the periodic pullback
        g = _pullback(m, pre)
        return g[0] + g[1] * y


def _pullback(m: MarkovMap, word: Sequence[int]):
    f = _IDENTITY
    for s in word:
        f = _compose(f, m._inverse[s])
    return f


def sample_stream(model: GibbsModel, seed: int) -> ItineraryStream:
    """Reproducible itinerary of a ``mu``-typical point."""
    return ItineraryStream(_GibbsSource(model, seed))


def explicit_stream(m: MarkovMap | None, preperiod: Sequence[int] | str = (), period: Sequence[int] | str = ()) -> ItineraryStream:
    """Stream ``preperiod period period ...``; digit strings are accepted."""
    pre = [int(c) for c in preperiod]
    per = [int(c) for c in period]
    if m is not None:
        word = pre + per + per[:1]
        if word and not m.admissible(word):
            raise ValueError("explicit itinerary contains an inadmissible transition")
    return ItineraryStream(_ExplicitSource(pre, per))


def shift(stream: ItineraryStream, p: int) -> ItineraryStream:
    return stream.shift(p)


@dataclass(frozen=True)
class PointEnclosure:
    lo: Fraction
    hi: Fraction
    word: tuple[int, ...]

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def contains(self, x) -> bool:
        return self.lo <= x <= self.hi


def reconstruct(m: MarkovMap, stream: ItineraryStream, p: int, eps) -> PointEnclosure:
    """Cylinder of the shortest prefix of ``T^p x`` with length ``<= eps``."""
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    view = stream.shift(p)
    word: list[int] = []
    f = _IDENTITY
    j = 0
    while True:
        try:
            s = view[j]
        except StreamExhausted as exc:
            raise StreamExhausted(f"stream exhausted after {j} symbols before reaching width {eps}") from exc
        word.append(s)
        lo, hi = _image_interval(f, m.endpoints[s], m.endpoints[s + 1])
        if hi - lo <= eps:
            return PointEnclosure(lo, hi, tuple(word))
        f = _compose(f, m._inverse[s])
        j += 1


def cylinder_of_prefix(m: MarkovMap, stream: ItineraryStream, n: int) -> Cylinder:
    return m.cylinder(stream.prefix(n))


def enclosure_depth(m: MarkovMap, width: float) -> int:
    """Generation after which every cylinder is shorter than ``width``."""
    max_cell = max(float(m.cell_length(k)) for k in range(m.Q))
    if width >= max_cell:
        return 1
    return 1 + math.ceil(math.log(max_cell / width) / math.log(float(m.rho)))


def float_enclosures(m: MarkovMap, symbols: np.ndarray, count: int, depth: int) -> tuple[np.ndarray, np.ndarray]:
    """Outward-rounded float enclosures of ``T^i x`` for ``i < count``.

    ``symbols`` must hold at least ``count + depth - 1`` itinerary symbols.
    Each enclosure contains the generation-``depth`` cylinder of position
    ``i``; the widening by :data:`FLOAT_ENCLOSURE_SLACK` absorbs rounding.
    """
    off, mul = m.inverse_coefficients()
    cell_lo, cell_hi = m.cell_bounds_float()
    last = symbols[depth - 1 : depth - 1 + count]
    lo = cell_lo[last].copy()
    hi = cell_hi[last].copy()
    for j in range(depth - 2, -1, -1):
        s = symbols[j : j + count]
        a, b = off[s], mul[s]
        u = a + b * lo
        v = a + b * hi
        lo = np.minimum(u, v)
        hi = np.maximum(u, v)
    return lo - FLOAT_ENCLOSURE_SLACK, hi + FLOAT_ENCLOSURE_SLACK

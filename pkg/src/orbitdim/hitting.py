"""Hitting times of balls and cylinders along symbolic orbits."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .automaton import PatternAutomaton
from .markov_map import Covering, MarkovMap, _compose, _image_interval, _IDENTITY, as_fraction
from .symbolic_orbit import ItineraryStream, reconstruct, sample_stream
from .thermo import GibbsModel

BALL_FLOOR = Fraction(1, 10**6)  # undecided leaves stop at width r * BALL_FLOOR
_FIRST_CHUNK = 1 << 12
_MAX_CHUNK = 1 << 20


class PrecisionError(ArithmeticError):
    """A ball decision needs a point position finer than the refinement floor."""


class BallTrie:
    """Decision tree over itinerary prefixes for membership in a closed ball.

    Each node is a cylinder straddling the ball boundary. Reading the next
    symbol either moves to a child node or ends in HIT (closed cylinder inside
    the ball), MISS (disjoint) or UNDECIDED (straddling child narrower than the
    floor width).
    """

    def __init__(self, m: MarkovMap, y, r, floor: Fraction = BALL_FLOOR):
        y, r = Fraction(y), Fraction(r)
        if r <= 0:
            raise ValueError("radius must be positive")
        if not 0 <= y <= 1:
            raise ValueError("ball centre must lie in [0, 1]")
        self.y, self.r = y, r
        b0, b1 = y - r, y + r
        min_width = r * floor
        rows: list[list[int]] = []
        # Queue of (node id, pullback, admissible next symbols).
        queue = [(0, _IDENTITY, range(m.Q))]
        rows.append([_kernels.MISS] * m.Q)
        depth = 0
        level = queue
        while level:
            depth += 1
            nxt = []
            for node, f, succ in level:
                for j in succ:
                    lo, hi = _image_interval(f, m.endpoints[j], m.endpoints[j + 1])
                    if lo >= b0 and hi <= b1:
                        code = _kernels.HIT
                    elif hi < b0 or lo > b1:
                        code = _kernels.MISS
                    elif hi - lo <= min_width:
                        code = _kernels.UNDECIDED
                    else:
                        code = len(rows)
                        rows.append([_kernels.MISS] * m.Q)
                        nxt.append((code, _compose(f, m._inverse[j]), m.successors(j)))
                    rows[node][j] = code
            level = nxt
        self.delta = np.array(rows, dtype=np.int64)
        self.depth = depth

    def decide(self, word: Sequence[int]) -> int:
        node = 0
        for s in word:
            node = int(self.delta[node, s])
            if node < 0:
                return node
        raise ValueError("word too short to decide")


def tau_ball(m: MarkovMap, stream: ItineraryStream, y, r, N_max: int, start: int = 1, trie: BallTrie | None = None) -> int | None:
    """First ``n`` in ``[start, N_max]`` with ``T^n x`` in the closed ball ``B(y, r)``.

    Returns None when no entrance happens within the horizon. Membership is
    decided exactly from cylinder containment; the rare straddling case below
    the floor width is settled with the exact point for eventually periodic
    explicit streams and raises :class:`PrecisionError` otherwise.
    """
    y, r = as_fraction(y) if not isinstance(y, Fraction) else y, Fraction(r)
    trie = trie or BallTrie(m, y, r)
    start = max(1, int(start))
    if start > N_max:
        return None
    chunk = _FIRST_CHUNK
    p = start
    while p <= N_max:
        stop = min(N_max + 1, p + chunk)
        sym = stream.symbols(0, stop + trie.depth + 1)
        pos, code = _kernels.first_ball_hit(trie.delta, sym, p, stop)
        if code == _kernels.HIT:
            return int(pos)
        if code == _kernels.UNDECIDED:
            if _exact_member(m, stream, int(pos), y, r):
                return int(pos)
            p = int(pos) + 1
            continue
        p = stop
        chunk = min(2 * chunk, _MAX_CHUNK)
    return None


def _exact_member(m: MarkovMap, stream: ItineraryStream, p: int, y: Fraction, r: Fraction) -> bool:
    try:
        x = stream.shift(p).exact_point(m)
    except ValueError as exc:
        raise PrecisionError(
            f"position {p} straddles the ball boundary below width {float(r * BALL_FLOOR):.3g}"
        ) from exc
    return abs(x - y) <= r


@dataclass(frozen=True)
class ExponentEstimate:
    """Window minimum of ``log2 tau_{2^-n} / n`` over ``n`` in ``[n0, n1]``."""

    points: tuple[tuple[int, int | None], ...]
    horizon: int
    estimate: float
    censored: bool

    @property
    def window(self) -> tuple[int, int]:
        return self.points[0][0], self.points[-1][0]

    def values(self) -> list[float]:
        return [_log_ratio(t, n, self.horizon) for n, t in self.points]


def _log_ratio(tau: int | None, n: int, horizon: int) -> float:
    # An unhit scale contributes its lower bound log2(horizon + 1) / n.
    return math.log2(horizon + 1 if tau is None else tau) / n


def hitting_exponent(m: MarkovMap, stream: ItineraryStream, y, n_range: tuple[int, int], N_max: int) -> ExponentEstimate:
    n0, n1 = n_range
    if n0 < 4 or n1 < n0:
        raise ValueError("n_range must satisfy 4 <= n0 <= n1")
    points: list[tuple[int, int | None]] = []
    tau: int | None = 1
    for n in range(n0, n1 + 1):
        # Balls shrink with n, so hitting times can only grow.
        if tau is not None:
            tau = tau_ball(m, stream, y, Fraction(1, 2**n), N_max, start=tau)
        points.append((n, tau))
    vals = [_log_ratio(t, n, N_max) for n, t in points]
    k = int(np.argmin(vals))
    return ExponentEstimate(tuple(points), N_max, float(vals[k]), points[k][1] is None)


def typical_point(m: MarkovMap, stream: ItineraryStream, width) -> Fraction:
    """A rational point within ``width`` of the stream's point.

    Taken at 5/11 of a small enclosing cylinder, so that it avoids the
    dyadic and triadic cylinder endpoints of the shipped maps.
    """
    enc = reconstruct(m, stream, 0, width)
    return enc.lo + enc.width * Fraction(5, 11)


def classify_point(estimate: float, delta: float, tol: float = 0.0) -> str:
    """Membership of ``y`` in the limsup set from its hitting exponent."""
    inv = 1.0 / delta
    if estimate < inv - tol:
        return "in L"
    if estimate > inv + tol:
        return "not in L"
    return "boundary: undetermined"


@dataclass(frozen=True)
class RecurrenceSummary:
    seeds: tuple[int, ...]
    estimates: tuple[ExponentEstimate, ...]
    target: float

    @property
    def values(self) -> list[float]:
        return [e.estimate for e in self.estimates]

    @property
    def median(self) -> float:
        return statistics.median(self.values)

    @property
    def censored(self) -> int:
        return sum(e.censored for e in self.estimates)


def recurrence_exponent(model: GibbsModel, seeds: Iterable[int], n_range: tuple[int, int], N_max: int, target: float | None = None) -> RecurrenceSummary:
    """Self-hitting exponents ``R(x, x)`` of sampled points."""
    m = model.map
    seeds = tuple(int(s) for s in seeds)
    ests = []
    for seed in seeds:
        stream = sample_stream(model, seed)
        y = typical_point(m, stream, Fraction(1, 2 ** n_range[1]) * BALL_FLOOR)
        ests.append(hitting_exponent(m, stream, y, n_range, N_max))
    return RecurrenceSummary(seeds, tuple(ests), float("nan") if target is None else float(target))


@dataclass(frozen=True)
class HitProfile:
    """First entrance times of a stream into the members of a covering."""

    n: int
    words: tuple[tuple[int, ...], ...]
    lo: tuple[Fraction, ...]
    hi: tuple[Fraction, ...]
    tau: np.ndarray  # -1 marks "not hit within horizon"
    horizon: int
    seed: int | None

    def __len__(self) -> int:
        return len(self.words)

    @property
    def hit(self) -> np.ndarray:
        return self.tau >= 0

    def lengths(self) -> np.ndarray:
        return np.array([float(b - a) for a, b in zip(self.lo, self.hi)])

    def rows(self) -> list[tuple[str, str, str, str, int, str]]:
        seed = "" if self.seed is None else str(self.seed)
        return [
            ("".join(map(str, w)), str(a), str(b), "" if t < 0 else str(int(t)), self.horizon, seed)
            for w, a, b, t in zip(self.words, self.lo, self.hi, self.tau)
        ]

    HEADER = ("word", "lo", "hi", "tau", "horizon", "seed")


def tau_cylinder_profiles(m: MarkovMap, stream: ItineraryStream, coverings: Sequence[Covering], N_max: int) -> list[HitProfile]:
    """Profiles of several coverings from a single automaton pass."""
    words: dict[tuple[int, ...], int] = {}
    for cov in coverings:
        for w in cov.words:
            words.setdefault(w, len(words))
    ac = PatternAutomaton(list(words), m.Q)
    sym = stream.symbols(0, N_max + ac.max_length) if words else np.zeros(0, dtype=np.uint8)
    first = ac.first_hits(sym, N_max)
    out = []
    for cov in coverings:
        ids = np.array([words[w] for w in cov.words], dtype=np.int64)
        out.append(HitProfile(
            cov.n, tuple(cov.words), tuple(c.lo for c in cov), tuple(c.hi for c in cov),
            first[ids] if len(ids) else np.zeros(0, dtype=np.int64), N_max, stream.seed,
        ))
    return out


def tau_cylinder_profile(m: MarkovMap, stream: ItineraryStream, covering: Covering, N_max: int) -> HitProfile:
    return tau_cylinder_profiles(m, stream, [covering], N_max)[0]


@dataclass(frozen=True)
class CorrelationReport:
    n: tuple[int, ...]
    gaps: tuple[float, ...]
    mu_a: float
    mu_b: float
    beta: float
    theta: float

    def bound(self, n: int) -> float:
        return self.theta * self.beta**n * (self.mu_a + 2) * self.mu_b


def correlation_decay(model: GibbsModel, A: Sequence[int], B: Sequence[int], n_list: Iterable[int]) -> CorrelationReport:
    """Exact gaps ``|mu(A ∩ T^-n B) - mu(A) mu(B)|`` with a fitted exponential envelope.

    ``beta`` is fitted on the gaps that stand clear of rounding noise
    (n >= |A|); ``theta`` is the smallest constant making the envelope hold at
    every listed ``n``.
    """
    A, B = tuple(A), tuple(B)
    if not (model.map.admissible(A) and model.map.admissible(B)):
        raise ValueError("correlation words must be admissible")
    n_list = tuple(int(n) for n in n_list)
    mu_a, mu_b = model.cylinder_measure(A), model.cylinder_measure(B)
    gaps = tuple(abs(model.joint_measure([(0, A), (n, B)]) - mu_a * mu_b) for n in n_list)
    noise = 1e-13 * mu_a * mu_b
    fit = [(n, g) for n, g in zip(n_list, gaps) if n >= len(A) and g > noise]
    if len(fit) >= 2:
        ns = np.array([n for n, _ in fit], dtype=float)
        lg = np.log([g for _, g in fit])
        beta = float(math.exp(np.polyfit(ns, lg, 1)[0]))
        beta = min(beta, 1.0 - 1e-12)
    else:
        beta = 0.0
    denom = [(beta**n if beta > 0 else float(n == 0)) * (mu_a + 2) * mu_b for n in n_list]
    theta = max([g / d for g, d in zip(gaps, denom) if d > 0 and g > noise], default=0.0)
    return CorrelationReport(n_list, gaps, mu_a, mu_b, beta, theta)


@dataclass(frozen=True)
class MultiRelation:
    ratio: float
    lower: float
    upper: float
    M: float
    beta: float

    @property
    def holds(self) -> bool:
        return self.lower <= self.ratio <= self.upper


def multi_relation_check(model: GibbsModel, words: Sequence[Sequence[int]], gap: int) -> MultiRelation:
    """Ratio ``mu(C_0 ∩ T^-g C_1 ∩ T^-2g C_2 ...) / prod mu(C_j)`` and its envelope.

    ``gap`` plays the role of twice the spacing exponent; the envelope uses
    the decay rate and amplitude fitted on consecutive pairs at that gap.
    """
    words = [tuple(w) for w in words]
    if len(words) < 2:
        raise ValueError("need at least two words")
    if gap < max(len(w) for w in words):
        raise ValueError("gap shorter than the words: blocks would overlap")
    mus = [model.cylinder_measure(w) for w in words]
    joint = model.joint_measure([(j * gap, w) for j, w in enumerate(words)])
    ratio = joint / math.prod(mus)
    k = len(words) - 1
    g = model.gamma
    beta = 0.0
    M = 0.0
    half = gap // 2
    for a, b in zip(words, words[1:]):
        rep = correlation_decay(model, a, b, range(max(len(a), 1), gap + 1))
        beta = max(beta, rep.beta)
    if beta > 0:
        for a, b in zip(words, words[1:]):
            pair = model.joint_measure([(0, a), (gap, b)]) / (model.cylinder_measure(a) * model.cylinder_measure(b))
            M = max(M, abs(pair - 1.0) / beta**half)
    shrink = min(M * beta**half, 1.0)
    lower = g**-3 * (1 - shrink) ** (k - 1) * (1 - 1e-12)
    upper = g**3 * (1 + shrink) ** (k - 1) * (1 + 1e-12)
    return MultiRelation(ratio, lower, upper, M, beta)

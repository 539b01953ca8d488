"""Thermodynamic formalism for locally constant potentials.

A depth-``K`` potential assigns a value to every admissible ``K``-word. Its
transfer matrix lives on the graph of admissible ``K``-words (edges are
one-symbol shifts), so pressure, Gibbs measures and the multifractal
quantities below reduce to finite Perron-Frobenius problems.

The Gibbs measure is the stationary Markov chain obtained by conjugating the
transfer matrix with its right Perron vector. Birkhoff sums of a finite word
use its ``n - K + 1`` complete windows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .markov_map import MarkovMap, Word
from .perron import ReducibleGraphError, cycle_ratio_extreme, perron

ETA_TOL = 1e-12
ETA_BRACKET = 64.0
Q_BRACKET = 512.0


class ThermoError(ValueError):
    pass


@dataclass(frozen=True)
class LogRational:
    """The exact value ``log(p/q)``, kept symbolic for provenance."""

    arg: Fraction

    def __post_init__(self):
        if self.arg <= 0:
            raise ThermoError(f"log of non-positive rational {self.arg}")

    def __float__(self) -> float:
        return math.log(self.arg.numerator) - math.log(self.arg.denominator)

    def __str__(self) -> str:
        return f"log({self.arg})"


@dataclass(frozen=True)
class Potential:
    """Depth-``K`` locally constant potential (natural-log units)."""

    depth: int
    values: Mapping[Word, float]
    normalized: bool = False
    labels: Mapping[Word, str] = field(default_factory=dict, compare=False)

    @classmethod
    def from_table(cls, m: MarkovMap, depth: int, table: Mapping, normalized: bool = False) -> "Potential":
        """Build from ``{word: value}``; words may be tuples or digit strings."""
        values: dict[Word, float] = {}
        labels: dict[Word, str] = {}
        for key, val in table.items():
            w = _as_word(key)
            if len(w) != depth:
                raise ThermoError(f"word {key!r} has length {len(w)}, expected depth {depth}")
            if not m.admissible(w):
                raise ThermoError(f"word {key!r} is not admissible")
            values[w] = float(val)
            labels[w] = str(val)
        missing = [w for w in m.words(depth) if w not in values]
        if missing:
            raise ThermoError(f"potential table misses admissible words {missing[:4]}")
        return cls(depth, values, normalized, labels)

    @classmethod
    def constant(cls, m: MarkovMap, value: float, depth: int = 1) -> "Potential":
        return cls(depth, {w: float(value) for w in m.words(depth)})

    @classmethod
    def bernoulli(cls, m: MarkovMap, probs: Sequence) -> "Potential":
        return cls(1, {(k,): math.log(float(p)) for k, p in enumerate(probs)})

    def __call__(self, word: Word) -> float:
        return self.values[word[: self.depth]]

    def shifted(self, c: float) -> "Potential":
        return Potential(self.depth, {w: v + c for w, v in self.values.items()}, self.normalized)

    def combine(self, other: "Potential", a: float, b: float, m: MarkovMap) -> "Potential":
        """The potential ``a * self + b * other`` at the common depth."""
        K = max(self.depth, other.depth)
        x = self.lift_on(m, K)
        y = other.lift_on(m, K)
        return Potential(K, {w: a * x.values[w] + b * y.values[w] for w in x.values})

    def lift_on(self, m: MarkovMap, depth: int) -> "Potential":
        """Same function seen as a depth-``depth`` potential (first window)."""
        if depth < self.depth:
            raise ThermoError("cannot lower the depth of a potential")
        if depth == self.depth:
            return self
        return Potential(depth, {w: self.values[w[: self.depth]] for w in m.words(depth)}, self.normalized)


def _as_word(key) -> Word:
    if isinstance(key, str):
        return tuple(int(ch) for ch in key.strip())
    return tuple(int(s) for s in key)


def log_derivative(m: MarkovMap) -> Potential:
    """``log|T'|`` as a depth-1 potential."""
    return Potential(1, {(k,): math.log(s) for k, s in enumerate(m.slopes)})


def geometric_potential(m: MarkovMap) -> Potential:
    """``psi = -log|T'|``; its Gibbs measure is equivalent to Lebesgue."""
    return Potential(1, {(k,): -math.log(s) for k, s in enumerate(m.slopes)})


class WordGraph:
    """Admissible ``K``-words with one-symbol shift edges."""

    def __init__(self, m: MarkovMap, K: int):
        self.map = m
        self.K = K
        self.states: list[Word] = list(m.words(K))
        self.index = {w: i for i, w in enumerate(self.states)}
        n = len(self.states)
        adj = np.zeros((n, n), dtype=bool)
        for i, w in enumerate(self.states):
            for j in m.successors(w[-1]):
                adj[i, self.index[w[1:] + (j,)]] = True
        self.adj = adj
        self.symbols = np.array(self.states, dtype=np.int64).reshape(n, K)

    def __len__(self) -> int:
        return len(self.states)

    def vector(self, pot: Potential) -> np.ndarray:
        p = pot.lift_on(self.map, self.K)
        return np.array([p.values[w] for w in self.states])


_GRAPHS: dict[tuple[int, int], WordGraph] = {}


def word_graph(m: MarkovMap, K: int) -> WordGraph:
    key = (id(m), K)
    g = _GRAPHS.get(key)
    if g is None or g.map is not m:
        g = WordGraph(m, K)
        _GRAPHS[key] = g
    return g


def _pressure_from_vector(g: WordGraph, v: np.ndarray) -> tuple[float, np.ndarray, np.ndarray, float]:
    vmax = float(v.max())
    M = np.exp(v - vmax)[:, None] * g.adj
    try:
        lam, h, nu = perron(M)
    except ReducibleGraphError as exc:
        raise ThermoError(f"recoded {g.K}-word graph is reducible") from exc
    return math.log(lam) + vmax, h, nu, lam


def pressure(m: MarkovMap, pot: Potential) -> float:
    """Topological pressure: log of the Perron eigenvalue of the transfer matrix."""
    g = word_graph(m, pot.depth)
    return _pressure_from_vector(g, g.vector(pot))[0]


def normalize(m: MarkovMap, pot: Potential) -> Potential:
    """``phi - P(phi)``, flagged as normalized."""
    P = pressure(m, pot)
    return Potential(pot.depth, {w: v - P for w, v in pot.values.items()}, True, pot.labels)


def birkhoff_sum(m: MarkovMap, pot: Potential, word: Sequence[int]) -> float:
    """Sum of the potential over the ``n - K + 1`` complete windows of ``word``."""
    word = tuple(word)
    K = pot.depth
    if len(word) < K:
        raise ThermoError(f"word of length {len(word)} shorter than potential depth {K}")
    return math.fsum(pot.values[word[i : i + K]] for i in range(len(word) - K + 1))


class GibbsModel:
    """Gibbs measure of a potential, realised as a stationary chain on ``K``-words."""

    def __init__(self, m: MarkovMap, pot: Potential):
        self.map = m
        self.potential = pot
        self.graph = word_graph(m, pot.depth)
        g = self.graph
        v = g.vector(pot)
        self.phi = v
        P, h, nu, lam = _pressure_from_vector(g, v)
        self.pressure = P
        self.h = h
        self.nu = nu
        M = np.exp(v - float(v.max()))[:, None] * g.adj
        self.transition = M * h[None, :] / (lam * h[:, None])
        self.transition /= self.transition.sum(axis=1, keepdims=True)
        pi = nu * h
        self.stationary = pi / pi.sum()
        self.gamma = self._gibbs_constant(v, h, nu, lam)

    @property
    def K(self) -> int:
        return self.potential.depth

    def _gibbs_constant(self, v, h, nu, lam) -> float:
        # Exact window-convention ratio mu(I_w) / exp(S_w - (n-K+1) P) = first(w_1) * last(w_l).
        first = nu
        last = h * np.exp(-(v - v.max())) * lam
        lo = first.min() * last.min()
        hi = first.max() * last.max()
        exact = max(hi, 1.0 / lo)
        eig_bound = 2.0 * (h.max() / h.min()) * (nu.max() / nu.min())
        spread = math.exp((self.K - 1) * float(np.abs(v - self.pressure).max()))
        return max(exact, eig_bound) * spread

    def gibbs_ratio(self, word: Sequence[int]) -> float:
        """``mu(I_w) / exp(S_w - (n-K+1) P)``; lies in ``[1/gamma, gamma]``."""
        word = tuple(word)
        mu = self.cylinder_measure(word)
        windows = len(word) - self.K + 1
        return mu / math.exp(birkhoff_sum(self.map, self.potential, word) - windows * self.pressure)

    def cylinder_measure(self, word: Sequence[int]) -> float:
        """Exact chain value of ``mu(I_w)``; zero for inadmissible words."""
        word = tuple(int(s) for s in word)
        if not self.map.admissible(word):
            return 0.0
        K = self.K
        if len(word) < K:
            return math.fsum(
                self.stationary[i] for i, w in enumerate(self.graph.states) if w[: len(word)] == word
            )
        idx = self.graph.index
        states = [idx[word[i : i + K]] for i in range(len(word) - K + 1)]
        p = self.stationary[states[0]]
        T = self.transition
        for a, b in zip(states, states[1:]):
            p *= T[a, b]
        return float(p)

    def integrate(self, pot: Potential) -> float:
        """``∫ f dmu`` for a locally constant ``f``."""
        K = max(self.K, pot.depth)
        if K == self.K:
            return float(self.stationary @ self.graph.vector(pot))
        # f depends on more symbols than the chain state: use cylinder masses.
        return math.fsum(self.cylinder_measure(w) * pot.values[w] for w in self.map.words(pot.depth))

    def constrained_measure(self, constraints: Mapping[int, int]) -> float:
        """``mu`` of the set of points whose itinerary has the given symbols.

        ``constraints`` maps positions (``>= 0``) to symbols. Unconstrained
        stretches are crossed with matrix powers, so widely spaced blocks are
        cheap.
        """
        if not constraints:
            return 1.0
        K = self.K
        shift = min(constraints)
        fixed = {p - shift: s for p, s in constraints.items()}
        last = max(fixed)
        n_windows = max(0, last - K + 1) + 1
        syms = self.graph.symbols

        def mask(i: int) -> np.ndarray | None:
            ok = None
            for off in range(K):
                s = fixed.get(i + off)
                if s is not None:
                    col = syms[:, off] == s
                    ok = col if ok is None else ok & col
            return ok

        constrained = sorted({i for p in fixed for i in range(max(0, p - K + 1), min(p, n_windows - 1) + 1)})
        v = self.stationary.copy()
        pos = 0
        m0 = mask(0)
        if m0 is not None:
            v = v * m0
        for i in constrained:
            if i == 0:
                continue
            v = v @ np.linalg.matrix_power(self.transition, i - pos)
            pos = i
            v = v * mask(i)
        return float(v.sum())

    def joint_measure(self, blocks: Iterable[tuple[int, Sequence[int]]]) -> float:
        """``mu(∩ T^{-offset} I_word)`` for ``(offset, word)`` blocks."""
        cons: dict[int, int] = {}
        for off, word in blocks:
            for i, s in enumerate(word):
                p = off + i
                if cons.get(p, s) != s:
                    return 0.0
                cons[p] = int(s)
        for p in cons:
            if p + 1 in cons and not self.map.A[cons[p], cons[p + 1]]:
                return 0.0
        return self.constrained_measure(cons)

    def sampler_tables(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Arrays for streaming samplers: stationary CDF, transition CDFs, successor
        state table and the symbol each transition appends."""
        T = self.transition
        n = T.shape[0]
        Q = self.map.Q
        succ = np.full((n, Q), -1, dtype=np.int64)
        cdf = np.zeros((n, Q))
        sym = np.zeros((n, Q), dtype=np.int64)
        for i, w in enumerate(self.graph.states):
            acc = 0.0
            for c, j in enumerate(self.map.successors(w[-1])):
                tgt = self.graph.index[w[1:] + (j,)]
                acc += T[i, tgt]
                succ[i, c] = tgt
                cdf[i, c] = acc
                sym[i, c] = j
            last = len(self.map.successors(w[-1])) - 1
            cdf[i, last:] = 1.0
            succ[i, last + 1 :] = succ[i, last]
            sym[i, last + 1 :] = sym[i, last]
        start = np.cumsum(self.stationary)
        start[-1] = 1.0
        return start, cdf, succ, sym


def gibbs_model(m: MarkovMap, pot: Potential) -> GibbsModel:
    return GibbsModel(m, pot)


def _require_normalized(m: MarkovMap, pot: Potential, tol: float = 1e-9) -> None:
    if abs(pressure(m, pot)) > tol:
        raise ThermoError("potential is not normalized (pressure != 0); call normalize() first")


def _family(m: MarkovMap, pot: Potential) -> tuple[WordGraph, np.ndarray, np.ndarray]:
    g = word_graph(m, pot.depth)
    return g, g.vector(pot), g.vector(log_derivative(m))


def eta(m: MarkovMap, pot: Potential, q: float) -> float:
    """Root ``t`` of ``P(-t log|T'| + q phi) = 0`` by bisection."""
    g, phi, logd = _family(m, pot)
    return _eta(g, phi, logd, q)


def _eta(g: WordGraph, phi: np.ndarray, logd: np.ndarray, q: float) -> float:
    def P(t: float) -> float:
        return _pressure_from_vector(g, -t * logd + q * phi)[0]

    lo, hi = -1.0, 1.0
    while P(lo) < 0:
        lo *= 2
        if lo < -ETA_BRACKET:
            raise ThermoError(f"eta bracket expansion failed for q={q}")
    while P(hi) > 0:
        hi *= 2
        if hi > ETA_BRACKET:
            raise ThermoError(f"eta bracket expansion failed for q={q}")
    while hi - lo > ETA_TOL:
        mid = 0.5 * (lo + hi)
        if P(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _alpha_from(g: WordGraph, phi: np.ndarray, logd: np.ndarray, q: float, t: float) -> float:
    _, h, nu, _ = _pressure_from_vector(g, -t * logd + q * phi)
    pi = nu * h
    pi /= pi.sum()
    return float(pi @ -phi) / float(pi @ logd)


def alpha(m: MarkovMap, pot: Potential, q: float) -> float:
    """``∫(-phi) dmu_q / ∫ log|T'| dmu_q`` with ``mu_q`` the Gibbs measure of
    ``-eta(q) log|T'| + q phi``."""
    g, phi, logd = _family(m, pot)
    return _alpha_from(g, phi, logd, q, _eta(g, phi, logd, q))


def mu_q_potential(m: MarkovMap, pot: Potential, q: float) -> Potential:
    """The (normalized) potential ``phi_q = -eta(q) log|T'| + q phi``."""
    t = eta(m, pot, q)
    out = pot.combine(log_derivative(m), q, -t, m)
    return Potential(out.depth, out.values, True)


def extremes(m: MarkovMap, pot: Potential) -> tuple[float, float]:
    """``(alpha_-, alpha_+)``: extreme cycle ratios of ``-phi`` over ``log|T'|``."""
    g, phi, logd = _family(m, pot)
    lo = cycle_ratio_extreme(g.adj, -phi, logd, maximize=False)
    hi = cycle_ratio_extreme(g.adj, -phi, logd, maximize=True)
    return lo, hi


def delta_exponent(m: MarkovMap, phi: Potential, psi: Potential) -> float:
    """``∫ log|T'| dmu_psi / ∫(-phi) dmu_psi``."""
    model = GibbsModel(m, psi)
    denom = -model.integrate(phi)
    if denom <= 0:
        raise ThermoError("∫(-phi) dmu_psi <= 0")
    return model.integrate(log_derivative(m)) / denom


class SpectrumInvariantError(ArithmeticError):
    pass


@dataclass
class SpectrumCurve:
    q: np.ndarray
    eta: np.ndarray
    alpha: np.ndarray
    D: np.ndarray
    alpha_minus: float
    alpha_plus: float
    alpha_max: float
    dim: float
    map: MarkovMap | None = field(default=None, repr=False)
    potential: Potential | None = field(default=None, repr=False)

    @property
    def degenerate(self) -> bool:
        return self.alpha_plus - self.alpha_minus < 1e-9

    def rows(self) -> list[tuple[float, float, float, float]]:
        return list(zip(self.q.tolist(), self.eta.tolist(), self.alpha.tolist(), self.D.tolist()))

    def D_at(self, a: float) -> float:
        """Spectrum value ``D(a)`` for ``a`` inside ``(alpha_-, alpha_+)``."""
        if self.degenerate:
            if abs(a - self.alpha_max) < 1e-9:
                return 1.0
            raise ThermoError(f"alpha={a} outside the single-point spectrum {{{self.alpha_max}}}")
        q = q_of_alpha(self, a)
        return eta(self.map, self.potential, q) + q * a

    def check(self, tol: float = 1e-9) -> None:
        """Raise :class:`SpectrumInvariantError` on any violated invariant."""
        problems = []
        e0 = eta(self.map, self.potential, 0.0)
        e1 = eta(self.map, self.potential, 1.0)
        if abs(e0 - 1) > 1e-10 or abs(e1) > 1e-10:
            problems.append(f"eta(0)={e0}, eta(1)={e1}")
        if np.any(np.diff(self.alpha) > tol):
            problems.append("alpha(q) increases on the grid")
        if len(self.q) >= 3:
            d2 = _second_differences(self.q, self.eta)
            # Solver error in eta is amplified by the inverse squared spacing.
            h = np.diff(self.q)
            with np.errstate(divide="ignore", over="ignore"):
                slack = 1e-7 + 8 * ETA_TOL / (h[:-1] * h[1:])
            # alpha = -eta' is non-increasing, so eta is convex.
            if np.any(d2 < -slack):
                problems.append(f"eta not convex (min second difference {d2.min():.3g})")
        if np.any(self.alpha < self.alpha_minus - tol) or np.any(self.alpha > self.alpha_plus + tol):
            problems.append("alpha(q) outside [alpha_-, alpha_+]")
        if np.any(self.D > 1 + tol):
            problems.append("D > 1")
        # D(alpha(0)) = eta(0) and D(alpha(1)) = eta(1) + alpha(1).
        if abs(e0 - 1) > tol:
            problems.append("D(alpha_max) != 1")
        if abs(e1 + self.dim - self.dim) > tol:
            problems.append("D(dim) != dim")
        if problems:
            raise SpectrumInvariantError("; ".join(problems))


def _second_differences(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # Divided second differences, valid for non-uniform grids.
    x0, x1, x2 = x[:-2], x[1:-1], x[2:]
    y0, y1, y2 = y[:-2], y[1:-1], y[2:]
    return 2 * ((y2 - y1) / (x2 - x1) - (y1 - y0) / (x1 - x0)) / (x2 - x0)


def spectrum(m: MarkovMap, pot: Potential, q_grid: Iterable[float], check: bool = True) -> SpectrumCurve:
    """Sample ``(q, eta(q), alpha(q), D = eta + q alpha)`` on a sorted grid."""
    qs = np.unique(np.array([float(q) for q in q_grid]) + 0.0)  # sorted, with -0.0 merged into 0.0
    _require_normalized(m, pot)
    g, phi, logd = _family(m, pot)
    etas, alphas = [], []
    for q in qs:
        t = _eta(g, phi, logd, float(q))
        etas.append(t)
        alphas.append(_alpha_from(g, phi, logd, float(q), t))
    etas_a = np.array(etas)
    alphas_a = np.array(alphas)
    a_minus, a_plus = extremes(m, pot)
    curve = SpectrumCurve(
        q=qs,
        eta=etas_a,
        alpha=alphas_a,
        D=etas_a + qs * alphas_a,
        alpha_minus=a_minus,
        alpha_plus=a_plus,
        alpha_max=_alpha_from(g, phi, logd, 0.0, _eta(g, phi, logd, 0.0)),
        dim=_alpha_from(g, phi, logd, 1.0, _eta(g, phi, logd, 1.0)),
        map=m,
        potential=pot,
    )
    if check:
        curve.check()
    return curve


def q_of_alpha(curve: SpectrumCurve, a: float, tol: float = 1e-10) -> float:
    """Inverse of the decreasing map ``q -> alpha(q)``."""
    if not curve.alpha_minus < a < curve.alpha_plus:
        raise ThermoError(f"alpha={a} outside ({curve.alpha_minus}, {curve.alpha_plus})")
    g, phi, logd = _family(curve.map, curve.potential)

    def f(q: float) -> float:
        return _alpha_from(g, phi, logd, q, _eta(g, phi, logd, q)) - a

    lo, hi = -1.0, 1.0
    while f(lo) < 0:
        lo *= 2
        if lo < -Q_BRACKET:
            raise ThermoError(f"q(alpha) bracket failed for alpha={a}")
    while f(hi) > 0:
        hi *= 2
        if hi > Q_BRACKET:
            raise ThermoError(f"q(alpha) bracket failed for alpha={a}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)

"""Predicted dimensions of limsup sets and the counting proxies that test them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .hitting import HitProfile, tau_cylinder_profiles
from .intervals import union_measure
from .markov_map import MarkovMap
from .symbolic_orbit import ItineraryStream, enclosure_depth, float_enclosures, sample_stream
from .thermo import GibbsModel, SpectrumCurve, ThermoError

BOUNDARY_TOL = 1e-9
REGIONS = ("I", "II", "III", "IV")


class PreconditionError(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class TheoremPrediction:
    delta: float
    region: str
    dim_L: float
    dim_F: float | None  # None: the set is empty
    leb_L: str  # "0", "1" or "undetermined"
    boundary: str = ""  # name of the threshold 1/delta sits on, if any

    @property
    def inv_delta(self) -> float:
        return 1.0 / self.delta

    @property
    def note(self) -> str:
        return "open-in-paper" if self.boundary in ("alpha_max", "alpha_plus") else ""

    def csv_fields(self) -> tuple[str, str, str, str]:
        dim_f = "empty" if self.dim_F is None else _fmt(self.dim_F)
        leb = self.leb_L
        region = self.region + (f"@{self.boundary}" if self.boundary else "")
        return region, _fmt(self.dim_L), dim_f, leb


def _fmt(x: float | None) -> str:
    if x is None:
        return ""
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return repr(float(x))


def _spectrum_value(curve: SpectrumCurve, a: float) -> float:
    """``D(a)``; at the closed endpoints the one-sided limit is not sampled."""
    if abs(a - curve.alpha_max) <= BOUNDARY_TOL:
        return 1.0
    if abs(a - curve.dim) <= BOUNDARY_TOL:
        return curve.dim
    try:
        return curve.D_at(a)
    except ThermoError:
        return float("nan")


def predict(curve: SpectrumCurve, delta: float) -> TheoremPrediction:
    if delta <= 0:
        raise ValueError("delta must be positive")
    inv = 1.0 / delta
    thresholds = (("dim", curve.dim), ("alpha_max", curve.alpha_max), ("alpha_plus", curve.alpha_plus))
    boundary = next((name for name, v in thresholds if abs(inv - v) <= BOUNDARY_TOL), "")
    if inv <= curve.dim + (BOUNDARY_TOL if boundary == "dim" else 0):
        region = "I"
    elif inv <= curve.alpha_max + (BOUNDARY_TOL if boundary == "alpha_max" else 0):
        region = "II"
    elif inv <= curve.alpha_plus + (BOUNDARY_TOL if boundary == "alpha_plus" else 0):
        region = "III"
    else:
        region = "IV"

    if region == "I":
        dim_L = inv
    elif region == "II":
        dim_L = _spectrum_value(curve, inv)
    else:
        dim_L = 1.0

    if region in ("I", "II"):
        dim_F: float | None = 1.0
    elif region == "III":
        dim_F = _spectrum_value(curve, inv) if boundary != "alpha_plus" else float("nan")
    else:
        dim_F = None

    if abs(inv - curve.alpha_max) <= BOUNDARY_TOL:
        leb = "undetermined"
    else:
        leb = "0" if inv < curve.alpha_max else "1"
    return TheoremPrediction(float(delta), region, float(dim_L), dim_F, leb, boundary)


# -- level sets of the measure -------------------------------------------


def level_set_counts(model: GibbsModel, n: int, h_lo: float, h_hi: float = math.inf) -> int:
    """Number of scale-``n`` covering members with ``|C|^h_hi <= mu(C) <= |C|^h_lo``.

    Equivalently ``h_lo <= log mu(C) / log |C| <= h_hi``. Cylinders are walked
    depth first with exact lengths; a subtree is skipped when every
    descendant's exponent provably lies outside the band. The exponent of a
    descendant is a weighted mediant of the current exponent and the
    per-step ratios ``log P(step) / log(length step)``, so it stays inside
    their hull.
    """
    if not 0 < h_lo < h_hi:
        raise ValueError("need 0 < h_lo < h_hi")
    m = model.map
    K = model.K
    r = Fraction(1, 2**n)
    T = model.transition
    idx = model.graph.index

    # Per-edge (log-measure, log-length) increments for words of length >= K.
    step_ratios = []
    for i, w in enumerate(model.graph.states):
        k = w[-1]
        c_lo, c_hi = m.image_bounds(k)
        for j in m.successors(k):
            b = math.log(m.cell_length(j) / (c_hi - c_lo))
            a = math.log(T[i, idx[w[1:] + (j,)]])
            if b < 0:
                step_ratios.append(a / b)
    rmin, rmax = min(step_ratios, default=h_lo), max(step_ratios, default=h_lo)

    # Stack entries: (word, exact length, log mu or None while shorter than K, chain state).
    count = 0
    stack = []
    for k in range(m.Q):
        stack.append(((k,), m.cell_length(k), None, None))
    while stack:
        word, length, log_mu, state = stack.pop()
        if log_mu is None:
            mu = model.cylinder_measure(word)
            if mu <= 0:
                continue
            log_mu = math.log(mu)
            if len(word) == K:
                state = idx[word]
        log_len = math.log(length)
        expo = log_mu / log_len if log_len < 0 else math.inf
        if length <= r:
            if h_lo <= expo <= h_hi:
                count += 1
            continue
        if state is not None and log_len < 0:
            lo_b, hi_b = min(expo, rmin), max(expo, rmax)
            if hi_b < h_lo or lo_b > h_hi:
                continue
        k = word[-1]
        c_lo, c_hi = m.image_bounds(k)
        span = c_hi - c_lo
        for j in m.successors(k):
            child = length * m.cell_length(j) / span
            if state is None:
                stack.append((word + (j,), child, None, None))
            else:
                nxt = idx[model.graph.states[state][1:] + (j,)]
                stack.append((word + (j,), child, log_mu + math.log(T[state, nxt]), nxt))
    return count


# -- growth regressions ----------------------------------------------------


@dataclass(frozen=True)
class GrowthReport:
    """Least-squares slope of ``log2(count)`` against ``n``."""

    name: str
    n: tuple[int, ...]
    counts: tuple[int, ...]
    totals: tuple[int, ...]
    slope: float
    residual: float
    predicted: float
    tolerance: float
    mode: str  # "equal", "upper" or "fraction"
    censored: tuple[int, ...] = ()
    notes: str = ""

    @property
    def fractions(self) -> tuple[float, ...]:
        return tuple(c / t if t else 0.0 for c, t in zip(self.counts, self.totals))

    @property
    def vanishing(self) -> bool:
        return math.isinf(self.slope) and self.slope < 0

    @property
    def partial(self) -> bool:
        return bool(self.censored)

    @property
    def value(self) -> float:
        return self.fractions[-1] if self.mode == "fraction" else self.slope

    @property
    def passed(self) -> bool:
        if self.mode == "fraction":
            return self.fractions[-1] >= self.predicted
        if self.mode == "upper":
            return self.slope <= self.predicted + self.tolerance
        if math.isinf(self.predicted):
            return self.vanishing or self.slope < 0
        return abs(self.slope - self.predicted) <= self.tolerance


def growth_slope(n: Sequence[int], counts: Sequence[int]) -> tuple[float, float]:
    """Slope and RMS residual of ``log2(count)`` vs ``n`` over nonzero counts.

    Fewer than four nonzero counts means the counts die out: slope ``-inf``.
    """
    pts = [(k, c) for k, c in zip(n, counts) if c > 0]
    if len(pts) < 4:
        return -math.inf, 0.0
    x = np.array([k for k, _ in pts], dtype=float)
    y = np.log2([c for _, c in pts])
    coef = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((np.polyval(coef, x) - y) ** 2)))
    return float(coef[0]), resid


def _check_window(n_window: Sequence[int]) -> tuple[int, ...]:
    n_window = tuple(int(k) for k in n_window)
    if len(n_window) == 2 and n_window[1] - n_window[0] > 1:
        n_window = tuple(range(n_window[0], n_window[1] + 1))
    if len(n_window) < 4:
        raise ValueError("regression window needs at least 4 generations")
    return n_window


def level_set_growth(model: GibbsModel, h_lo: float, h_hi: float, n_window: Sequence[int], predicted: float, tolerance: float = 0.1) -> GrowthReport:
    ns = _check_window(n_window)
    counts = [level_set_counts(model, k, h_lo, h_hi) for k in ns]
    totals = [len(model.map.scale_covering(k)) for k in ns]
    slope, res = growth_slope(ns, counts)
    return GrowthReport("level_set", ns, tuple(counts), tuple(totals), slope, res, predicted, tolerance, "equal")


def band_bound(curve: SpectrumCurve, h_lo: float, h_hi: float) -> float:
    """Largest spectrum value over the exponent band ``[h_lo, h_hi]``."""
    a = min(max(curve.alpha_max, h_lo), h_hi)
    return _spectrum_value(curve, a)


def _profiles(model: GibbsModel, stream: ItineraryStream, ns: Sequence[int], horizon: int) -> list[HitProfile]:
    covs = [model.map.scale_covering(k) for k in ns]
    return tau_cylinder_profiles(model.map, stream, covs, horizon)


def unhit_growth(
    model: GibbsModel,
    stream: ItineraryStream,
    curve: SpectrumCurve,
    s: float,
    n_window: Sequence[int],
    budget: int | None = None,
    tolerance: float = 0.1,
) -> GrowthReport:
    """Count members ``C`` with ``tau(x, C) > |C|^-s`` at each scale.

    The predicted growth exponent is ``D(s)`` inside the spectrum and
    ``-inf`` (counts die out) beyond ``alpha_+``. Scales whose threshold
    exceeds ``budget`` are dropped and listed as censored.
    """
    if s <= curve.alpha_max + BOUNDARY_TOL:
        raise PreconditionError(f"s={s} must exceed alpha_max={curve.alpha_max:.6f}")
    ns = _check_window(n_window)
    m = model.map
    thresholds = {k: max(float(c.length) for c in m.scale_covering(k)) ** -s for k in ns}
    kept = [k for k in ns if budget is None or thresholds[k] <= budget]
    censored = tuple(k for k in ns if k not in kept)
    predicted = -math.inf if s >= curve.alpha_plus - BOUNDARY_TOL else _spectrum_value(curve, s)
    if not kept:
        return GrowthReport("unhit_growth", (), (), (), math.nan, math.nan, predicted, tolerance, "equal", censored, "budget exceeded")
    horizon = math.ceil(max(thresholds[k] for k in kept))
    counts, totals = [], []
    for prof in _profiles(model, stream, kept, horizon):
        t = prof.lengths() ** -s
        tau = prof.tau.astype(float)
        unhit = (prof.tau < 0) | (tau > t)
        counts.append(int(unhit.sum()))
        totals.append(len(prof))
    slope, res = growth_slope(kept, counts) if len(kept) >= 4 else (math.nan, math.nan)
    note = "budget exceeded: partial window" if censored else ""
    return GrowthReport("unhit_growth", tuple(kept), tuple(counts), tuple(totals), slope, res, predicted, tolerance, "equal", censored, note)


def early_hit_growth(
    model: GibbsModel,
    stream: ItineraryStream,
    curve: SpectrumCurve,
    a: float,
    h_lo: float,
    h_hi: float,
    n_window: Sequence[int],
    tolerance: float = 0.1,
    horizon_scale: float = 1.0,
    big_hit_fraction: float = 0.99,
) -> GrowthReport:
    """Count band members ``C`` (``h_lo <= log mu(C)/log|C| <= h_hi``) hit by step ``|C|^-a``.

    Bands above ``a`` give an upper-bound check against
    ``min(D(a), max D over the band)``; a band below ``a`` is the
    big-hitting regime, checked by the hit fraction at the last scale.
    ``horizon_scale`` multiplies every step threshold (0 keeps step 0 only).
    """
    if a >= curve.alpha_max:
        raise PreconditionError(f"a={a} must be below alpha_max={curve.alpha_max:.6f}")
    ns = _check_window(n_window)
    m = model.map
    covs = [m.scale_covering(k) for k in ns]
    horizon = math.ceil(horizon_scale * max(float(c.length) for cov in covs for c in cov) ** -a)
    profiles = tau_cylinder_profiles(m, stream, covs, horizon)
    counts, totals = [], []
    for cov, prof in zip(covs, profiles):
        lengths = prof.lengths()
        mus = np.array([model.cylinder_measure(w) for w in prof.words])
        with np.errstate(divide="ignore"):
            expo = np.log(mus) / np.log(lengths)
        band = (expo >= h_lo) & (expo <= h_hi)
        limit = horizon_scale * lengths**-a
        hit = (prof.tau >= 0) & (prof.tau <= limit)
        counts.append(int((band & hit).sum()))
        totals.append(int(band.sum()))
    if h_hi < a:
        return GrowthReport("early_hit_growth", ns, tuple(counts), tuple(totals), math.nan, math.nan, big_hit_fraction, 0.0, "fraction")
    slope, res = growth_slope(ns, counts)
    predicted = min(_spectrum_value(curve, a), band_bound(curve, h_lo, h_hi))
    return GrowthReport("early_hit_growth", ns, tuple(counts), tuple(totals), slope, res, predicted, tolerance, "upper")


# -- Lebesgue coverage and maximal hitting exponent ---------------------------


def lebesgue_coverage(m: MarkovMap, stream: ItineraryStream, delta: float, N: int, M: int) -> float:
    """Measure of ``[0,1] ∩ ∪_{N<=n<=M} B(T^n x, n^-delta)``.

    Each ball is centred on an outward-rounded enclosure of ``T^n x`` no
    wider than a thousandth of the smallest radius, so the value is an upper
    bound of the exact truncated-union measure.
    """
    if not 1 <= N < M:
        raise ValueError("need 1 <= N < M")
    width = 1e-3 * float(M) ** -delta
    depth = enclosure_depth(m, width)
    count = M - N + 1
    sym = stream.symbols(N, M + depth)
    lo, hi = float_enclosures(m, sym, count, depth)
    r = np.arange(N, M + 1, dtype=float) ** -delta
    return union_measure(lo - r, hi + r)


@dataclass(frozen=True)
class MaxHit:
    n: int
    value: float
    bound: float
    unhit: int
    horizon: int
    extremal: int

    @property
    def passed(self) -> bool:
        return self.unhit == 0 and self.value <= self.bound


def max_hit_exponent(model: GibbsModel, stream: ItineraryStream, curve: SpectrumCurve, n: int, budget: int, margin: float = 0.1, check_budget: bool = True) -> MaxHit:
    """``max_C log2 tau(x, C) / n`` over the scale-``n`` covering.

    The bound is ``alpha_+ + margin`` plus ``log2(1 + ln N) / n``, where ``N``
    counts members whose exponent is within ``margin`` of ``alpha_+``: the
    largest of ``N`` comparable waiting times exceeds a typical one by about
    a factor ``ln N``. With a single extremal member the extra term is zero.
    """
    _, asym = model.map.generation_constants()
    need = 2 ** ((curve.alpha_plus + 0.2) * n * asym)
    if check_budget and budget < need:
        raise PreconditionError(f"budget {budget} below required {need:.3g}")
    cov = model.map.scale_covering(n)
    prof = tau_cylinder_profiles(model.map, stream, [cov], budget)[0]
    expo = np.array([math.log(model.cylinder_measure(c.word)) / math.log(c.length) for c in cov])
    extremal = max(1, int((expo >= curve.alpha_plus - margin).sum()))
    bound = curve.alpha_plus + margin + math.log2(1 + math.log(extremal)) / n
    unhit = int((prof.tau < 0).sum())
    if unhit:
        value = math.inf
    else:
        value = float(np.log2(np.maximum(prof.tau, 1)).max()) / n
    return MaxHit(n, value, bound, unhit, budget, extremal)


# -- report -----------------------------------------------------------------


@dataclass(frozen=True)
class Budgets:
    coverage_N: int = 1000
    coverage_M: int = 10**6
    window: tuple[int, int] = (8, 14)
    max_hit_n: int = 12
    max_steps: int = 2**25
    tolerance: float = 0.1
    coverage_pass: float = 0.99
    band_offsets: tuple[float, float] = (0.2, 0.4)


REPORT_HEADER = (
    "delta", "inv_delta", "region", "pred_dim_L", "pred_dim_F", "pred_leb",
    "proxy_name", "seed", "slope_or_value", "predicted", "tolerance", "verdict",
)


@dataclass(frozen=True)
class ReportCell:
    delta: float
    seed: int
    proxy: str

    @property
    def key(self) -> tuple[float, int, str]:
        return (self.delta, self.seed, self.proxy)


def report_cells(curve: SpectrumCurve, deltas: Iterable[float], seeds: Iterable[int]) -> list[ReportCell]:
    """Proxies that apply to each ``(delta, seed)``, in a fixed order."""
    cells = []
    seeds = list(seeds)
    for d in deltas:
        pred = predict(curve, d)
        proxies = ["coverage"]
        if pred.region == "II" and not pred.boundary:
            proxies.append("early_hit_growth")
        if pred.region in ("III", "IV") and not pred.boundary:
            proxies.append("unhit_growth")
        if pred.region == "IV":
            proxies.append("max_hit_exponent")
        for s in seeds:
            cells.extend(ReportCell(float(d), int(s), p) for p in proxies)
    return sorted(cells, key=lambda c: (c.delta, c.seed, REPORT_ORDER.index(c.proxy)))


REPORT_ORDER = ("coverage", "early_hit_growth", "unhit_growth", "max_hit_exponent")


@dataclass(frozen=True)
class CellResult:
    cell: ReportCell
    value: float
    predicted: float
    tolerance: float
    verdict: str  # pass, fail, info or partial


def evaluate_cell(model: GibbsModel, curve: SpectrumCurve, cell: ReportCell, budgets: Budgets) -> CellResult:
    pred = predict(curve, cell.delta)
    inv = pred.inv_delta
    stream = sample_stream(model, cell.seed)
    tol = budgets.tolerance
    if cell.proxy == "coverage":
        cov = lebesgue_coverage(model.map, stream, cell.delta, budgets.coverage_N, budgets.coverage_M)
        if pred.leb_L == "1":
            verdict = "pass" if cov >= budgets.coverage_pass else "fail"
            return CellResult(cell, cov, 1.0, 1.0 - budgets.coverage_pass, verdict)
        # A finite union cannot exhibit measure zero: informational only.
        return CellResult(cell, cov, 0.0 if pred.leb_L == "0" else math.nan, math.nan, "info")
    if cell.proxy == "early_hit_growth":
        lo, hi = budgets.band_offsets
        rep = early_hit_growth(model, stream, curve, inv, inv + lo, inv + hi, budgets.window, tol)
        return CellResult(cell, rep.slope, rep.predicted, tol, "pass" if rep.passed else "fail")
    if cell.proxy == "unhit_growth":
        rep = unhit_growth(model, stream, curve, inv, budgets.window, budgets.max_steps, tol)
        if rep.partial and len(rep.n) < 4:
            return CellResult(cell, rep.slope, rep.predicted, tol, "partial")
        verdict = "pass" if rep.passed else "fail"
        return CellResult(cell, rep.slope, rep.predicted, tol, "partial" if rep.partial else verdict)
    if cell.proxy == "max_hit_exponent":
        _, asym = model.map.generation_constants()
        need = math.ceil(2 ** ((curve.alpha_plus + 0.2) * budgets.max_hit_n * asym))
        if need > budgets.max_steps:
            return CellResult(cell, math.nan, curve.alpha_plus + tol, tol, "partial")
        mh = max_hit_exponent(model, stream, curve, budgets.max_hit_n, need, tol)
        return CellResult(cell, mh.value, mh.bound, tol, "pass" if mh.passed else "fail")
    raise ValueError(f"unknown proxy {cell.proxy}")


def report_rows(curve: SpectrumCurve, results: Iterable[CellResult]) -> list[tuple[str, ...]]:
    rows = []
    for res in sorted(results, key=lambda r: (r.cell.delta, r.cell.seed, REPORT_ORDER.index(r.cell.proxy))):
        pred = predict(curve, res.cell.delta)
        region, dim_l, dim_f, leb = pred.csv_fields()
        rows.append((
            _fmt(pred.delta), _fmt(pred.inv_delta), region, dim_l, dim_f, leb,
            res.cell.proxy, str(res.cell.seed), _fmt(res.value), _fmt(res.predicted), _fmt(res.tolerance), res.verdict,
        ))
    return rows


def dimension_report(model: GibbsModel, curve: SpectrumCurve, deltas: Iterable[float], seeds: Iterable[int], budgets: Budgets = Budgets()) -> list[tuple[str, ...]]:
    """Serial report: one row per applicable ``(delta, seed, proxy)``."""
    cells = report_cells(curve, deltas, seeds)
    return report_rows(curve, [evaluate_cell(model, curve, c, budgets) for c in cells])

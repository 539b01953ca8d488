import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from orbitdim import models
from orbitdim.dimension_lab import (
    REPORT_HEADER,
    Budgets,
    PreconditionError,
    ReportCell,
    dimension_report,
    early_hit_growth,
    growth_slope,
    level_set_counts,
    level_set_growth,
    lebesgue_coverage,
    max_hit_exponent,
    predict,
    report_cells,
    unhit_growth,
)
from orbitdim.hitting import tau_cylinder_profile
from orbitdim.symbolic_orbit import enclosure_depth, explicit_stream, float_enclosures, sample_stream
from orbitdim.thermo import GibbsModel

LN2 = math.log(2)


def bernoulli_D(a, p=0.7):
    """Closed-form spectrum: solve alpha(q) = a by bisection, return eta + q a."""
    def alpha(q):
        u, v = p**q, (1 - p) ** q
        return (u * -math.log(p) + v * -math.log(1 - p)) / ((u + v) * LN2)

    lo, hi = -60.0, 60.0
    for _ in range(200):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if alpha(mid) > a else (lo, mid)
    q = (lo + hi) / 2
    return math.log2(p**q + (1 - p) ** q) + q * a


def brute_level_count(model, n, h_lo, h_hi):
    count = 0
    for c in model.map.scale_covering(n):
        mu = model.cylinder_measure(c.word)
        expo = math.log(mu) / math.log(c.length)
        count += h_lo <= expo <= h_hi
    return count


# -- predictions ------------------------------------------------------------


def test_bernoulli_regions(bernoulli_curve):
    regions = [predict(bernoulli_curve, 1 / x).region for x in (0.7, 1.0, 1.3, 1.5, 1.8)]
    assert regions == ["I", "II", "III", "III", "IV"]


def test_bernoulli_region_values(bernoulli_curve):
    c = bernoulli_curve
    p = predict(c, 1 / 0.7)
    assert (p.dim_L, p.dim_F, p.leb_L) == (pytest.approx(0.7), 1.0, "0")
    p = predict(c, 1 / 1.0)
    assert p.dim_L == pytest.approx(bernoulli_D(1.0), abs=1e-9) and p.dim_F == 1.0 and p.leb_L == "0"
    p = predict(c, 1 / 1.5)
    assert p.dim_L == 1.0 and p.leb_L == "1"
    assert p.dim_F == pytest.approx(bernoulli_D(1.5), abs=1e-9)
    p = predict(c, 1 / 1.8)
    assert p.dim_F is None and p.dim_L == 1.0 and p.leb_L == "1"
    assert p.csv_fields()[2] == "empty"


def test_boundaries_flagged(bernoulli_curve):
    c = bernoulli_curve
    p = predict(c, 1 / c.alpha_max)
    assert p.boundary == "alpha_max" and p.leb_L == "undetermined" and p.note == "open-in-paper"
    assert p.dim_L == pytest.approx(1.0)
    p = predict(c, 1 / c.alpha_plus)
    assert p.boundary == "alpha_plus" and p.note == "open-in-paper"
    p = predict(c, 1 / c.dim)
    assert p.boundary == "dim" and p.dim_L == pytest.approx(c.dim)
    with pytest.raises(ValueError):
        predict(c, 0.0)


def test_lebesgue_predictions(lebesgue_curve):
    for inv in np.linspace(0.1, 3.0, 30):
        p = predict(lebesgue_curve, 1 / inv)
        assert p.dim_L == pytest.approx(min(1.0, inv), abs=1e-12)
        assert p.region == ("I" if inv <= 1 else "IV")
    assert predict(lebesgue_curve, 1.0).leb_L == "undetermined"


def test_dim_L_continuous_across_boundaries(bernoulli_curve):
    c = bernoulli_curve
    for b in (c.dim, c.alpha_max):
        left = predict(c, 1 / (b - 1e-6)).dim_L
        right = predict(c, 1 / (b + 1e-6)).dim_L
        assert left == pytest.approx(right, abs=1e-4)
    grid = np.linspace(0.3, 2.2, 40)
    vals = np.array([predict(c, 1 / x).dim_L for x in grid])
    assert np.all(np.abs(np.diff(vals)) < 0.1)
    assert np.all(np.diff(vals) >= -1e-9)  # dim L grows with 1/delta


# -- level sets -----------------------------------------------------------


def test_level_set_848(bernoulli_model):
    # mu(C) <= |C| for a dyadic word with z zeros: 0.7^z 0.3^(10-z) <= 2^-10.
    oracle = sum(1 for w in itertools.product((0, 1), repeat=10) if 0.7 ** w.count(0) * 0.3 ** w.count(1) <= 2**-10)
    assert oracle == 848
    assert level_set_counts(bernoulli_model, 10, 1.0) == 848


@pytest.mark.parametrize("name", list(models.shipped_models()))
@pytest.mark.parametrize("n", [6, 9])
def test_level_set_bands_partition_covering(name, n):
    m, pot = models.shipped_models()[name]
    model = GibbsModel(m, pot)
    cuts = [1e-3, 0.6, 0.9, 1.0 - 1e-9, 1.0 + 1e-9, 1.2, 1.5, 2.0, 50.0]
    # Bands share closed endpoints, so split them with open gaps nothing lands in.
    total = 0
    for lo, hi in zip(cuts, cuts[1:]):
        total += level_set_counts(model, n, lo, hi - 1e-12)
    assert total == len(m.scale_covering(n))


@given(
    st.sampled_from(["markov3", "markov3_depth2", "mixed_bernoulli", "bernoulli_07"]),
    st.integers(4, 9),
    st.floats(0.3, 1.6),
    st.floats(0.01, 1.0),
)
def test_level_set_counts_match_brute_force(name, n, h_lo, width):
    m, pot = models.shipped_models()[name]
    model = GibbsModel(m, pot)
    assert level_set_counts(model, n, h_lo, h_lo + width) == brute_level_count(model, n, h_lo, h_lo + width)


def test_lebesgue_level_sets_empty_off_one(lebesgue_model):
    assert level_set_counts(lebesgue_model, 12, 1.05, 3.0) == 0
    assert level_set_counts(lebesgue_model, 12, 0.2, 0.95) == 0
    assert level_set_counts(lebesgue_model, 12, 0.95, 1.05) == 2**12


def test_level_set_growth_report(bernoulli_model, bernoulli_curve):
    rep = level_set_growth(bernoulli_model, 1.35, 1.45, (8, 12), bernoulli_curve.D_at(1.4))
    assert rep.n == (8, 9, 10, 11, 12)
    assert all(c <= t for c, t in zip(rep.counts, rep.totals))


# -- growth regressions -----------------------------------------------------


def test_growth_slope_exact_line():
    n = [8, 9, 10, 11, 12]
    slope, res = growth_slope(n, [2 ** (0.5 * k + 3) for k in n])
    assert slope == pytest.approx(0.5) and res == pytest.approx(0, abs=1e-12)
    assert growth_slope(n, [5, 3, 0, 0, 1])[0] == -math.inf


def test_window_too_short(bernoulli_model, bernoulli_curve):
    s = sample_stream(bernoulli_model, 0)
    with pytest.raises(ValueError, match="at least 4"):
        unhit_growth(bernoulli_model, s, bernoulli_curve, 1.4, (8, 10))


def test_growth_preconditions(bernoulli_model, bernoulli_curve):
    s = sample_stream(bernoulli_model, 0)
    with pytest.raises(PreconditionError):
        unhit_growth(bernoulli_model, s, bernoulli_curve, 1.0, (8, 11))
    with pytest.raises(PreconditionError):
        early_hit_growth(bernoulli_model, s, bernoulli_curve, 1.2, 1.3, 1.5, (8, 11))


def test_unhit_growth_budget_censors(bernoulli_model, bernoulli_curve):
    s = sample_stream(bernoulli_model, 0)
    rep = unhit_growth(bernoulli_model, s, bernoulli_curve, 1.4, (8, 14), budget=2**16)
    assert rep.partial and rep.censored == (12, 13, 14)
    assert rep.n == (8, 9, 10, 11)


def test_unhit_counts_non_increasing_in_horizon(bernoulli_model):
    m = bernoulli_model.map
    s = sample_stream(bernoulli_model, 2)
    cov = m.scale_covering(11)
    unhit = [int((tau_cylinder_profile(m, s, cov, N).tau < 0).sum()) for N in (2**12, 2**14, 2**16, 2**18)]
    assert unhit == sorted(unhit, reverse=True)


def test_early_hit_counts_non_decreasing_in_horizon(bernoulli_model, bernoulli_curve):
    s = sample_stream(bernoulli_model, 2)
    reps = [
        early_hit_growth(bernoulli_model, s, bernoulli_curve, 1.0, 0.9, 1.5, (8, 11), horizon_scale=h)
        for h in (0.0, 0.5, 1.0, 2.0)
    ]
    for a, b in zip(reps, reps[1:]):
        assert all(x <= y for x, y in zip(a.counts, b.counts))
    assert all(c <= 1 for c in reps[0].counts)  # step 0 only hits the cylinder of x


def test_early_hit_big_hitting_regime(bernoulli_model, bernoulli_curve):
    s = sample_stream(bernoulli_model, 0)
    # A doubled horizon absorbs the finite-size shortfall at n = 12 (0.949 at scale 1).
    rep = early_hit_growth(bernoulli_model, s, bernoulli_curve, 1.1, 0.5, 0.8, (9, 12), horizon_scale=2.0)
    assert rep.mode == "fraction"
    assert rep.fractions[-1] >= 0.99 and rep.passed


# -- coverage ---------------------------------------------------------------


def test_coverage_small_delta_is_full(bernoulli_model):
    s = sample_stream(bernoulli_model, 0)
    assert lebesgue_coverage(bernoulli_model.map, s, 1e-3, 10, 200) == pytest.approx(1.0)


def test_coverage_monotonicity(bernoulli_model):
    m = bernoulli_model.map
    s = sample_stream(bernoulli_model, 1)
    cov = lambda d, N, M: lebesgue_coverage(m, s, d, N, M)
    assert cov(1 / 1.2, 100, 10**4) <= cov(1 / 1.2, 100, 10**5) + 1e-15
    assert cov(1 / 1.2, 1000, 10**5) <= cov(1 / 1.2, 100, 10**5) + 1e-15
    vals = [cov(1 / x, 100, 10**5) for x in (0.8, 1.0, 1.3, 1.6)]
    assert vals == sorted(vals)
    with pytest.raises(ValueError):
        cov(1.0, 10, 10)


def test_box_counting_sees_full_dimension_in_region_one(bernoulli_model, bernoulli_curve):
    # The orbit is dense, so boxes meeting the truncated union fill [0, 1] at every
    # scale and box counting reports dimension 1 where the Hausdorff prediction is 0.7.
    m = bernoulli_model.map
    s = sample_stream(bernoulli_model, 3)
    M = 10**6
    depth = enclosure_depth(m, 1e-9)
    lo, hi = float_enclosures(m, s.symbols(0, M + depth), M, depth)
    centres = (lo + hi) / 2
    slopes = []
    for k in range(6, 13):
        boxes = np.unique(np.floor(centres * 2**k).astype(np.int64))
        slopes.append(math.log2(len(boxes)) / k)
    assert min(slopes) >= 0.99
    assert predict(bernoulli_curve, 1 / 0.7).dim_L == pytest.approx(0.7)


# -- maximal hitting exponent ---------------------------------------------------


def test_max_hit_periodic_stream_fails(bernoulli_model, bernoulli_curve):
    x = explicit_stream(bernoulli_model.map, period="01")
    mh = max_hit_exponent(bernoulli_model, x, bernoulli_curve, 8, 2**16)
    assert mh.unhit > 0 and not mh.passed and math.isinf(mh.value)


def test_max_hit_budget_precondition(bernoulli_model, bernoulli_curve):
    s = sample_stream(bernoulli_model, 0)
    with pytest.raises(PreconditionError):
        max_hit_exponent(bernoulli_model, s, bernoulli_curve, 12, 2**20)


def test_max_hit_extremal_term_vanishes_for_bernoulli(bernoulli_model, bernoulli_curve):
    mh = max_hit_exponent(bernoulli_model, sample_stream(bernoulli_model, 0), bernoulli_curve, 8, 2**16)
    assert mh.extremal == 1
    assert mh.bound == pytest.approx(bernoulli_curve.alpha_plus + 0.1)
    assert mh.unhit == 0 and math.isfinite(mh.value)


# -- report layout ----------------------------------------------------------------


def test_report_cells_by_region(bernoulli_curve):
    cells = report_cells(bernoulli_curve, [1 / x for x in (0.7, 1.0, 1.5, 1.8)], [0])
    by_delta = {}
    for c in cells:
        by_delta.setdefault(round(1 / c.delta, 6), []).append(c.proxy)
    assert by_delta[0.7] == ["coverage"]
    assert by_delta[1.0] == ["coverage", "early_hit_growth"]
    assert by_delta[1.5] == ["coverage", "unhit_growth"]
    assert by_delta[1.8] == ["coverage", "unhit_growth", "max_hit_exponent"]
    boundary = report_cells(bernoulli_curve, [1 / bernoulli_curve.alpha_max], [0, 1])
    assert [c.proxy for c in boundary] == ["coverage", "coverage"]
    assert report_cells(bernoulli_curve, [], [0, 1]) == []


def test_dimension_report_rows(lebesgue_model, lebesgue_curve):
    budgets = Budgets(coverage_N=10, coverage_M=2000, window=(8, 11), max_hit_n=8, max_steps=2**18)
    rows = dimension_report(lebesgue_model, lebesgue_curve, [2.0, 1 / 1.5], [0], budgets)
    assert len(REPORT_HEADER) == 12
    assert all(len(r) == 12 for r in rows)
    assert [r[6] for r in rows] == ["coverage", "unhit_growth", "max_hit_exponent", "coverage"]
    assert rows[0][2] == "IV" and rows[-1][2] == "I"
    assert rows[-1][3] == repr(0.5)
    assert dimension_report(lebesgue_model, lebesgue_curve, [], [0], budgets) == []
    assert ReportCell(0.5, 0, "coverage").key == (0.5, 0, "coverage")

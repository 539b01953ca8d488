import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from orbitdim import models
from orbitdim.symbolic_orbit import (
    StreamExhausted,
    cylinder_of_prefix,
    enclosure_depth,
    explicit_stream,
    float_enclosures,
    reconstruct,
    sample_stream,
    shift,
)
from orbitdim.thermo import GibbsModel

F = Fraction


def binary_value(pre: str, per: str) -> Fraction:
    """0.pre(per)(per)... in base 2, by the geometric series."""
    j, k = len(pre), len(per)
    head = int(pre, 2) if pre else 0
    return F(head * (2**k - 1) + int(per, 2), 2**j * (2**k - 1))


# -- sampled streams -------------------------------------------------------


@pytest.mark.parametrize("seed", range(5))
def test_bernoulli_symbol_frequency(bernoulli_model, seed):
    s = sample_stream(bernoulli_model, seed).symbols(0, 10**6)
    assert abs(np.mean(s == 0) - 0.7) <= 3 * math.sqrt(0.21 / 10**6)


def test_reproducible_and_chunk_invariant(bernoulli_model):
    a = sample_stream(bernoulli_model, 11).symbols(0, 10**7)
    b = sample_stream(bernoulli_model, 11)
    pieces = [b.symbols(0, 17), b.symbols(17, 5000), b.symbols(5000, 10**7)]
    assert np.array_equal(a, np.concatenate(pieces))
    c = sample_stream(bernoulli_model, 12).symbols(0, 1000)
    assert not np.array_equal(a[:1000], c)


def test_sampled_symbols_are_immutable(bernoulli_model):
    s = sample_stream(bernoulli_model, 3)
    head = s.symbols(0, 100).copy()
    s.symbols(0, 10**6)
    assert np.array_equal(s.symbols(0, 100), head)


def test_sampled_stream_is_admissible(markov3_model):
    A = markov3_model.map.A
    s = sample_stream(markov3_model, 5).symbols(0, 10**5)
    assert A[s[:-1], s[1:]].all()


def test_k_word_stationarity():
    model = GibbsModel(*models.markov3_depth2())
    n = 10**6
    s = sample_stream(model, 2).symbols(0, n + 1).astype(np.int64)
    codes = s[:-1] * 3 + s[1:]
    batches = codes.reshape(100, -1)
    for w in model.graph.states:
        hits = batches == (w[0] * 3 + w[1])
        per_batch = hits.mean(axis=1)
        se = per_batch.std(ddof=1) / math.sqrt(len(per_batch))  # batch means absorb chain correlation
        expect = model.cylinder_measure(w)
        assert abs(hits.mean() - expect) <= 4 * se + 1e-12


# -- explicit streams and shifts -------------------------------------------


def test_explicit_periodic_symbols():
    d = models.doubling()
    assert explicit_stream(d, period="01").prefix(6) == (0, 1, 0, 1, 0, 1)
    assert explicit_stream(d, "1", "0").prefix(5) == (1, 0, 0, 0, 0)
    assert shift(explicit_stream(d, period="01"), 1).prefix(4) == (1, 0, 1, 0)
    s = explicit_stream(d, period="01")
    assert shift(s, 0).prefix(10) == s.prefix(10)


def test_explicit_stream_rejects_inadmissible():
    with pytest.raises(ValueError):
        explicit_stream(models.markov3(), period="02")
    with pytest.raises(ValueError):
        explicit_stream(models.markov3(), "1", "20")  # wrap 0 -> 2 is forbidden


def test_finite_explicit_stream_exhausts():
    s = explicit_stream(models.doubling(), "0110")
    assert s.length == 4
    with pytest.raises(StreamExhausted):
        reconstruct(models.doubling(), s, 0, F(1, 1000))


def test_exact_points_of_periodic_streams():
    d = models.doubling()
    s = explicit_stream(d, period="01")
    assert s.exact_point(d) == F(1, 3)
    assert s.shift(1).exact_point(d) == F(2, 3)
    assert explicit_stream(d, "1", "0").exact_point(d) == F(1, 2)


@given(st.text("01", max_size=6), st.text("01", min_size=1, max_size=6), st.integers(0, 20))
def test_exact_point_matches_binary_expansion(pre, per, p):
    d = models.doubling()
    s = explicit_stream(d, pre, per)
    x = binary_value(pre, per)
    y = x
    for _ in range(p):
        y = d.apply(y) if y < 1 else F(0)
    # (1)* codes the left limit 1; the map then sends it to 1 again.
    if per.strip("1") == "" and p >= len(pre):
        assert s.shift(p).exact_point(d) == 1
    else:
        assert s.shift(p).exact_point(d) == y


# -- reconstruction ---------------------------------------------------------


def test_reconstruct_examples():
    d = models.doubling()
    s = explicit_stream(d, period="01")
    enc = reconstruct(d, s, 0, F(1, 1000))
    assert enc.contains(F(1, 3)) and enc.width <= F(1, 1000)
    assert (enc.lo, enc.hi) == (F(341, 1024), F(171, 512))
    assert reconstruct(d, s, 1, F(1, 1000)).contains(F(2, 3))
    zero = reconstruct(d, explicit_stream(d, period="0"), 0, F(1, 100))
    assert zero.lo == 0 and zero.width <= F(1, 100)
    one = reconstruct(d, s, 0, 1)
    assert len(one.word) == 1 and (one.lo, one.hi) == (0, F(1, 2))
    with pytest.raises(ValueError):
        reconstruct(d, s, 0, 0)


def test_reconstruct_equals_prefix_cylinder(bernoulli_model):
    m = bernoulli_model.map
    s = sample_stream(bernoulli_model, 4)
    for p in (0, 7, 1000):
        enc = reconstruct(m, s, p, F(1, 10**5))
        c = cylinder_of_prefix(m, s.shift(p), len(enc.word))
        assert (enc.lo, enc.hi) == (c.lo, c.hi)
        assert enc.width <= F(1, 10**5)
        assert 2 * enc.width > F(1, 10**5)  # shortest such prefix


@pytest.mark.parametrize(
    "m, pre, per",
    [(models.doubling(), "1101", "011"), (models.mixed_slopes(), "01", "0011101")],
    ids=["doubling", "mixed_slopes"],
)
def test_conjugacy_with_exact_iteration(m, pre, per):
    s = explicit_stream(m, pre, per)
    y = s.exact_point(m)
    if m.name == "doubling":
        assert y == binary_value(pre, per)
    eps = F(1, 10**6)
    for p in range(10**4):
        enc = reconstruct(m, s, p, eps)
        assert enc.contains(y), p
        y = m.apply(y)


# -- float enclosures --------------------------------------------------------


@pytest.mark.parametrize("name", ["bernoulli_07", "markov3", "mixed_bernoulli"])
def test_float_enclosures_contain_exact_cylinders(name):
    m, pot = models.shipped_models()[name]
    s = sample_stream(GibbsModel(m, pot), 9)
    depth = enclosure_depth(m, 1e-6)
    lo, hi = float_enclosures(m, s.symbols(0, 200 + depth), 200, depth)
    assert np.all(hi - lo <= 1e-6 + 3e-13)
    for i in range(0, 200, 13):
        c = m.cylinder(tuple(int(v) for v in s.symbols(i, i + depth)))
        assert lo[i] <= float(c.lo) and float(c.hi) <= hi[i]

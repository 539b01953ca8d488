import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from orbitdim import models
from orbitdim.markov_map import (
    Branch,
    InvalidMapError,
    MarkovMap,
    MarkovMapError,
    mixing_horizon,
    validate,
)

F = Fraction
TEST_MAPS = [models.doubling(), models.markov3(), models.mixed_slopes()]


def all_words(m, n_max):
    for n in range(1, n_max + 1):
        yield from m.words(n)


# -- validation -----------------------------------------------------------


def test_doubling_is_valid_full_shift():
    rep = validate(models.doubling())
    assert rep.ok
    assert rep.rho == 2
    assert rep.R == 1
    assert models.doubling().A.all()
    assert set(rep.axioms) == {"1_expanding", "2_monotone_affine", "3_markov", "4_mixing", "5_bounded_distortion"}


def test_slope_one_branch_is_not_expanding():
    m = MarkovMap(["0", "1/2", "1"], [Branch(1, (0, 0)), Branch(1, (0, 1))])
    with pytest.raises(InvalidMapError, match="not expanding"):
        validate(m)
    rep = validate(m, strict=False)
    assert not rep.axioms["1_expanding"][0]


def test_mixing_horizon_by_matrix_powers():
    # A + A^2 is already positive for this matrix; computed independently below.
    A = np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]], dtype=bool)
    Ai = A.astype(int)
    assert (Ai + Ai @ Ai > 0).all() and not (Ai > 0).all()
    assert mixing_horizon(A) == 2


def test_non_mixing_map_fails_validation():
    m = MarkovMap(["0", "1/2", "1"], [Branch(1, (0, 0)), Branch(1, (1, 1))])
    rep = validate(m, strict=False)
    assert rep.R is None and not rep.axioms["4_mixing"][0]


def test_markov3_constants():
    rep = validate(models.markov3())
    assert rep.ok and rep.R == 2
    assert rep.L >= 1


@pytest.mark.parametrize(
    "ends",
    [["0", "1/2", "1/2", "1"], ["0", "2/3", "1/3", "1"], ["1/4", "1/2", "1"], ["0", "1/2", "2"]],
)
def test_malformed_endpoints_rejected(ends):
    with pytest.raises(MarkovMapError):
        MarkovMap(ends, [Branch(1, (0, len(ends) - 2))] * (len(ends) - 1))


def test_float_endpoints_rejected():
    with pytest.raises(MarkovMapError):
        MarkovMap([0, 0.5, 1], [Branch(1, (0, 1))] * 2)


def test_image_not_cell_aligned_rejected():
    with pytest.raises(MarkovMapError, match="not cell-aligned"):
        MarkovMap.from_images(["0", "1/2", "1"], [1, 1], [("0", "3/4"), ("0", "1")])


# -- apply / derivative ---------------------------------------------------


def test_apply_doubling():
    d = models.doubling()
    assert d.apply(F(1, 3)) == F(2, 3)
    assert d.apply(F(2, 3)) == F(1, 3)
    assert d.derivative(F(1, 3)) == 2


def test_apply_left_endpoint_follows_orientation():
    m = models.markov3()
    for k in range(m.Q):
        lo, hi = m.image_bounds(k)
        expect = lo if m.branches[k].orientation > 0 else hi
        assert m.apply(m.endpoints[k]) == expect
    assert m.derivative(F(5, 6)) == -3


def test_apply_outside_domain():
    with pytest.raises(MarkovMapError):
        models.doubling().apply(F(1))
    with pytest.raises(MarkovMapError):
        models.doubling().apply(F(-1, 3))


# -- cylinders ------------------------------------------------------------


def test_dyadic_cylinders():
    d = models.doubling()
    c = d.cylinder((1, 0))
    assert (c.lo, c.hi) == (F(1, 2), F(3, 4))
    c = d.cylinder((0, 1, 1))
    assert (c.lo, c.hi) == (F(3, 8), F(1, 2))


def test_forbidden_word_gives_empty_cylinder():
    m = models.markov3()
    assert not m.A[0, 2]
    assert m.cylinder((1, 0, 2)).empty
    assert m.cylinder((2, 0, 2)).length == 0


def test_locate_binary_expansion():
    d = models.doubling()
    c = d.locate(F(1, 3), 2)
    assert c.word == (0, 1) and (c.lo, c.hi) == (F(1, 4), F(1, 2))
    assert d.locate(F(0), 7).word == (0,) * 7
    assert d.locate(F(2, 3), 3).word == (1, 0, 1)


@pytest.mark.parametrize("m", TEST_MAPS, ids=lambda m: m.name)
def test_cylinder_nesting_and_distortion(m):
    L = m.distortion_constant()
    for w in all_words(m, 12 if m.Q == 2 else 9):
        c = m.cylinder(w)
        if len(w) == 1:
            assert 1 <= 1 / c.length <= L
            continue
        parent = m.cylinder(w[:-1])
        assert parent.lo <= c.lo and c.hi <= parent.hi
        assert 1 <= parent.length / c.length <= L


@pytest.mark.parametrize("m", TEST_MAPS, ids=lambda m: m.name)
def test_shift_compatibility(m):
    for w in all_words(m, 8):
        if len(w) < 2:
            continue
        c, tail = m.cylinder(w), m.cylinder(w[1:])
        a, b = m.apply(c.lo), m.apply(c.lo + c.length / 2)
        # The affine branch maps the cylinder onto the tail cylinder.
        img = sorted((a, a + 2 * (b - a)))
        assert tuple(img) == (tail.lo, tail.hi)


@pytest.mark.parametrize("m", TEST_MAPS, ids=lambda m: m.name)
@pytest.mark.parametrize("n", [0, 1, 4, 9])
def test_scale_covering_tiles_and_bounds(m, n):
    cov = m.scale_covering(n)
    rep = validate(m)
    assert sum(c.length for c in cov) == 1
    assert cov.members[0].lo == 0 and cov.members[-1].hi == 1
    for a, b in zip(cov.members, cov.members[1:]):
        assert a.hi == b.lo
    r = F(1, 2**n)
    for c in cov:
        assert r / rep.L <= c.length <= r
    if n >= 1:
        g_lo, g_hi = cov.generations()
        assert n / rep.L_prime <= g_lo and g_hi <= rep.L_prime * n


def test_doubling_covering_is_dyadic():
    cov = models.doubling().scale_covering(4)
    assert len(cov) == 16
    assert all(c.generation == 4 for c in cov)


def test_mixed_slopes_covering_has_mixed_generations():
    g_lo, g_hi = models.mixed_slopes().scale_covering(8).generations()
    assert g_lo < g_hi


@given(st.lists(st.integers(0, 1), min_size=1, max_size=30))
def test_locate_inverts_cylinder(word):
    d = models.doubling()
    c = d.cylinder(word)
    mid = (c.lo + c.hi) / 2
    assert d.locate(mid, len(word)).word == tuple(word)


@given(st.fractions(min_value=0, max_value=1).filter(lambda x: x < 1), st.integers(1, 20))
def test_locate_contains_point_markov3(x, n):
    m = models.markov3()
    c = m.locate(x, n)
    assert c.contains(x)
    assert m.admissible(c.word)


@given(st.fractions(min_value=0, max_value=1).filter(lambda x: x < 1), st.integers(1, 20))
def test_itinerary_matches_iteration_doubling(x, n):
    d = models.doubling()
    y = x
    for s in d.locate(x, n).word:
        assert d.cell_of(y) == s
        y = d.apply(y)


def test_generation_constant_asymptotic():
    _, asym = models.mixed_slopes().generation_constants()
    assert asym == pytest.approx(max(1.0, math.log(2) / math.log(1.5), math.log(3) / math.log(2)))

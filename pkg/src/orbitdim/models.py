"""Example maps and potentials shipped with the package."""

from __future__ import annotations

from fractions import Fraction

from .markov_map import Branch, MarkovMap
from .thermo import LogRational, Potential, geometric_potential, normalize


def doubling() -> MarkovMap:
    return MarkovMap(["0", "1/2", "1"], [Branch(1, (0, 1)), Branch(1, (0, 1))], name="doubling")


def markov3() -> MarkovMap:
    """Three equal cells; ``0 -> {0,1}``, ``1 -> {1,2}`` and a decreasing full branch on cell 2."""
    return MarkovMap(
        ["0", "1/3", "2/3", "1"],
        [Branch(1, (0, 1)), Branch(1, (1, 2)), Branch(-1, (0, 2))],
        name="markov3",
    )


def mixed_slopes() -> MarkovMap:
    """Two full branches with slopes 3 and 3/2."""
    return MarkovMap(["0", "1/3", "1"], [Branch(1, (0, 1)), Branch(1, (0, 1))], name="mixed_slopes")


def lebesgue(m: MarkovMap) -> Potential:
    """``-log|T'|``, normalized; its Gibbs measure is equivalent to Lebesgue."""
    return normalize(m, geometric_potential(m))


def bernoulli(p: Fraction | str = Fraction(7, 10)) -> tuple[MarkovMap, Potential]:
    p = Fraction(p)
    m = doubling()
    pot = Potential(
        1,
        {(0,): float(LogRational(p)), (1,): float(LogRational(1 - p))},
        normalized=True,
        labels={(0,): str(LogRational(p)), (1,): str(LogRational(1 - p))},
    )
    return m, pot


def markov3_potential(m: MarkovMap | None = None) -> tuple[MarkovMap, Potential]:
    m = m or markov3()
    pot = Potential(1, {(0,): float(LogRational(Fraction(1, 2))), (1,): float(LogRational(Fraction(1, 5))), (2,): float(LogRational(Fraction(1, 3)))})
    return m, normalize(m, pot)


def markov3_depth2(m: MarkovMap | None = None) -> tuple[MarkovMap, Potential]:
    """A genuinely depth-2 potential on the three-cell map."""
    m = m or markov3()
    raw = {w: -0.3 * (1 + w[0]) - 0.45 * w[1] + (0.2 if w[0] == w[1] else 0.0) for w in m.words(2)}
    return m, normalize(m, Potential(2, raw))


def mixed_bernoulli() -> tuple[MarkovMap, Potential]:
    m = mixed_slopes()
    return m, Potential(1, {(0,): float(LogRational(Fraction(1, 4))), (1,): float(LogRational(Fraction(3, 4)))}, True)


def shipped_models() -> dict[str, tuple[MarkovMap, Potential]]:
    """Every example model, keyed by name; all potentials normalized."""
    d = doubling()
    ms = mixed_slopes()
    return {
        "doubling_lebesgue": (d, lebesgue(d)),
        "bernoulli_07": bernoulli(),
        "markov3": markov3_potential(),
        "markov3_depth2": markov3_depth2(),
        "mixed_lebesgue": (ms, lebesgue(ms)),
        "mixed_bernoulli": mixed_bernoulli(),
    }

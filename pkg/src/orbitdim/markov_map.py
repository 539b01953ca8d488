"""Piecewise-linear expanding Markov maps of the unit interval.

All geometry is exact: partition endpoints, slopes and cylinder intervals are
:class:`fractions.Fraction` values. Cells are half-open ``[a_k, a_{k+1})``;
a partition endpoint belongs to the cell on its right.

A cylinder ``I_w`` for a word ``w = (i_1, ..., i_n)`` is obtained by pulling
the cell ``I(i_n)`` back through the inverse branches of ``i_{n-1}, ..., i_1``.
Points are located by descending the cylinder tree, so the coding of a point
always agrees with the cylinder intervals (for decreasing branches this can
differ from iterating :meth:`MarkovMap.apply` on the countable set of
partition preimages).
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

Word = tuple[int, ...]


class MarkovMapError(ValueError):
    """Raised for malformed or non-Markov map descriptions."""


class InvalidMapError(MarkovMapError):
    """Raised by :func:`validate` when an axiom fails; carries the report."""

    def __init__(self, message: str, report: "ValidationReport"):
        super().__init__(message)
        self.report = report


def as_fraction(value) -> Fraction:
    """Exact conversion of ints, Fractions and ``"p/q"`` strings.

    Floats are rejected: a float literal in a map description is almost
    always a rounding of the intended rational.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise MarkovMapError(f"not a rational: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise MarkovMapError(f"malformed rational {value!r}") from exc
    raise MarkovMapError(f"not a rational: {value!r} (use a 'p/q' string)")


@dataclass(frozen=True)
class Branch:
    orientation: int
    image: tuple[int, int]  # first and last partition cell of T(I(k)), inclusive


@dataclass(frozen=True)
class Cylinder:
    word: Word
    lo: Fraction
    hi: Fraction

    @property
    def generation(self) -> int:
        return len(self.word)

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo

    @property
    def empty(self) -> bool:
        return self.hi <= self.lo

    def contains(self, x) -> bool:
        return self.lo <= x < self.hi


@dataclass(frozen=True)
class Covering:
    n: int
    members: tuple[Cylinder, ...]

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[Cylinder]:
        return iter(self.members)

    @property
    def words(self) -> list[Word]:
        return [c.word for c in self.members]

    def generations(self) -> tuple[int, int]:
        gens = [c.generation for c in self.members]
        return min(gens), max(gens)


@dataclass
class ValidationReport:
    axioms: dict[str, tuple[bool, str]] = field(default_factory=dict)
    rho: Fraction | None = None
    L: Fraction | None = None
    L_prime: float | None = None
    L_prime_asymptotic: float | None = None
    R: int | None = None

    @property
    def ok(self) -> bool:
        return all(passed for passed, _ in self.axioms.values())

    def failures(self) -> list[str]:
        return [f"{name}: {msg}" for name, (passed, msg) in self.axioms.items() if not passed]

    def rows(self) -> list[tuple[str, str, str]]:
        out = [(name, "pass" if passed else "fail", msg) for name, (passed, msg) in self.axioms.items()]
        out += [
            ("rho", "value", str(self.rho)),
            ("L", "value", str(self.L)),
            ("L_prime", "value", repr(self.L_prime)),
            ("L_prime_asymptotic", "value", repr(self.L_prime_asymptotic)),
            ("R", "value", str(self.R)),
        ]
        return out


# An affine map x -> offset + scale * y, kept exact.
_Affine = tuple[Fraction, Fraction]
_IDENTITY: _Affine = (Fraction(0), Fraction(1))


def _compose(outer: _Affine, inner: _Affine) -> _Affine:
    a, b = outer
    c, d = inner
    return (a + b * c, b * d)


def _image_interval(f: _Affine, lo: Fraction, hi: Fraction) -> tuple[Fraction, Fraction]:
    a, b = f
    u, v = a + b * lo, a + b * hi
    return (u, v) if u <= v else (v, u)


class MarkovMap:
    """Expanding Markov map with affine branches and exact rational data.

    ``endpoints`` are ``a_0 = 0 < a_1 < ... < a_Q = 1``; ``branches[k]`` gives
    the orientation of the branch on ``I(k)`` and the run of cells
    ``[first, last]`` forming ``T(I(k))``.
    """

    def __init__(self, endpoints: Sequence, branches: Sequence[Branch | tuple], name: str = "map"):
        self.name = name
        self.endpoints: tuple[Fraction, ...] = tuple(as_fraction(e) for e in endpoints)
        Q = len(self.endpoints) - 1
        if Q < 1:
            raise MarkovMapError("need at least two endpoints")
        if self.endpoints[0] != 0 or self.endpoints[-1] != 1:
            raise MarkovMapError("endpoints must start at 0 and end at 1")
        for i in range(Q):
            if not self.endpoints[i] < self.endpoints[i + 1]:
                raise MarkovMapError(f"endpoints not strictly increasing at index {i + 1}")
        if len(branches) != Q:
            raise MarkovMapError(f"expected {Q} branches, got {len(branches)}")
        parsed = []
        for k, br in enumerate(branches):
            if not isinstance(br, Branch):
                orient, image = br
                br = Branch(int(orient), (int(image[0]), int(image[1])))
            if br.orientation not in (1, -1):
                raise MarkovMapError(f"branch {k}: orientation must be +1 or -1")
            first, last = br.image
            if not (0 <= first <= last < Q):
                raise MarkovMapError(f"branch {k}: image cells {br.image} not a run inside 0..{Q - 1}")
            parsed.append(br)
        self.branches: tuple[Branch, ...] = tuple(parsed)
        self.Q = Q

        self.slopes: tuple[Fraction, ...] = tuple(
            (self.endpoints[b.image[1] + 1] - self.endpoints[b.image[0]]) / self.cell_length(k)
            for k, b in enumerate(self.branches)
        )
        A = np.zeros((Q, Q), dtype=bool)
        for k, b in enumerate(self.branches):
            A[k, b.image[0] : b.image[1] + 1] = True
        A.setflags(write=False)
        self.A = A
        self._inverse = tuple(self._inverse_branch(k) for k in range(Q))

    @classmethod
    def from_images(cls, endpoints: Sequence, orientations: Sequence[int], images: Sequence[tuple], name: str = "map"):
        """Build from rational image intervals ``T(I(k)) = [lo, hi]``.

        Each image must start and end on partition endpoints; otherwise the
        Markov property fails and :class:`MarkovMapError` is raised.
        """
        ends = [as_fraction(e) for e in endpoints]
        branches = []
        for k, (orient, (lo, hi)) in enumerate(zip(orientations, images)):
            lo, hi = as_fraction(lo), as_fraction(hi)
            if lo not in ends or hi not in ends or not lo < hi:
                raise MarkovMapError(f"branch {k}: image [{lo}, {hi}] is not cell-aligned")
            branches.append(Branch(int(orient), (ends.index(lo), ends.index(hi) - 1)))
        return cls(ends, branches, name=name)

    def __repr__(self) -> str:
        return f"MarkovMap({self.name!r}, Q={self.Q})"

    # -- geometry of single branches -------------------------------------

    def cell_length(self, k: int) -> Fraction:
        return self.endpoints[k + 1] - self.endpoints[k]

    def image_bounds(self, k: int) -> tuple[Fraction, Fraction]:
        first, last = self.branches[k].image
        return self.endpoints[first], self.endpoints[last + 1]

    def _inverse_branch(self, k: int) -> _Affine:
        c_lo, c_hi = self.image_bounds(k)
        s = self.slopes[k]
        a = self.endpoints[k]
        if self.branches[k].orientation > 0:
            return (a - c_lo / s, 1 / s)
        return (a + c_hi / s, -1 / s)

    def cell_of(self, x) -> int:
        x = as_fraction(x) if not isinstance(x, Fraction) else x
        if not 0 <= x < 1:
            raise MarkovMapError(f"x={x} outside [0, 1)")
        return bisect.bisect_right(self.endpoints, x) - 1

    def apply(self, x) -> Fraction:
        """Exact image ``T(x)`` for ``x`` in ``[0, 1)``."""
        x = as_fraction(x)
        k = self.cell_of(x)
        c_lo, c_hi = self.image_bounds(k)
        dx = x - self.endpoints[k]
        if self.branches[k].orientation > 0:
            return c_lo + self.slopes[k] * dx
        return c_hi - self.slopes[k] * dx

    def derivative(self, x) -> Fraction:
        k = self.cell_of(as_fraction(x))
        return self.branches[k].orientation * self.slopes[k]

    def admissible(self, word: Sequence[int]) -> bool:
        if not word:
            return False
        if any(not 0 <= s < self.Q for s in word):
            return False
        return all(self.A[a, b] for a, b in zip(word, word[1:]))

    # -- cylinders --------------------------------------------------------

    def _pullback(self, word: Word) -> _Affine:
        f = _IDENTITY
        for s in word:
            f = _compose(f, self._inverse[s])
        return f

    def cylinder(self, word: Sequence[int]) -> Cylinder:
        """Exact cylinder ``I_w``; inadmissible words give an empty cylinder."""
        word = tuple(int(s) for s in word)
        if not word:
            raise MarkovMapError("cylinder of the empty word")
        if not self.admissible(word):
            return Cylinder(word, Fraction(0), Fraction(0))
        f = self._pullback(word[:-1])
        last = word[-1]
        lo, hi = _image_interval(f, self.endpoints[last], self.endpoints[last + 1])
        return Cylinder(word, lo, hi)

    def children(self, cyl: Cylinder) -> list[Cylinder]:
        f = self._pullback(cyl.word)
        out = []
        for j in self.successors(cyl.word[-1]):
            lo, hi = _image_interval(f, self.endpoints[j], self.endpoints[j + 1])
            out.append(Cylinder(cyl.word + (j,), lo, hi))
        out.sort(key=lambda c: c.lo)
        return out

    def successors(self, k: int) -> range:
        first, last = self.branches[k].image
        return range(first, last + 1)

    def locate(self, x, n: int) -> Cylinder:
        """The generation-``n`` cylinder whose half-open interval contains ``x``."""
        x = as_fraction(x)
        k = self.cell_of(x)
        if n < 1:
            raise MarkovMapError("generation must be >= 1")
        word = [k]
        f = _IDENTITY
        lo, hi = self.endpoints[k], self.endpoints[k + 1]
        for _ in range(n - 1):
            f = _compose(f, self._inverse[word[-1]])
            for j in self.successors(word[-1]):
                clo, chi = _image_interval(f, self.endpoints[j], self.endpoints[j + 1])
                if clo <= x < chi:
                    word.append(j)
                    lo, hi = clo, chi
                    break
            else:  # pragma: no cover - children tile the parent
                raise AssertionError("children do not tile parent cylinder")
        return Cylinder(tuple(word), lo, hi)

    def words(self, n: int) -> Iterator[Word]:
        """All admissible words of length ``n`` in lexicographic order."""
        stack: list[Word] = [(k,) for k in reversed(range(self.Q))]
        while stack:
            w = stack.pop()
            if len(w) == n:
                yield w
                continue
            for j in reversed(self.successors(w[-1])):
                stack.append(w + (j,))

    def scale_covering(self, n: int) -> Covering:
        """Maximal cylinders of length ``<= 2**-n``, sorted left to right."""
        if n < 0:
            raise MarkovMapError("scale index must be >= 0")
        r = Fraction(1, 2**n)
        members: list[Cylinder] = []
        stack = [(Cylinder((k,), self.endpoints[k], self.endpoints[k + 1]), self._inverse[k]) for k in range(self.Q)]
        while stack:
            cyl, f = stack.pop()
            if cyl.length <= r:
                members.append(cyl)
                continue
            for j in self.successors(cyl.word[-1]):
                lo, hi = _image_interval(f, self.endpoints[j], self.endpoints[j + 1])
                stack.append((Cylinder(cyl.word + (j,), lo, hi), _compose(f, self._inverse[j])))
        members.sort(key=lambda c: c.lo)
        return Covering(n, tuple(members))

    # -- float views used by the streaming experiments --------------------

    def inverse_coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-symbol float coefficients of the inverse branch ``y -> off + mul*y``."""
        off = np.array([float(a) for a, _ in self._inverse])
        mul = np.array([float(b) for _, b in self._inverse])
        return off, mul

    def cell_bounds_float(self) -> tuple[np.ndarray, np.ndarray]:
        e = np.array([float(a) for a in self.endpoints])
        return e[:-1], e[1:]

    def log_slopes(self) -> np.ndarray:
        return np.array([math.log(s) for s in self.slopes])

    # -- constants --------------------------------------------------------

    @property
    def rho(self) -> Fraction:
        return min(self.slopes)

    def distortion_constant(self) -> Fraction:
        """Exact ``L``: the largest parent/child length ratio.

        For affine branches the ratio ``|I_w| / |I_{w j}|`` only depends on the
        last two symbols and equals ``|T(I(k))| / |I(j)|``. The unit interval is
        treated as the parent of the partition cells, so coverings at every
        scale satisfy the two-sided length bound.
        """
        ratios = [Fraction(1) / self.cell_length(j) for j in range(self.Q)]
        for k in range(self.Q):
            c_lo, c_hi = self.image_bounds(k)
            ratios += [(c_hi - c_lo) / self.cell_length(j) for j in self.successors(k)]
        return max(ratios)

    def generation_constants(self) -> tuple[float, float]:
        """``(L_prime, asymptotic)`` bounding covering generations by ``n``.

        Members of :meth:`scale_covering` at scale ``n >= 1`` have generation
        ``m`` with ``n / L_prime <= m <= L_prime * n``. The asymptotic value is
        the large-``n`` ratio ``max(1, log 2 / log rho, log sigma / log 2)`` with
        ``sigma`` the largest slope; ``L_prime`` adds the finite-``n`` margin.
        """
        log2 = math.log(2)
        log_rho = math.log(self.rho)
        log_sigma = math.log(max(self.slopes))
        min_cell = min(self.cell_length(k) for k in range(self.Q))
        asym = max(1.0, log2 / log_rho, log_sigma / log2)
        upper = (log_rho + log2 + math.log(self.distortion_constant())) / log_rho
        lower = (log_sigma - math.log(min_cell)) / log2
        return max(asym, upper, lower), asym


def mixing_horizon(A: np.ndarray, limit: int | None = None) -> int | None:
    """Least ``R`` with ``A + A^2 + ... + A^R`` entrywise positive, or None.

    The search stops at ``limit`` (default ``Q**2``).
    """
    A = np.asarray(A, dtype=bool)
    Q = A.shape[0]
    limit = Q * Q if limit is None else limit
    Ai = A.astype(np.int64)
    power = np.eye(Q, dtype=np.int64)
    reach = np.zeros((Q, Q), dtype=bool)
    for n in range(1, limit + 1):
        power = np.minimum(power @ Ai, 1)
        reach |= power.astype(bool)
        if reach.all():
            return n
    return None


def validate(m: MarkovMap, strict: bool = True) -> ValidationReport:
    """Check the five Markov-map axioms and compute ``rho, L, L', R``.

    With ``strict`` an :class:`InvalidMapError` is raised on failure, its
    message naming the first failed axiom ("not expanding", ...).
    """
    rep = ValidationReport()
    rep.rho = m.rho
    expanding = m.rho > 1
    rep.axioms["1_expanding"] = (expanding, f"min |T'| = {m.rho}" if expanding else f"not expanding: min |T'| = {m.rho} <= 1")
    rep.axioms["2_monotone_affine"] = (True, "affine branches, strictly monotone")
    rep.axioms["3_markov"] = (True, "branch images are runs of partition cells")
    R = mixing_horizon(m.A)
    rep.R = R
    rep.axioms["4_mixing"] = (
        R is not None,
        f"R = {R}" if R is not None else f"no R <= {m.Q ** 2} with A + ... + A^R positive",
    )
    rep.axioms["5_bounded_distortion"] = (True, "T'' = 0 on every cell (vacuous)")
    rep.L = m.distortion_constant()
    if expanding:
        rep.L_prime, rep.L_prime_asymptotic = m.generation_constants()
    if strict and not rep.ok:
        raise InvalidMapError("; ".join(rep.failures()), rep)
    return rep

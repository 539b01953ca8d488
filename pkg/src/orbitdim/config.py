"""Experiment configuration: TOML with exact rational literals."""

from __future__ import annotations

import hashlib
import math
import re
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .markov_map import Branch, MarkovMap, MarkovMapError
from .thermo import LogRational, Potential, ThermoError, geometric_potential, normalize

_RATIONAL = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+))?\s*$")
_LOG_RATIONAL = re.compile(r"^\s*log\(\s*([+-]?\d+)\s*(?:/\s*(\d+))?\s*\)\s*$")

SECTIONS = {
    "map": {"name", "endpoints", "orientations", "images"},
    "potential": {"depth", "values", "normalize"},
    "orbit": {"kind", "seed", "seeds", "preperiod", "period"},
    "experiment": {
        "q_grid", "inv_delta_grid", "delta_grid",
        "hit_window", "hit_horizon", "hit_target", "pairs", "y_seed_offset",
        "profile_n", "profile_horizon",
        "recurrence_window", "recurrence_horizon",
        "coverage_N", "coverage_M", "coverage_inv_delta",
        "window", "max_hit_n", "max_steps", "tolerance", "coverage_pass", "band_offsets",
    },
    "output": {"dir", "figures"},
}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def parse_rational(value: Any, where: str = "value") -> Fraction:
    """Exact rational from an int or a ``"p/q"`` string; floats are rejected."""
    if isinstance(value, bool):
        raise ValueError(f"{where}: booleans are not rationals")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        m = _RATIONAL.match(value)
        if m:
            den = int(m.group(2) or 1)
            if den == 0:
                raise ValueError(f"{where}: zero denominator in {value!r}")
            return Fraction(int(m.group(1)), den)
    raise ValueError(f"{where}: malformed rational {value!r} (use \"p/q\")")


def parse_real(value: Any, where: str = "value") -> tuple[float, str]:
    """Real number plus its display label; accepts numbers, ``"p/q"`` and ``"log(p/q)"``."""
    if isinstance(value, bool):
        raise ValueError(f"{where}: booleans are not numbers")
    if isinstance(value, (int, float)):
        return float(value), repr(value)
    if isinstance(value, str):
        m = _LOG_RATIONAL.match(value)
        if m:
            den = int(m.group(2) or 1)
            if den == 0:
                raise ValueError(f"{where}: zero denominator in {value!r}")
            arg = Fraction(int(m.group(1)), den)
            lr = LogRational(arg)
            return float(lr), str(lr)
        return float(parse_rational(value, where)), value.strip()
    raise ValueError(f"{where}: malformed number {value!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    map: MarkovMap
    potential: Potential
    orbit_kind: str
    seeds: tuple[int, ...]
    preperiod: str
    period: str
    experiment: dict[str, Any]
    out_dir: str
    figures: bool
    digest: str
    raw: dict[str, Any] = field(repr=False, default_factory=dict)

    def get(self, key: str, default: Any = None) -> Any:
        return self.experiment.get(key, default)


def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    lines = text.splitlines()
    start = 0
    for i, ln in enumerate(lines):
        if re.match(rf"^\s*\[\s*{re.escape(section)}\s*\]", ln):
            start = i
            if key is None:
                return i + 1
            break
    if key is None:
        return None
    pat = re.compile(rf"^\s*\"?{re.escape(key)}\"?\s*=")
    for i in range(start, len(lines)):
        if pat.match(lines[i]) or re.search(rf"[{{,]\s*\"?{re.escape(key)}\"?\s*=", lines[i]):
            return i + 1
    return None


def parse_config(text: str) -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"TOML syntax error: {exc}", int(m.group(1)) if m else None) from exc

    for sec, body in raw.items():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]", _line_of(text, sec))
        if not isinstance(body, dict):
            raise ConfigError(f"[{sec}] must be a table", _line_of(text, sec))
        for key in body:
            if key not in SECTIONS[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", _line_of(text, sec, key))
    for sec in ("map", "potential"):
        if sec not in raw:
            raise ConfigError(f"missing section [{sec}]")

    m = _parse_map(text, raw["map"])
    pot = _parse_potential(text, raw["potential"], m)
    orbit = raw.get("orbit", {})
    kind = orbit.get("kind", "sampled")
    if kind not in ("sampled", "explicit"):
        raise ConfigError(f"orbit kind must be 'sampled' or 'explicit', got {kind!r}", _line_of(text, "orbit", "kind"))
    if "seed" in orbit and "seeds" in orbit:
        raise ConfigError("give either seed or seeds, not both", _line_of(text, "orbit", "seeds"))
    seeds = orbit.get("seeds", [orbit["seed"]] if "seed" in orbit else [0, 1, 2, 3, 4])
    if not isinstance(seeds, list) or not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds):
        raise ConfigError("seeds must be a list of non-negative integers", _line_of(text, "orbit", "seeds"))
    pre, per = str(orbit.get("preperiod", "")), str(orbit.get("period", ""))
    if kind == "explicit":
        if not (pre + per).isdigit():
            raise ConfigError("explicit orbit needs digit-string preperiod/period", _line_of(text, "orbit", "period"))
        word = [int(c) for c in pre + per + per[:1]]
        if any(s >= m.Q for s in word) or not m.admissible(word):
            raise ConfigError("explicit orbit is not an admissible itinerary", _line_of(text, "orbit", "period"))
    exp = dict(raw.get("experiment", {}))
    _check_experiment(text, exp)
    out = raw.get("output", {})
    return ExperimentConfig(
        map=m,
        potential=pot,
        orbit_kind=kind,
        seeds=tuple(seeds),
        preperiod=pre,
        period=per,
        experiment=exp,
        out_dir=str(out.get("dir", "out")),
        figures=bool(out.get("figures", True)),
        digest=hashlib.sha256(text.encode()).hexdigest(),
        raw=raw,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return parse_config(text)


def _parse_map(text: str, sec: dict) -> MarkovMap:
    for key in ("endpoints", "orientations", "images"):
        if key not in sec:
            raise ConfigError(f"[map] needs {key!r}", _line_of(text, "map"))
    try:
        ends = [parse_rational(v, "endpoint") for v in sec["endpoints"]]
    except ValueError as exc:
        raise ConfigError(str(exc), _line_of(text, "map", "endpoints")) from exc
    if any(b <= a for a, b in zip(ends, ends[1:])):
        raise ConfigError("endpoints must be strictly increasing", _line_of(text, "map", "endpoints"))
    try:
        branches = [Branch(int(o), tuple(int(c) for c in img)) for o, img in zip(sec["orientations"], sec["images"], strict=True)]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed branches: {exc}", _line_of(text, "map", "images")) from exc
    try:
        return MarkovMap(ends, branches, name=str(sec.get("name", "map")))
    except MarkovMapError as exc:
        raise ConfigError(str(exc), _line_of(text, "map", "images")) from exc


def _parse_potential(text: str, sec: dict, m: MarkovMap) -> Potential:
    values = sec.get("values")
    if values == "geometric":
        pot = geometric_potential(m)
    else:
        if "depth" not in sec or not isinstance(values, dict):
            raise ConfigError("[potential] needs depth and a values table (or values = \"geometric\")", _line_of(text, "potential"))
        table, labels = {}, {}
        for word, v in values.items():
            try:
                table[word], labels[word] = parse_real(v, f"potential value for {word!r}")
            except ValueError as exc:
                raise ConfigError(str(exc), _line_of(text, "potential", word)) from exc
        try:
            pot = Potential.from_table(m, int(sec["depth"]), table)
        except (ThermoError, ValueError) as exc:
            bad = next((w for w in values if str(w) in str(exc)), None)
            raise ConfigError(str(exc), _line_of(text, "potential", bad) if bad else _line_of(text, "potential")) from exc
        pot = Potential(pot.depth, pot.values, pot.normalized, {tuple(int(c) for c in w): lab for w, lab in labels.items()})
    if sec.get("normalize", True):
        try:
            pot = normalize(m, pot)
        except ThermoError as exc:
            raise ConfigError(f"cannot normalize potential: {exc}", _line_of(text, "map", "images")) from exc
    return pot


def _check_experiment(text: str, exp: dict) -> None:
    def fail(key: str, msg: str):
        raise ConfigError(f"[experiment] {key}: {msg}", _line_of(text, "experiment", key))

    for key in ("hit_horizon", "pairs", "profile_n", "profile_horizon", "recurrence_horizon", "coverage_N", "coverage_M", "max_hit_n", "max_steps"):
        if key in exp and (not isinstance(exp[key], int) or isinstance(exp[key], bool) or exp[key] <= 0):
            fail(key, "must be a positive integer")
    for key in ("hit_window", "recurrence_window", "window"):
        if key in exp:
            w = exp[key]
            if not (isinstance(w, list) and len(w) == 2 and all(isinstance(k, int) for k in w) and 1 <= w[0] < w[1]):
                fail(key, "must be [n0, n1] with n0 < n1")
    if "hit_target" in exp and exp["hit_target"] not in ("phi", "lebesgue"):
        fail("hit_target", "must be 'phi' or 'lebesgue'")
    if "q_grid" in exp:
        exp["q_grid"] = _grid(exp["q_grid"], lambda msg: fail("q_grid", msg))
    for key in ("inv_delta_grid", "delta_grid", "coverage_inv_delta"):
        if key in exp:
            vals = _grid(exp[key], lambda msg, k=key: fail(k, msg))
            if any(v <= 0 for v in vals):
                fail(key, "values must be positive")
            exp[key] = vals
    if "inv_delta_grid" in exp and "delta_grid" in exp:
        fail("delta_grid", "give either delta_grid or inv_delta_grid")
    if "coverage_N" in exp and "coverage_M" in exp and exp["coverage_N"] >= exp["coverage_M"]:
        fail("coverage_M", "must exceed coverage_N")
    for key in ("tolerance", "coverage_pass"):
        if key in exp and not (isinstance(exp[key], (int, float)) and exp[key] > 0):
            fail(key, "must be positive")
    if "band_offsets" in exp:
        b = exp["band_offsets"]
        if not (isinstance(b, list) and len(b) == 2 and 0 < b[0] < b[1]):
            fail("band_offsets", "must be [lo, hi] with 0 < lo < hi")


def _grid(spec: Any, fail) -> list[float]:
    if isinstance(spec, dict):
        if set(spec) != {"start", "stop", "step"}:
            fail("grid table needs exactly start, stop, step")
        a, b, h = (float(parse_real(spec[k])[0]) for k in ("start", "stop", "step"))
        if h <= 0 or b < a:
            fail("grid needs step > 0 and stop >= start")
        k = int(math.floor((b - a) / h + 1e-9))
        return [a + i * h for i in range(k + 1)]
    if isinstance(spec, list):
        try:
            return [parse_real(v)[0] for v in spec]
        except ValueError as exc:
            fail(str(exc))
    fail("must be a list or a {start, stop, step} table")
    return []

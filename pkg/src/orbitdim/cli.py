"""Command line runner: ``orbitdim COMMAND --config FILE``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config
from .dimension_lab import (
    REPORT_HEADER, Budgets, evaluate_cell, report_cells, report_rows,
)
from .hitting import BALL_FLOOR, HitProfile, hitting_exponent, recurrence_exponent, tau_cylinder_profile, typical_point
from .markov_map import InvalidMapError, validate
from .models import lebesgue
from .symbolic_orbit import explicit_stream, sample_stream
from .thermo import GibbsModel, spectrum

log = logging.getLogger("orbitdim")

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_INTERNAL = 0, 1, 2, 3
COMMANDS = ("validate", "spectrum", "hitstats", "recurrence", "coverage", "report")
DEFAULT_Q_GRID = [-5 + 0.25 * i for i in range(41)]


class Run:
    """Output directory bookkeeping for one command."""

    def __init__(self, cfg: ExperimentConfig, command: str, out: Path, seeds: Sequence[int], budget: int | None):
        self.cfg = cfg
        self.command = command
        self.out = out
        self.seeds = tuple(seeds)
        self.budget = budget
        self.files: list[str] = []
        self.partial: list[str] = []
        out.mkdir(parents=True, exist_ok=True)

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        path = self.out / name
        _atomic_write(path, buf.getvalue().encode())
        self.files.append(name)
        return path

    def cap(self, steps: int, what: str) -> int:
        """Clip a step horizon to the global budget, remembering the overrun."""
        if self.budget is not None and steps > self.budget:
            self.partial.append(f"{what}: horizon {steps} capped at budget {self.budget}")
            return self.budget
        return steps

    def manifest(self, wall: float) -> None:
        files = {f: hashlib.sha256((self.out / f).read_bytes()).hexdigest() for f in sorted(self.files)}
        doc = {
            "command": self.command,
            "config_sha256": self.cfg.digest,
            "version": __version__,
            "seeds": list(self.seeds),
            "wall_time_s": round(wall, 3),
            "files": files,
            "partial": self.partial,
        }
        _atomic_write(self.out / f"manifest_{self.command}.json", (json.dumps(doc, indent=2) + "\n").encode())


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _r(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


# -- commands ---------------------------------------------------------------


def cmd_validate(run: Run, args) -> None:
    rep = validate(run.cfg.map, strict=False)
    rows = [(name, "pass" if ok else "fail", msg) for name, (ok, msg) in sorted(rep.axioms.items())]
    for key, val in (("rho", rep.rho), ("L", rep.L), ("L_prime", rep.L_prime), ("L_prime_asymptotic", rep.L_prime_asymptotic), ("R", rep.R)):
        rows.append((key, "value", _r(val if not isinstance(val, Fraction) else str(val))))
    run.write_csv("validate.csv", ("item", "status", "detail"), rows)
    for name, status, detail in rows:
        print(f"{name:20s} {status:6s} {detail}")
    if not rep.ok:
        raise InvalidMapError("map fails: " + ", ".join(rep.failures()), rep)


def _curve(cfg: ExperimentConfig):
    validate(cfg.map)
    return spectrum(cfg.map, cfg.potential, cfg.get("q_grid", DEFAULT_Q_GRID))


def cmd_spectrum(run: Run, args) -> None:
    curve = _curve(run.cfg)
    run.write_csv("spectrum.csv", ("q", "eta", "alpha", "D"), [tuple(map(_r, r)) for r in curve.rows()])
    summary = [("dim", curve.dim), ("alpha_max", curve.alpha_max), ("alpha_minus", curve.alpha_minus), ("alpha_plus", curve.alpha_plus)]
    run.write_csv("spectrum_summary.csv", ("quantity", "value"), [(k, _r(v)) for k, v in summary])
    for k, v in summary:
        print(f"{k:12s} {v:.9f}")
    if args.figures:
        from .plotting import spectrum_figure

        spectrum_figure(curve, run.out / "spectrum.png")
        run.files.append("spectrum.png")


def _model(cfg: ExperimentConfig) -> GibbsModel:
    validate(cfg.map)
    return GibbsModel(cfg.map, cfg.potential)


def _stream(cfg: ExperimentConfig, model: GibbsModel, seed: int):
    if cfg.orbit_kind == "explicit":
        return explicit_stream(cfg.map, cfg.preperiod, cfg.period)
    return sample_stream(model, seed)


def cmd_hitstats(run: Run, args) -> None:
    cfg = run.cfg
    model = _model(cfg)
    n0, n1 = cfg.get("hit_window", [22, 24])
    H = run.cap(int(cfg.get("hit_horizon", 2**22)), "hit_horizon")
    target = cfg.get("hit_target", "phi")
    y_model = model if target == "phi" else GibbsModel(cfg.map, lebesgue(cfg.map))
    offset = int(cfg.get("y_seed_offset", 10_000))
    pairs = int(cfg.get("pairs", len(run.seeds)))
    seeds = list(run.seeds) if pairs <= len(run.seeds) else list(range(pairs))
    rows, est = [], []
    for seed in seeds[:pairs]:
        x = _stream(cfg, model, seed)
        y = typical_point(cfg.map, sample_stream(y_model, offset + seed), Fraction(1, 2**n1) * BALL_FLOOR)
        e = hitting_exponent(cfg.map, x, y, (n0, n1), H)
        est.append(e.estimate)
        taus = ";".join(f"{n}:{'' if t is None else t}" for n, t in e.points)
        rows.append((seed, offset + seed, target, n0, n1, H, _r(e.estimate), int(e.censored), taus))
    run.write_csv("hitstats.csv", ("seed_x", "seed_y", "y_measure", "n0", "n1", "horizon", "estimate", "censored", "tau_by_n"), rows)
    prof_n = int(cfg.get("profile_n", 10))
    prof_h = run.cap(int(cfg.get("profile_horizon", 2**20)), "profile_horizon")
    prof_rows = []
    cov = cfg.map.scale_covering(prof_n)
    for seed in run.seeds:
        prof_rows += tau_cylinder_profile(cfg.map, _stream(cfg, model, seed), cov, prof_h).rows()
    run.write_csv("hitprofile.csv", HitProfile.HEADER, prof_rows)
    print(f"hitting exponent median over {len(est)} pairs: {statistics.median(est):.4f}")


def cmd_recurrence(run: Run, args) -> None:
    cfg = run.cfg
    model = _model(cfg)
    curve = _curve(cfg)
    n0, n1 = cfg.get("recurrence_window", [22, 24])
    H = run.cap(int(cfg.get("recurrence_horizon", 2**22)), "recurrence_horizon")
    summ = recurrence_exponent(model, run.seeds, (n0, n1), H, curve.dim)
    rows = [(s, n0, n1, H, _r(e.estimate), int(e.censored)) for s, e in zip(summ.seeds, summ.estimates)]
    run.write_csv("recurrence.csv", ("seed", "n0", "n1", "horizon", "estimate", "censored"), rows)
    print(f"self-hitting exponent median {summ.median:.4f} (dim {curve.dim:.6f})")


def cmd_coverage(run: Run, args) -> None:
    from .dimension_lab import lebesgue_coverage

    cfg = run.cfg
    model = _model(cfg)
    N, M = int(cfg.get("coverage_N", 1000)), int(cfg.get("coverage_M", 10**6))
    invs = cfg.get("coverage_inv_delta", [0.8, 1.5])
    rows = []
    for seed in run.seeds:
        s = _stream(cfg, model, seed)
        for inv in invs:
            rows.append((seed, _r(1 / inv), _r(float(inv)), N, M, _r(lebesgue_coverage(cfg.map, s, 1 / inv, N, M))))
    run.write_csv("coverage.csv", ("seed", "delta", "inv_delta", "N", "M", "coverage"), rows)
    print(f"wrote {len(rows)} coverage values")


def _budgets(cfg: ExperimentConfig, budget: int | None) -> Budgets:
    b = Budgets()
    kw = {}
    for key in ("coverage_N", "coverage_M", "max_hit_n", "max_steps", "tolerance", "coverage_pass"):
        if key in cfg.experiment:
            kw[key] = cfg.experiment[key]
    if "window" in cfg.experiment:
        kw["window"] = tuple(cfg.experiment["window"])
    if "band_offsets" in cfg.experiment:
        kw["band_offsets"] = tuple(cfg.experiment["band_offsets"])
    if budget is not None:
        kw["max_steps"] = min(kw.get("max_steps", b.max_steps), budget)
    return Budgets(**{**b.__dict__, **kw})


def _report_deltas(cfg: ExperimentConfig) -> list[float]:
    if "delta_grid" in cfg.experiment:
        return list(cfg.experiment["delta_grid"])
    return [1.0 / v for v in cfg.get("inv_delta_grid", [0.7, 1.0, 1.3, 1.5, 1.8])]


def cmd_report(run: Run, args) -> None:
    cfg = run.cfg
    model = _model(cfg)
    curve = _curve(cfg)
    budgets = _budgets(cfg, run.budget)
    cells = report_cells(curve, _report_deltas(cfg), run.seeds)
    if args.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(evaluate_cell, [model] * len(cells), [curve] * len(cells), cells, [budgets] * len(cells)))
    else:
        results = [evaluate_cell(model, curve, c, budgets) for c in cells]
    rows = report_rows(curve, results)
    run.write_csv("report.csv", REPORT_HEADER, rows)
    for r in results:
        if r.verdict == "partial":
            run.partial.append(f"delta={r.cell.delta} seed={r.cell.seed} {r.cell.proxy}: budget exceeded")
    verdicts = [r[-1] for r in rows]
    print(f"report: {len(rows)} cells, " + ", ".join(f"{v}={verdicts.count(v)}" for v in ("pass", "fail", "info", "partial")))
    if args.figures:
        from .plotting import report_figure

        report_figure(curve, rows, run.out / "report.png")
        run.files.append("report.png")


HANDLERS = {
    "validate": cmd_validate,
    "spectrum": cmd_spectrum,
    "hitstats": cmd_hitstats,
    "recurrence": cmd_recurrence,
    "coverage": cmd_coverage,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="orbitdim", description="Hitting-time dimension experiments on piecewise-linear Markov maps.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="TOML experiment file")
    p.add_argument("--out", help="output directory (default: [output] dir of the config)")
    p.add_argument("--seeds", help="comma-separated seeds overriding [orbit] seeds")
    p.add_argument("--workers", type=int, default=1, help="worker processes for report cells")
    p.add_argument("--budget", type=int, help="cap on any step horizon; overruns exit with status 2")
    p.add_argument("--no-figures", dest="figures", action="store_false", help="skip PNG figures")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.budget is not None and args.budget <= 0:
        print("error: --budget must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        seeds = cfg.seeds
        if args.seeds:
            seeds = tuple(int(s) for s in args.seeds.split(",") if s.strip())
        figures = args.figures and cfg.figures
        args.figures = figures
        run = Run(cfg, args.command, Path(args.out or cfg.out_dir), seeds, args.budget)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    t0 = time.perf_counter()
    try:
        HANDLERS[args.command](run, args)
    except InvalidMapError as exc:
        print(f"invalid map: {exc}", file=sys.stderr)
        run.manifest(time.perf_counter() - t0)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as an internal failure
        log.exception("internal error")
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    run.manifest(time.perf_counter() - t0)
    if run.partial:
        for note in run.partial:
            print(f"partial: {note}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

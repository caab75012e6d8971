"""Batch front end: every experiment is a JSON config file plus a command.

Commands: profile, build, sequence, axioms, lovely-pair. Exit codes: 0 when
every certificate and check passes, 1 when a certificate failed (reports are
still written), 2 on configuration or construction errors. Reports are
written atomically and contain no timestamps, so a rerun with the same config
and seed is byte-identical at any thread count.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._util import atomic_write_text, dump_json
from .asymptotics import _classify_counts, _structure_key, profile_family
from .errors import ExperimentConfigError, LabError
from .finitemodels import (
    EXTENSION_FIELD,
    FamilySpec,
    FAMILIES,
    enumerate_family,
    primes_in,
    signature_for_family,
)
from .folang import ParamFormula, parse_formula
from .hgreedy import BEST_EFFORT, STRICT, build_h, derive_config, size_threshold_ok
from .haxioms import run_axiom_checks
from .hsequence import COARSE_DIM, FormulaSchedule, build_sequence, coarse_dimension_series, schedule_in
from .lovelypair import csv_rows, experiment_summary, run_experiment

MODES = (STRICT, BEST_EFFORT, COARSE_DIM)

_TOP_KEYS = {
    "family",
    "cover",
    "avoid",
    "mu",
    "gap",
    "ceiling",
    "seed",
    "mode",
    "threads",
    "out_dir",
    "profile_samples",
    "density_budget",
    "extension_samples",
    "base_max",
    "emit_counts",
    "window",
    "sweep_a1",
}
_FAMILY_KEYS = {"family", "lo", "hi", "values", "poly_rule"}
_FORMULA_KEYS = {"text", "object", "params"}


@dataclass
class ExperimentConfig:
    family: FamilySpec
    cover: list[ParamFormula] = field(default_factory=list)
    avoid: list[ParamFormula] = field(default_factory=list)
    mu: float | None = None
    gap: float = 0.05
    ceiling: float = 2.0
    seed: int = 0
    mode: str = STRICT
    threads: int | None = None
    out_dir: str = "reports"
    profile_samples: int = 10_000
    density_budget: int = 1_000_000
    extension_samples: int = 1000
    base_max: int = 3
    emit_counts: bool = False
    window: int = 3
    sweep_a1: bool = False


def _reject_unknown(d: dict, allowed: set, where: str):
    unknown = set(d) - allowed
    if unknown:
        raise ExperimentConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def _parse_family(raw) -> FamilySpec:
    if not isinstance(raw, dict):
        raise ExperimentConfigError("'family' must be an object")
    _reject_unknown(raw, _FAMILY_KEYS, "family")
    if "family" not in raw:
        raise ExperimentConfigError("'family' needs a family tag")
    if raw["family"] not in FAMILIES:
        raise ExperimentConfigError(
            f"unknown family {raw['family']!r}; choose one of {list(FAMILIES)}"
        )
    values = raw.get("values")
    return FamilySpec(
        family=raw["family"],
        lo=raw.get("lo"),
        hi=raw.get("hi"),
        values=None if values is None else tuple(int(v) for v in values),
        poly_rule=raw.get("poly_rule", "least-nonresidue"),
    )


def _parse_formula_entry(raw, sig, where: str) -> ParamFormula:
    if isinstance(raw, str):
        return parse_formula(raw, sig)
    if isinstance(raw, dict):
        _reject_unknown(raw, _FORMULA_KEYS, where)
        if "text" not in raw:
            raise ExperimentConfigError(f"{where}: formula object needs 'text'")
        params = raw.get("params")
        return parse_formula(
            raw["text"],
            sig,
            object_var=raw.get("object", "x"),
            params=None if params is None else tuple(params),
        )
    raise ExperimentConfigError(f"{where}: formula must be a string or an object")


def load_config(path: str) -> ExperimentConfig:
    """Parse and validate the whole config before any work starts."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ExperimentConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ExperimentConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ExperimentConfigError("config must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "config")
    if "family" not in raw:
        raise ExperimentConfigError("config needs a 'family' entry")
    family = _parse_family(raw["family"])
    sig = signature_for_family(family.family)
    cover = [
        _parse_formula_entry(entry, sig, f"cover[{i}]")
        for i, entry in enumerate(raw.get("cover", []))
    ]
    avoid = [
        _parse_formula_entry(entry, sig, f"avoid[{i}]")
        for i, entry in enumerate(raw.get("avoid", []))
    ]
    mode = raw.get("mode", STRICT)
    if mode not in MODES:
        raise ExperimentConfigError(f"mode must be one of {MODES}, got {mode!r}")
    try:
        threads = raw.get("threads")
        cfg = ExperimentConfig(
            family=family,
            cover=cover,
            avoid=avoid,
            mu=None if raw.get("mu") is None else float(raw["mu"]),
            gap=float(raw.get("gap", 0.05)),
            ceiling=float(raw.get("ceiling", 2.0)),
            seed=int(raw.get("seed", 0)),
            mode=mode,
            threads=None if threads is None else int(threads),
            out_dir=str(raw.get("out_dir", "reports")),
            profile_samples=int(raw.get("profile_samples", 10_000)),
            density_budget=int(raw.get("density_budget", 1_000_000)),
            extension_samples=int(raw.get("extension_samples", 1000)),
            base_max=int(raw.get("base_max", 3)),
            emit_counts=bool(raw.get("emit_counts", False)),
            window=int(raw.get("window", 3)),
            sweep_a1=bool(raw.get("sweep_a1", False)),
        )
    except (TypeError, ValueError) as exc:
        raise ExperimentConfigError(f"bad value in config: {exc}") from exc
    if cfg.mu is not None and not 0.0 < cfg.mu < 1.0:
        raise ExperimentConfigError("mu must lie strictly between 0 and 1")
    return cfg


def _write_csv(path: str, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow(row)
    atomic_write_text(path, buf.getvalue())


def _require(cfg: ExperimentConfig, cover: bool, avoid: bool, command: str):
    if cover and not cfg.cover:
        raise ExperimentConfigError(f"{command!r} needs at least one cover formula")
    if avoid and not cfg.avoid:
        raise ExperimentConfigError(f"{command!r} needs at least one avoid formula")


def _greedy_config(cfg: ExperimentConfig, family):
    return derive_config(
        cfg.cover,
        cfg.avoid,
        cfg.mu,
        family,
        gap=cfg.gap,
        ceiling=cfg.ceiling,
        samples=cfg.profile_samples,
        seed=cfg.seed,
    )


def cmd_profile(cfg: ExperimentConfig, out_dir: str) -> int:
    _require(cfg, cover=True, avoid=False, command="profile")
    family = enumerate_family(cfg.family)
    profiles = [
        profile_family(
            family, pf, cfg.gap, ceiling=cfg.ceiling, samples=cfg.profile_samples, seed=cfg.seed
        )
        for pf in cfg.cover + cfg.avoid
    ]
    atomic_write_text(
        os.path.join(out_dir, "profiles.json"),
        dump_json([p.to_json_dict() for p in profiles]),
    )
    if cfg.emit_counts:
        rows = [("formula", "size", "params", "count", "class")]
        for prof in profiles:
            for M in family:
                counts = prof._counts.get(_structure_key(M))
                if counts is None:
                    continue
                large, _ = _classify_counts(prof, M.size, counts)
                k = prof.pf.arity
                for flat, count in enumerate(counts):
                    params = np.unravel_index(flat, (M.size,) * k) if k else ()
                    rows.append(
                        (
                            prof.formula,
                            M.size,
                            " ".join(str(int(v)) for v in params),
                            int(count),
                            "large" if large[flat] else "algebraic",
                        )
                    )
        _write_csv(os.path.join(out_dir, "counts.csv"), rows)
    return 0


def _build_family(cfg: ExperimentConfig, threads: int):
    family = enumerate_family(cfg.family)
    gcfg = _greedy_config(cfg, family)
    mode = BEST_EFFORT if cfg.mode == BEST_EFFORT else STRICT
    skipped = []
    jobs = []
    for M in family:
        if mode == STRICT and not size_threshold_ok(gcfg, M).ok:
            skipped.append(M.size)
        else:
            jobs.append(M)

    def run(M):
        return build_h(M, gcfg, mode)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(M) for M in jobs]
    builds = list(zip(jobs, results))
    return family, gcfg, builds, skipped


def cmd_build(cfg: ExperimentConfig, out_dir: str, threads: int) -> int:
    _require(cfg, cover=True, avoid=True, command="build")
    if cfg.mode == COARSE_DIM:
        raise ExperimentConfigError("mode 'coarse-dim' applies to the sequence command")
    _, gcfg, builds, skipped = _build_family(cfg, threads)
    payload = {
        "config": gcfg.summary(),
        "mode": cfg.mode,
        "skipped_sizes": skipped,
        "builds": [report.to_json_dict() for _, (_, report) in builds],
    }
    atomic_write_text(os.path.join(out_dir, "build.json"), dump_json(payload))
    for M, (h_set, _) in builds:
        text = "".join(f"{e}\n" for e in h_set.elements)
        atomic_write_text(os.path.join(out_dir, "hsets", f"h_{M.size}.txt"), text)
    return 0 if all(report.all_passed for _, (_, report) in builds) else 1


def cmd_sequence(cfg: ExperimentConfig, out_dir: str, threads: int) -> int:
    _require(cfg, cover=True, avoid=True, command="sequence")
    if cfg.mode == BEST_EFFORT:
        raise ExperimentConfigError(
            "sequence schedules by threshold; use mode 'strict' or 'coarse-dim'"
        )
    family = enumerate_family(cfg.family)
    sched = FormulaSchedule(cover=tuple(cfg.cover), avoid=tuple(cfg.avoid))
    plan = schedule_in(
        family,
        sched,
        cfg.mu,
        mode=cfg.mode,
        gap=cfg.gap,
        ceiling=cfg.ceiling,
        samples=cfg.profile_samples,
        seed=cfg.seed,
    )
    build_sequence(plan, threads=threads)
    series = coarse_dimension_series(plan, window=cfg.window)
    atomic_write_text(os.path.join(out_dir, "plan.json"), dump_json(plan.to_json_dict()))
    _write_csv(os.path.join(out_dir, "coarse_dim.csv"), series.csv_rows())
    atomic_write_text(
        os.path.join(out_dir, "coarse_dim.json"), dump_json(series.to_json_dict())
    )
    reports = [e.report for e in plan.entries if e.report is not None]
    return 0 if all(r.all_passed for r in reports) else 1


def cmd_axioms(cfg: ExperimentConfig, out_dir: str, threads: int) -> int:
    _require(cfg, cover=True, avoid=True, command="axioms")
    if cfg.mode == COARSE_DIM:
        raise ExperimentConfigError("mode 'coarse-dim' applies to the sequence command")
    _, gcfg, builds, skipped = _build_family(cfg, threads)

    def run(item):
        M, (h_set, _) = item
        return run_axiom_checks(
            M,
            h_set,
            gcfg,
            density_budget=cfg.density_budget,
            extension_samples=cfg.extension_samples,
            base_max=cfg.base_max,
            seed=cfg.seed,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(run, builds))
    else:
        reports = [run(item) for item in builds]
    payload = {
        "config": gcfg.summary(),
        "skipped_sizes": skipped,
        "reports": [r.to_json_dict() for r in reports],
    }
    atomic_write_text(os.path.join(out_dir, "axioms.json"), dump_json(payload))
    failure_rows = [("size", "kind", "formula", "witness")]
    for r in reports:
        failure_rows.extend(r.failure_csv_rows())
    if len(failure_rows) > 1:
        _write_csv(os.path.join(out_dir, "failures.csv"), failure_rows)
    build_ok = all(report.all_passed for _, (_, report) in builds)
    return 0 if build_ok and all(r.passed for r in reports) else 1


def cmd_lovely_pair(cfg: ExperimentConfig, out_dir: str) -> int:
    if cfg.family.family != EXTENSION_FIELD:
        raise ExperimentConfigError("lovely-pair needs a quadratic-extension-field family")
    if cfg.family.values is not None:
        p_list = sorted(set(int(v) for v in cfg.family.values))
    else:
        if cfg.family.lo is None or cfg.family.hi is None:
            raise ExperimentConfigError("lovely-pair family needs values or an interval")
        p_list = [p for p in primes_in(cfg.family.lo, cfg.family.hi) if p != 2]
    reports = run_experiment(p_list, sweep_a1=cfg.sweep_a1)
    summary = experiment_summary(reports)
    _write_csv(os.path.join(out_dir, "lovely_pair.csv"), csv_rows(reports))
    atomic_write_text(
        os.path.join(out_dir, "lovely_pair.json"),
        dump_json({"summary": summary, "reports": [r.to_json_dict() for r in reports]}),
    )
    return 0 if summary["witnessed"] else 1


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hlab",
        description="Greedy generic-witness sets over finite structure families",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("profile", "build", "sequence", "axioms", "lovely-pair"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--threads", type=int, default=None, help="worker thread cap")
        p.add_argument("--mode", choices=MODES, default=None, help="mode override")
    return parser


def main(argv=None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.mode is not None:
            cfg.mode = args.mode
        out_dir = args.out if args.out is not None else cfg.out_dir
        threads = args.threads if args.threads is not None else cfg.threads
        if threads is None:
            threads = os.cpu_count() or 1
        threads = max(1, int(threads))
        os.makedirs(out_dir, exist_ok=True)
        if args.command == "profile":
            return cmd_profile(cfg, out_dir)
        if args.command == "build":
            return cmd_build(cfg, out_dir, threads)
        if args.command == "sequence":
            return cmd_sequence(cfg, out_dir, threads)
        if args.command == "axioms":
            return cmd_axioms(cfg, out_dir, threads)
        if args.command == "lovely-pair":
            return cmd_lovely_pair(cfg, out_dir)
        raise ExperimentConfigError(f"unknown command {args.command!r}")
    except LabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

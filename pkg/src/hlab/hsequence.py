"""Schedules across a growing family: per-structure truncation levels, the
per-structure builds, the truncated algebraic closure, and the coarse
dimension series ln|H| / ln|M|.

A schedule is a finite ordered list of cover formulas and a finite ordered
list of avoid formulas. Level n uses the first n+1 entries of each list. A
structure's level is the largest n whose size threshold it passes (with the
extra size > C^n requirement in coarse-dim mode); structures below every
level get an empty H.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .asymptotics import profile_family
from .errors import ConfigRejectedError
from .finitemodels import FiniteStructure
from .folang import ParamFormula, solution_counts_all
from .hgreedy import (
    AVOID_BUDGET,
    STRICT,
    BuildReport,
    GreedyConfig,
    HSet,
    _forbidden_mask,
    build_h,
    derive_config,
    size_threshold_ok,
)

COARSE_DIM = "coarse-dim"


@dataclass(frozen=True)
class FormulaSchedule:
    """Finite truncation of the full formula enumeration: level n pairs the
    first n+1 cover formulas with the first n+1 avoid formulas."""

    cover: tuple[ParamFormula, ...]
    avoid: tuple[ParamFormula, ...]

    def __post_init__(self):
        if not self.cover or not self.avoid:
            raise ConfigRejectedError("schedule needs at least one cover and one avoid formula")

    @property
    def levels(self) -> int:
        return max(len(self.cover), len(self.avoid))

    def truncation(self, level: int):
        return (
            self.cover[: min(level + 1, len(self.cover))],
            self.avoid[: min(level + 1, len(self.avoid))],
        )


@dataclass
class PlanEntry:
    structure: FiniteStructure = field(repr=False)
    size: int
    level: int | None  # None encodes "below every threshold"
    h_set: HSet | None = None
    report: BuildReport | None = None

    def to_json_dict(self) -> dict:
        return {
            "size": self.size,
            "structure": self.structure.describe(),
            "level": self.level,
            "h": None if self.h_set is None else list(self.h_set.elements),
            "provenance": None
            if self.h_set is None
            else [list(p) for p in self.h_set.provenance],
            "report": None if self.report is None else self.report.to_json_dict(),
        }


@dataclass
class SequencePlan:
    mode: str
    mu: float
    schedule: FormulaSchedule
    configs: dict[int, GreedyConfig]
    entries: list[PlanEntry]

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "mu": self.mu,
            "levels": {str(k): cfg.summary() for k, cfg in self.configs.items()},
            "entries": [e.to_json_dict() for e in self.entries],
        }


def schedule_in(
    family: list[FiniteStructure],
    sched: FormulaSchedule,
    mu: float | None = None,
    mode: str = STRICT,
    *,
    gap: float = 0.05,
    ceiling: float = 2.0,
    samples: int = 10_000,
    seed: int = 0,
) -> SequencePlan:
    """Assign each structure its truncation level; H is not built yet.

    Levels are monotone in structure size on families where the threshold is
    monotone; an entry below every level keeps an empty H.
    """
    cover_profiles = [
        profile_family(family, pf, gap, ceiling=ceiling, samples=samples, seed=seed)
        for pf in sched.cover
    ]
    avoid_profiles = [
        profile_family(family, pf, gap, ceiling=ceiling, samples=samples, seed=seed)
        for pf in sched.avoid
    ]
    if mu is None:
        measures = [p.min_measure() for p in cover_profiles if p.E]
        if not measures:
            raise ConfigRejectedError("no cover formula has a measure; cannot pick mu")
        mu = min(measures) / 2.0
    configs: dict[int, GreedyConfig] = {}
    for level in range(sched.levels):
        delta, gamma = sched.truncation(level)
        configs[level] = derive_config(
            delta,
            gamma,
            mu,
            family,
            gap=gap,
            ceiling=ceiling,
            samples=samples,
            seed=seed,
            delta_profiles=cover_profiles[: len(delta)],
            gamma_profiles=avoid_profiles[: len(gamma)],
        )
    entries = []
    for M in family:
        level = None
        for n in range(sched.levels):
            cfg = configs[n]
            if not size_threshold_ok(cfg, M).ok:
                continue
            if mode == COARSE_DIM and not M.size > cfg.c_delta_gamma**n:
                continue
            level = n
        entries.append(PlanEntry(structure=M, size=M.size, level=level))
    return SequencePlan(mode=mode, mu=mu, schedule=sched, configs=configs, entries=entries)


def build_sequence(plan: SequencePlan, threads: int = 1) -> SequencePlan:
    """Build every scheduled structure; certificates are attached in family
    order, so the result is deterministic for any thread count."""

    def run(entry: PlanEntry):
        if entry.level is None:
            return None
        return build_h(entry.structure, plan.configs[entry.level], STRICT)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, plan.entries))
    else:
        results = [run(e) for e in plan.entries]
    for entry, result in zip(plan.entries, results):
        if result is None:
            entry.h_set = HSet(elements=[], provenance=[])
            entry.report = None
        else:
            entry.h_set, entry.report = result
    return plan


@dataclass
class ClosureSet:
    """Union of avoid-formula solution sets over parameter tuples from the
    base H union A; the finite stand-in for algebraic closure."""

    elements: list[int]
    base_size: int
    bound: int | None

    def __len__(self):
        return len(self.elements)

    def __contains__(self, element):
        return element in set(self.elements)


def closure(
    M: FiniteStructure,
    h_elements,
    a_elements,
    gamma_trunc,
    *,
    max_solutions: int | None = None,
) -> ClosureSet:
    """clos(H union A) under the truncated avoid list.

    The union bound max_solutions * |gamma| * base^k0 is asserted whenever
    the per-formula max solution count is known or cheap to compute; bases
    that only meet parameterless formulas use base+1 (those formulas
    contribute even to the empty base).
    """
    gamma = list(gamma_trunc)
    base = sorted(set(int(v) for v in h_elements) | set(int(v) for v in a_elements))
    mask = _forbidden_mask(M, gamma, base)
    elements = [int(v) for v in np.flatnonzero(mask)]
    k0 = max((pf.arity for pf in gamma), default=0)
    if max_solutions is None and all(
        M.size ** (pf.arity + 1) <= AVOID_BUDGET for pf in gamma
    ):
        max_solutions = max(int(solution_counts_all(M, pf).max()) for pf in gamma)
    bound = None
    if max_solutions is not None:
        slots = len(base) + (1 if any(pf.arity == 0 for pf in gamma) else 0)
        bound = max_solutions * len(gamma) * slots**k0
        assert len(elements) <= bound, "closure exceeded its union bound"
    return ClosureSet(elements=elements, base_size=len(base), bound=bound)


@dataclass
class CoarseDimensionSeries:
    """Per structure (size, h_size, ln|H|/ln|M|) plus a windowed trend
    summary over the structures that actually built a non-empty H."""

    rows: list[tuple[int, int, float]]
    window: int
    first_ratio: float | None
    last_ratio: float | None
    first_window_avg: float | None
    last_window_avg: float | None
    nonincreasing: bool | None

    def to_json_dict(self) -> dict:
        return {
            "rows": [list(r) for r in self.rows],
            "window": self.window,
            "first_ratio": self.first_ratio,
            "last_ratio": self.last_ratio,
            "first_window_avg": self.first_window_avg,
            "last_window_avg": self.last_window_avg,
            "nonincreasing": self.nonincreasing,
        }

    def csv_rows(self):
        yield ("size", "h_size", "ratio")
        for size, h_size, ratio in self.rows:
            yield (size, h_size, repr(float(ratio)))


def coarse_dimension_series(plan: SequencePlan, window: int = 3) -> CoarseDimensionSeries:
    """ln|H|/ln|M| per structure; 0 by convention when H is empty (and when
    |H| = 1, since ln 1 = 0)."""
    rows = []
    built = []
    for entry in plan.entries:
        h_size = 0 if entry.h_set is None else len(entry.h_set)
        ratio = 0.0 if h_size < 1 else math.log(h_size) / math.log(entry.size)
        rows.append((entry.size, h_size, ratio))
        if h_size >= 1:
            built.append(ratio)
    if not built:
        return CoarseDimensionSeries(rows, window, None, None, None, None, None)
    w = min(window, len(built))
    first_avg = sum(built[:w]) / w
    last_avg = sum(built[-w:]) / w
    return CoarseDimensionSeries(
        rows=rows,
        window=w,
        first_ratio=built[0],
        last_ratio=built[-1],
        first_window_avg=first_avg,
        last_window_avg=last_avg,
        nonincreasing=last_avg <= first_avg + 1e-12,
    )

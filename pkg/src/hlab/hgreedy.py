"""Greedy construction of an ordered set H that covers the large parameters
of every cover formula and avoids every algebraic formula, with a logarithmic
size bound.

The builder walks the cover formulas in order. For the current formula it
keeps the set Y of still-uncovered large parameter tuples, recomputes the
forbidden set L (all solutions of avoid formulas over parameters drawn from
the current H, plus solutions of parameterless avoid formulas), and among the
eligible elements X = M minus (H union L) appends the element covering the
most tuples of Y, smallest index winning ties. Under the size threshold each
step shrinks Y by a factor of at least (1 - mu/2), which forces
|H| <= n_formulas * h_M <= C * ln|M|.

Every build returns certificates: an exhaustive (or sampled and flagged)
cover check per cover formula, an exhaustive order-restricted avoid check per
avoid formula, the size bound, and the per-step shrink factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._util import tuple_columns
from .asymptotics import (
    MeasureProfile,
    _classify_counts,
    profile_family,
    psi_columns,
)
from .errors import (
    ConfigRejectedError,
    EnumerationBudgetError,
    StructureTooSmallError,
    ThresholdNotMetError,
)
from .finitemodels import FiniteStructure
from .folang import ParamFormula, eval_bulk, solution_counts_all, solution_mask_matrix

MATRIX_BUDGET = 1 << 27
AVOID_BUDGET = 10_000_000
COVER_SAMPLES = 10_000

STRICT = "strict"
BEST_EFFORT = "best_effort"


@dataclass
class GreedyConfig:
    """Cover formulas, avoid formulas, the measure floor, and every derived
    constant. Logs are natural throughout."""

    delta: tuple[ParamFormula, ...]
    gamma: tuple[ParamFormula, ...]
    mu: float
    delta_profiles: tuple[MeasureProfile, ...]
    gamma_profiles: tuple[MeasureProfile, ...]
    ell0: int
    k0: int
    gamma_max_solutions: int
    c_gamma: int
    c_delta_gamma: int

    @property
    def n_formulas(self) -> int:
        return len(self.delta)

    @property
    def decay(self) -> float:
        return -math.log(1.0 - self.mu / 2.0)

    def h_m(self, size: int) -> int:
        """Phase step bound: ceil(ell0 * ln(size) / -ln(1 - mu/2)) + 1."""
        return math.ceil(self.ell0 * math.log(size) / self.decay) + 1

    def h_budget(self, size: int) -> int:
        return self.n_formulas * self.h_m(size)

    def summary(self) -> dict:
        return {
            "cover": [pf.text for pf in self.delta],
            "avoid": [pf.text for pf in self.gamma],
            "mu": self.mu,
            "ell0": self.ell0,
            "k0": self.k0,
            "gamma_max_solutions": self.gamma_max_solutions,
            "c_gamma": self.c_gamma,
            "c_delta_gamma": self.c_delta_gamma,
        }


def derive_config(
    delta,
    gamma,
    mu: float | None,
    family,
    *,
    gap: float = 0.05,
    ceiling: float = 2.0,
    samples: int = 10_000,
    seed: int = 0,
    delta_profiles=None,
    gamma_profiles=None,
) -> GreedyConfig:
    """Profile both formula lists over the family and fix the constants.

    Rejected when mu is not below every profiled measure of the cover list,
    or when an avoid formula is not uniformly algebraic on the family.
    """
    delta = tuple(delta)
    gamma = tuple(gamma)
    if not delta or not gamma:
        raise ConfigRejectedError("need at least one cover and one avoid formula")
    for pf in delta:
        if pf.arity == 0:
            raise ConfigRejectedError(f"cover formula {pf.text!r} has no parameters")
    if delta_profiles is None:
        delta_profiles = tuple(
            profile_family(family, pf, gap, ceiling=ceiling, samples=samples, seed=seed)
            for pf in delta
        )
    if gamma_profiles is None:
        gamma_profiles = tuple(
            profile_family(family, pf, gap, ceiling=ceiling, samples=samples, seed=seed)
            for pf in gamma
        )
    for pf, prof in zip(gamma, gamma_profiles):
        if not prof.uniformly_algebraic:
            raise ConfigRejectedError(
                f"avoid formula {pf.text!r} is classified large somewhere "
                f"(measures {prof.E}); it must be uniformly algebraic"
            )
    measures = [prof.min_measure() for prof in delta_profiles if prof.E]
    if mu is None:
        if not measures:
            raise ConfigRejectedError("no cover formula has a measure; cannot pick mu")
        mu = min(measures) / 2.0
    if not 0.0 < mu < 1.0:
        raise ConfigRejectedError(f"measure floor mu={mu} must lie in (0, 1)")
    for pf, prof in zip(delta, delta_profiles):
        if prof.E and mu >= prof.min_measure():
            raise ConfigRejectedError(
                f"mu={mu} is not below the smallest measure {prof.min_measure():.4f} "
                f"of cover formula {pf.text!r}"
            )
    ell0 = max(pf.arity for pf in delta)
    k0 = max(pf.arity for pf in gamma)
    gamma_max = max((prof.B or 0) for prof in gamma_profiles)
    c_gamma = gamma_max * len(gamma)
    decay = -math.log(1.0 - mu / 2.0)
    c_delta_gamma = len(delta) * (math.ceil(ell0 / decay) + 1)
    return GreedyConfig(
        delta=delta,
        gamma=gamma,
        mu=mu,
        delta_profiles=tuple(delta_profiles),
        gamma_profiles=tuple(gamma_profiles),
        ell0=ell0,
        k0=k0,
        gamma_max_solutions=gamma_max,
        c_gamma=c_gamma,
        c_delta_gamma=c_delta_gamma,
    )


@dataclass
class ThresholdCheck:
    """Both threshold inequalities with their concrete sides."""

    ok: bool
    size: int
    h_m: int
    forbidden_bound: float  # c_gamma * (n*h_m + ell0)^k0
    mass_allowance: float  # (mu/2) * size
    headroom: float  # (1 - mu/2) * size
    h_budget: int  # n * h_m

    def to_json_dict(self) -> dict:
        return {
            "ok": self.ok,
            "size": self.size,
            "h_m": self.h_m,
            "forbidden_bound": self.forbidden_bound,
            "mass_allowance": self.mass_allowance,
            "headroom": self.headroom,
            "h_budget": self.h_budget,
        }


def size_threshold_ok(cfg: GreedyConfig, M) -> ThresholdCheck:
    """True iff c_gamma*(n*h_M + ell0)^k0 <= (mu/2)*|M| and
    (1 - mu/2)*|M| > n*h_M."""
    size = getattr(M, "size", M)
    h = cfg.h_m(size)
    budget = cfg.n_formulas * h
    lhs = cfg.c_gamma * (budget + cfg.ell0) ** cfg.k0
    rhs = (cfg.mu / 2.0) * size
    headroom = (1.0 - cfg.mu / 2.0) * size
    ok = lhs <= rhs and headroom > budget
    return ThresholdCheck(
        ok=ok,
        size=size,
        h_m=h,
        forbidden_bound=float(lhs),
        mass_allowance=float(rhs),
        headroom=float(headroom),
        h_budget=budget,
    )


def _forbidden_mask(M: FiniteStructure, gamma, h_elements) -> np.ndarray:
    """Mask over the universe of every element that solves some avoid formula
    with parameters drawn from h_elements (parameterless formulas always
    contribute)."""
    mask = np.zeros(M.size, dtype=bool)
    x = np.arange(M.size, dtype=np.intp)
    for xi in gamma:
        if xi.arity == 0:
            mask |= eval_bulk(M, xi.formula, {xi.object_var: x})
            continue
        if not len(h_elements):
            continue
        cols = tuple_columns(h_elements, xi.arity)
        chunk = max(1, MATRIX_BUDGET // max(M.size, 1))
        for start in range(0, cols.shape[1], chunk):
            part = cols[:, start : start + chunk]
            env = {xi.object_var: x[:, None]}
            env.update({name: row[None, :] for name, row in zip(xi.params, part)})
            mask |= eval_bulk(M, xi.formula, env).any(axis=1)
    return mask


def forbidden_set(h_elements, gamma, M: FiniteStructure) -> list[int]:
    """Public view of the forbidden set, in index order.

    The union bound max_solutions * |gamma| * (|H| + 1)^k0 is asserted when
    the per-structure max solution count is cheap to compute.
    """
    h = list(h_elements)
    gamma = list(gamma)
    mask = _forbidden_mask(M, gamma, h)
    out = [int(v) for v in np.flatnonzero(mask)]
    k0 = max((pf.arity for pf in gamma), default=0)
    if all(M.size ** (pf.arity + 1) <= AVOID_BUDGET for pf in gamma):
        max_solutions = max(int(solution_counts_all(M, pf).max()) for pf in gamma)
        bound = max_solutions * len(gamma) * (len(h) + 1) ** k0
        assert len(out) <= bound, "forbidden set exceeded its union bound"
    return out


@dataclass
class GreedyState:
    """One step of the construction: current formula phase, the ordered H so
    far, the remaining uncovered tuples Y, and the last forbidden/eligible
    masks (consistent with X = M minus (H union L))."""

    config: GreedyConfig
    formula_index: int
    step: int
    h_elements: list[int]
    provenance: list[tuple[int, int]]
    psi_cols: np.ndarray  # (arity, m0) initial large tuples of this phase
    remaining: np.ndarray  # indices into psi_cols of still-uncovered tuples
    forbidden: np.ndarray | None = None
    eligible: np.ndarray | None = None
    shrink_factors: list[float] = field(default_factory=list)
    matrix: np.ndarray | None = field(default=None, repr=False)

    @property
    def y_columns(self) -> np.ndarray:
        return self.psi_cols[:, self.remaining]

    def y_tuples(self) -> list[tuple[int, ...]]:
        cols = self.y_columns
        return [tuple(int(v) for v in cols[:, j]) for j in range(cols.shape[1])]


def _phase_state(cfg: GreedyConfig, M: FiniteStructure, index: int, h, prov) -> GreedyState:
    pf = cfg.delta[index]
    cols = psi_columns(M, pf, cfg.delta_profiles[index])
    m0 = cols.shape[1]
    matrix = None
    if M.size * max(m0, 1) <= MATRIX_BUDGET:
        matrix = solution_mask_matrix(M, pf, cols) if m0 else np.zeros((M.size, 0), bool)
    return GreedyState(
        config=cfg,
        formula_index=index,
        step=0,
        h_elements=h,
        provenance=prov,
        psi_cols=cols,
        remaining=np.arange(m0, dtype=np.intp),
        matrix=matrix,
    )


def _coverage(state: GreedyState, M: FiniteStructure) -> np.ndarray:
    """How many remaining tuples each element of the universe would cover."""
    pf = state.config.delta[state.formula_index]
    if state.matrix is not None:
        return state.matrix[:, state.remaining].sum(axis=1)
    counts = np.zeros(M.size, dtype=np.int64)
    cols = state.y_columns
    chunk = max(1, MATRIX_BUDGET // max(M.size, 1))
    for start in range(0, cols.shape[1], chunk):
        counts += solution_mask_matrix(M, pf, cols[:, start : start + chunk]).sum(axis=1)
    return counts


def greedy_step(state: GreedyState, M: FiniteStructure) -> GreedyState:
    """Append the argmax-coverage eligible element and drop what it covers.

    Ties break to the smallest canonical index, making the build
    deterministic regardless of how the coverage scan is partitioned.
    """
    if not len(state.remaining):
        raise ValueError("greedy_step called with no uncovered tuples")
    cfg = state.config
    in_h = np.zeros(M.size, dtype=bool)
    if state.h_elements:
        in_h[np.asarray(state.h_elements, dtype=np.intp)] = True
    forbidden = _forbidden_mask(M, cfg.gamma, state.h_elements)
    eligible = ~(in_h | forbidden)
    state.forbidden = forbidden
    state.eligible = eligible
    if not eligible.any():
        raise StructureTooSmallError(
            f"no eligible element left at size {M.size} "
            f"(formula {state.formula_index}, step {state.step})"
        )
    counts = _coverage(state, M)
    counts[~eligible] = -1
    h = int(np.argmax(counts))
    if counts[h] <= 0:
        raise StructureTooSmallError(
            f"no eligible element covers any remaining tuple at size {M.size} "
            f"(formula {state.formula_index}, step {state.step})"
        )
    pf = cfg.delta[state.formula_index]
    if state.matrix is not None:
        covered = state.matrix[h, state.remaining]
    else:
        cols = state.y_columns
        env = {pf.object_var: np.intp(h)}
        env.update({name: row for name, row in zip(pf.params, cols)})
        covered = eval_bulk(M, pf.formula, env)
    before = len(state.remaining)
    state.remaining = state.remaining[~covered]
    state.shrink_factors.append(len(state.remaining) / before)
    state.h_elements.append(h)
    state.provenance.append((state.formula_index, state.step))
    state.step += 1
    return state


@dataclass
class HSet:
    """The ordered output; order is construction order, provenance records
    the (formula phase, step) that appended each element."""

    elements: list[int]
    provenance: list[tuple[int, int]]

    def __len__(self):
        return len(self.elements)

    def position(self, element: int) -> int:
        return self.elements.index(element)


@dataclass
class CoverCertificate:
    formula: str
    method: str  # exhaustive | sampled
    checked: int
    failures: list[tuple]
    passed: bool

    def to_json_dict(self) -> dict:
        return {
            "formula": self.formula,
            "method": self.method,
            "checked": self.checked,
            "failures": [list(t) for t in self.failures],
            "passed": self.passed,
        }


@dataclass
class AvoidCertificate:
    formula: str
    checked: int
    violations: list[tuple]
    passed: bool

    def to_json_dict(self) -> dict:
        return {
            "formula": self.formula,
            "checked": self.checked,
            "violations": [list(t) for t in self.violations],
            "passed": self.passed,
        }


@dataclass
class BuildReport:
    size: int
    structure: str
    mode: str
    mu: float
    threshold: ThresholdCheck
    phases: list[dict]
    cover: list[CoverCertificate]
    avoid: list[AvoidCertificate]
    h_elements: list[int]
    provenance: list[tuple[int, int]]
    h_size: int
    size_bound_limit: float
    size_bound_ok: bool
    h_budget: int
    shrink_ok: bool

    @property
    def all_passed(self) -> bool:
        return (
            all(c.passed for c in self.cover)
            and all(c.passed for c in self.avoid)
            and self.size_bound_ok
            and self.shrink_ok
        )

    def to_json_dict(self) -> dict:
        return {
            "size": self.size,
            "structure": self.structure,
            "mode": self.mode,
            "mu": self.mu,
            "threshold": self.threshold.to_json_dict(),
            "phases": self.phases,
            "cover": [c.to_json_dict() for c in self.cover],
            "avoid": [c.to_json_dict() for c in self.avoid],
            "h": list(self.h_elements),
            "provenance": [list(p) for p in self.provenance],
            "h_size": self.h_size,
            "size_bound_limit": self.size_bound_limit,
            "size_bound_ok": self.size_bound_ok,
            "h_budget": self.h_budget,
            "shrink_ok": self.shrink_ok,
            "all_passed": self.all_passed,
        }


def build_h(M: FiniteStructure, cfg: GreedyConfig, mode: str = STRICT):
    """Run the full construction and verify it. Returns (HSet, BuildReport).

    Strict mode refuses structures below the size threshold and asserts the
    shrink inequality live; best-effort runs anywhere and relies on the
    certificates alone.
    """
    if mode not in (STRICT, BEST_EFFORT):
        raise ValueError(f"unknown mode {mode!r}")
    threshold = size_threshold_ok(cfg, M)
    if mode == STRICT and not threshold.ok:
        raise ThresholdNotMetError(
            f"size {M.size} is below the threshold: forbidden bound "
            f"{threshold.forbidden_bound} vs allowance {threshold.mass_allowance}, "
            f"headroom {threshold.headroom} vs budget {threshold.h_budget}"
        )
    if M.size <= 1:
        raise StructureTooSmallError("degenerate universe of size <= 1")

    h_elements: list[int] = []
    provenance: list[tuple[int, int]] = []
    phases = []
    shrink_ok = True
    bound = 1.0 - cfg.mu / 2.0
    for index in range(cfg.n_formulas):
        state = _phase_state(cfg, M, index, h_elements, provenance)
        psi_size = state.psi_cols.shape[1]
        while len(state.remaining):
            h_before = len(state.h_elements)
            greedy_step(state, M)
            if threshold.ok and h_before <= threshold.h_budget:
                if state.shrink_factors[-1] > bound + 1e-12:
                    shrink_ok = False
                    if mode == STRICT:
                        raise AssertionError(
                            f"shrink factor {state.shrink_factors[-1]:.6f} exceeded "
                            f"{bound:.6f} at size {M.size}, formula {index}, "
                            f"step {state.step - 1}"
                        )
            if mode == STRICT and len(state.h_elements) > threshold.h_budget:
                raise AssertionError(
                    f"|H| exceeded the budget {threshold.h_budget} at size {M.size}"
                )
        phases.append(
            {
                "formula": cfg.delta[index].text,
                "psi_size": psi_size,
                "steps": state.step,
                "shrink_factors": [float(s) for s in state.shrink_factors],
            }
        )

    h_set = HSet(elements=list(h_elements), provenance=list(provenance))
    cover = [
        verify_cover(M, h_set, pf, prof)
        for pf, prof in zip(cfg.delta, cfg.delta_profiles)
    ]
    avoid = [verify_avoid(M, h_set, xi) for xi in cfg.gamma]
    limit = cfg.c_delta_gamma * math.log(M.size)
    report = BuildReport(
        size=M.size,
        structure=M.describe(),
        mode=mode,
        mu=cfg.mu,
        threshold=threshold,
        phases=phases,
        cover=cover,
        avoid=avoid,
        h_elements=list(h_set.elements),
        provenance=list(h_set.provenance),
        h_size=len(h_set),
        size_bound_limit=float(limit),
        size_bound_ok=len(h_set) <= limit,
        h_budget=threshold.h_budget,
        shrink_ok=shrink_ok,
    )
    return h_set, report


def verify_cover(
    M: FiniteStructure,
    h_set,
    pf: ParamFormula,
    profile: MeasureProfile,
    *,
    budget: int = 10_000_000,
    samples: int = COVER_SAMPLES,
    seed: int = 0,
) -> CoverCertificate:
    """Check that every large parameter tuple has a witness in H.

    Exhaustive over the enumerated large set when the tuple space fits the
    budget; otherwise a seeded sample of tuples is classified and checked,
    and the certificate is flagged as sampled.
    """
    elements = list(getattr(h_set, "elements", h_set))
    try:
        cols = psi_columns(M, pf, profile, budget=budget)
        method = "exhaustive"
    except EnumerationBudgetError:
        rng = np.random.default_rng([seed, M.size])
        tuples = np.unique(rng.integers(0, M.size, size=(samples, pf.arity)), axis=0)
        counts = solution_mask_matrix(M, pf, tuples.T).sum(axis=0)
        large, _ = _classify_counts(profile, M.size, counts)
        cols = tuples.T[:, large]
        method = "sampled"
    m = cols.shape[1]
    if m == 0:
        return CoverCertificate(pf.text, method, 0, [], True)
    if elements:
        rows = np.asarray(elements, dtype=np.intp)[:, None]
        env = {pf.object_var: rows}
        env.update({name: row[None, :] for name, row in zip(pf.params, cols)})
        covered = eval_bulk(M, pf.formula, env).any(axis=0)
    else:
        covered = np.zeros(m, dtype=bool)
    missing = np.flatnonzero(~covered)
    failures = [tuple(int(v) for v in cols[:, j]) for j in missing]
    return CoverCertificate(pf.text, method, m, failures, not failures)


def verify_avoid(M: FiniteStructure, h_set, pf: ParamFormula) -> AvoidCertificate:
    """Exhaustive order-restricted check: no element of H satisfies the
    formula with parameters strictly earlier in the H order. Parameterless
    formulas are checked against every element."""
    elements = list(getattr(h_set, "elements", h_set))
    k = pf.arity
    if len(elements) ** (k + 1) > AVOID_BUDGET:
        raise EnumerationBudgetError(
            f"avoid check needs {len(elements) ** (k + 1)} tuples"
        )
    violations: list[tuple] = []
    checked = 0
    if k == 0:
        for h in elements:
            checked += 1
            if eval_bulk(M, pf.formula, {pf.object_var: np.asarray([h], dtype=np.intp)})[0]:
                violations.append((h,))
        return AvoidCertificate(pf.text, checked, violations, not violations)
    for pos, h in enumerate(elements):
        earlier = elements[:pos]
        if not earlier:
            continue
        cols = tuple_columns(earlier, k)
        env = {pf.object_var: np.intp(h)}
        env.update({name: row for name, row in zip(pf.params, cols)})
        sat = np.atleast_1d(eval_bulk(M, pf.formula, env))
        checked += cols.shape[1]
        for j in np.flatnonzero(sat):
            violations.append((h, *(int(v) for v in cols[:, j])))
    return AvoidCertificate(pf.text, checked, violations, not violations)

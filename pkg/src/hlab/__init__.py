"""Finite-model lab: greedy log-size generic-witness sets over families of
finite structures, certified exhaustively at finite scale."""

from .asymptotics import MeasureProfile, ParamClass, classify, profile_family, psi_set
from .finitemodels import (
    FamilySpec,
    FiniteStructure,
    Signature,
    enumerate_family,
    make_cyclic_group,
    make_extension_field,
    make_f2_vector_space,
    make_prime_field,
)
from .folang import (
    Assignment,
    ParamFormula,
    evaluate,
    evaluate_naive,
    parse_formula,
    pretty,
    solution_count,
    solution_set,
)
from .hgreedy import (
    BuildReport,
    GreedyConfig,
    GreedyState,
    HSet,
    build_h,
    derive_config,
    forbidden_set,
    greedy_step,
    size_threshold_ok,
    verify_avoid,
    verify_cover,
)
from .haxioms import AxiomReport, check_density, check_extension, check_independence
from .hsequence import (
    ClosureSet,
    CoarseDimensionSeries,
    FormulaSchedule,
    SequencePlan,
    build_sequence,
    closure,
    coarse_dimension_series,
    schedule_in,
)
from .lovelypair import (
    QuadraticPairReport,
    build_quadratic_pair,
    phi_count,
    run_experiment,
    subfield_violations,
)

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "AxiomReport",
    "BuildReport",
    "ClosureSet",
    "CoarseDimensionSeries",
    "FamilySpec",
    "FiniteStructure",
    "FormulaSchedule",
    "GreedyConfig",
    "GreedyState",
    "HSet",
    "MeasureProfile",
    "ParamClass",
    "ParamFormula",
    "QuadraticPairReport",
    "SequencePlan",
    "Signature",
    "build_h",
    "build_quadratic_pair",
    "build_sequence",
    "check_density",
    "check_extension",
    "check_independence",
    "classify",
    "closure",
    "coarse_dimension_series",
    "derive_config",
    "enumerate_family",
    "evaluate",
    "evaluate_naive",
    "forbidden_set",
    "greedy_step",
    "make_cyclic_group",
    "make_extension_field",
    "make_f2_vector_space",
    "make_prime_field",
    "parse_formula",
    "phi_count",
    "pretty",
    "profile_family",
    "psi_set",
    "run_experiment",
    "schedule_in",
    "size_threshold_ok",
    "solution_count",
    "solution_set",
    "subfield_violations",
    "verify_avoid",
    "verify_cover",
]

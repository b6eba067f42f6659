"""Inference of relational patterns over tuples of sequences, sets and
multisets from positive samples, with polynomial decision procedures, plus a
CHC satisfiability solver for list-manipulating programs built on top."""

from .alphabet import parse_cell, render_cell
from .chc_core import (
    ChcSystem,
    Clause,
    ParseError,
    PredicateAtom,
    Sample,
    SampleBudget,
    bounded_goal_check,
    collect_samples,
    derivable,
    parse_smtlib,
    render_smtlib,
)
from .collection_inference import CollectionData, collection_member, infer_collection
from .data import LearningData, Substitution
from .smt_backend import BoundedChecker, Bounds, ExternalSmtChecker, ValidityResult
from .solver import (
    CandidateModel,
    RefuteBudget,
    SolverConfig,
    Verdict,
    VerdictKind,
    length_abstract,
    pattern_to_formula,
    refute,
    solve,
    solve_auto,
    solve_collection_mode,
    solve_list_len_mode,
    solve_list_mode,
)
from .stp_inference import (
    InferConfig,
    InferenceResult,
    RewriteState,
    applicable_rewrites,
    infer,
    infer_all,
    reachable_patterns,
    rewrite_step,
    validate,
)
from .pattern_core import (
    Mode,
    NotSolvableError,
    PatternSyntaxError,
    PredStep,
    Rule,
    RuleSet,
    TuplePattern,
    apply_substitution,
    brute_force_member,
    canonical_data,
    equivalent,
    includes,
    is_solvable,
    measure,
    member,
    parse_pattern,
    pred_steps,
    render_pattern,
    residual,
)

__all__ = [
    "BoundedChecker",
    "Bounds",
    "CandidateModel",
    "ChcSystem",
    "Clause",
    "CollectionData",
    "ExternalSmtChecker",
    "InferConfig",
    "InferenceResult",
    "LearningData",
    "Mode",
    "NotSolvableError",
    "ParseError",
    "PatternSyntaxError",
    "PredStep",
    "PredicateAtom",
    "RefuteBudget",
    "RewriteState",
    "Rule",
    "RuleSet",
    "Sample",
    "SampleBudget",
    "SolverConfig",
    "Substitution",
    "TuplePattern",
    "ValidityResult",
    "Verdict",
    "VerdictKind",
    "applicable_rewrites",
    "apply_substitution",
    "bounded_goal_check",
    "brute_force_member",
    "canonical_data",
    "collect_samples",
    "collection_member",
    "derivable",
    "equivalent",
    "includes",
    "infer",
    "infer_all",
    "infer_collection",
    "is_solvable",
    "length_abstract",
    "measure",
    "member",
    "parse_cell",
    "parse_pattern",
    "parse_smtlib",
    "pattern_to_formula",
    "pred_steps",
    "reachable_patterns",
    "refute",
    "render_cell",
    "render_pattern",
    "render_smtlib",
    "residual",
    "rewrite_step",
    "solve",
    "solve_auto",
    "solve_collection_mode",
    "solve_list_len_mode",
    "solve_list_mode",
    "validate",
]

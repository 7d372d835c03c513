"""Applied pi-calculus workbench: terms, processes, normal forms, transitions, equivalences."""

__version__ = "0.1.0"

from .equivalence import (
    EquivVerdict,
    barb_equivalent,
    context_closure_check,
    naive_bisim_oracle,
    static_equivalent,
    weak_labeled_bisim,
)
from .lts import ExplorationConfig, barbs, build_lts, enumerate_transitions, weak_transition
from .normal_form import NormalForm, normalize_process, struct_equiv
from .process_ast import check_correct, format_process
from .rewriting import EquationalTheory, normalize_term, pair_projection_theory, symmetric_encryption_theory
from .syntax import parse_process, parse_term

__all__ = [
    "EquationalTheory",
    "EquivVerdict",
    "ExplorationConfig",
    "NormalForm",
    "barb_equivalent",
    "barbs",
    "build_lts",
    "check_correct",
    "context_closure_check",
    "enumerate_transitions",
    "format_process",
    "naive_bisim_oracle",
    "normalize_process",
    "normalize_term",
    "pair_projection_theory",
    "parse_process",
    "parse_term",
    "static_equivalent",
    "struct_equiv",
    "symmetric_encryption_theory",
    "weak_labeled_bisim",
    "weak_transition",
]

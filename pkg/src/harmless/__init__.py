"""Reasoning with warded existential rules and harmless equality rules."""

from .analysis import analyze
from .chase import ChaseStatus, relaxed_warded_chase, standard_chase, warded_chase
from .egd import check_satisfiability, egd_fixpoint
from .estimator import HarmlessReasoner
from .model import Atom, Instance, Term, atom, const, null, var
from .reason import answer, answer_bcq, answer_cq, chase_h, verify_harmlessness_on_instance
from .syntax import Program, parse_program, print_program

__all__ = [
    "Atom",
    "ChaseStatus",
    "HarmlessReasoner",
    "Instance",
    "Program",
    "Term",
    "analyze",
    "answer",
    "answer_bcq",
    "answer_cq",
    "atom",
    "chase_h",
    "check_satisfiability",
    "const",
    "egd_fixpoint",
    "null",
    "parse_program",
    "print_program",
    "relaxed_warded_chase",
    "standard_chase",
    "var",
    "verify_harmlessness_on_instance",
    "warded_chase",
]

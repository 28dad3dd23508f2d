"""Verification oracles for the error bounds of one fixed-point PGM step."""
from .backends import AnalyticBound, Exhaustive, RandomFalsify, make_backend, search_space_size
from .bisection import BisectionResult, BisectionStats, bisect_bound
from .checks import (check_assumption, check_exit_bound, check_omega, load_witness, save_witness,
                     validate_integer_bits)
from .example import ExampleParams, run_assertion_example
from .pointwise import replay, step_quantities
from .types import BoundQuery, Verdict, VerdictKind, Which, Witness

__all__ = [
    "AnalyticBound", "Exhaustive", "RandomFalsify", "make_backend", "search_space_size",
    "BisectionResult", "BisectionStats", "bisect_bound",
    "check_assumption", "check_exit_bound", "check_omega", "load_witness", "save_witness",
    "validate_integer_bits", "ExampleParams", "run_assertion_example", "replay", "step_quantities",
    "BoundQuery", "Verdict", "VerdictKind", "Which", "Witness",
]

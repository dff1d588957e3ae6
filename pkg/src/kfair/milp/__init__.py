"""Pair-fairness MILP: encoding, branch-and-bound and certification."""

from .bnb import (STATUS_FEASIBLE, STATUS_INFEASIBLE, STATUS_OPTIMAL, STATUS_TIMED_OUT,
                  SolveConfig, SolveResult, SolveStats, solve)
from .certify import (FAIR, UNFAIR, UNKNOWN, Certificate, CounterexampleSeeder, certify,
                      seed_counterexample)
from .encode import encode_pair_fairness, input_box, logit_threshold
from .lp import LinearProgram, LPResult, solve_lp
from .problem import BINARY, CONTINUOUS, EQ, GE, LE, Constraint, LinearExpr, MilpProblem

__all__ = [
    "BINARY", "CONTINUOUS", "EQ", "GE", "LE", "FAIR", "UNFAIR", "UNKNOWN",
    "STATUS_FEASIBLE", "STATUS_INFEASIBLE", "STATUS_OPTIMAL", "STATUS_TIMED_OUT",
    "Certificate", "Constraint", "CounterexampleSeeder", "LPResult",
    "LinearProgram", "LinearExpr", "MilpProblem", "SolveConfig",
    "SolveResult", "SolveStats", "certify", "encode_pair_fairness", "input_box",
    "logit_threshold", "seed_counterexample", "solve", "solve_lp",
]

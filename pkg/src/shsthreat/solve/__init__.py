"""Solver backends and model verification."""
from .backend import (DEFAULT_TIMEOUT, SAT, SOLVER_ENV, UNKNOWN, UNSAT, BackendDescriptor, SolveResult,
                      backend_by_name, builtin_backend, external_backend, find_solver, solve)
from .search import builtin_search
from .smtlib import emit_smtlib, parse_model

__all__ = [
    "DEFAULT_TIMEOUT", "SAT", "SOLVER_ENV", "UNKNOWN", "UNSAT", "BackendDescriptor", "SolveResult",
    "backend_by_name", "builtin_backend", "builtin_search", "emit_smtlib", "external_backend",
    "find_solver", "parse_model", "solve",
]

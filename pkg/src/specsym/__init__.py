"""Speculative symbolic execution for a small integer language."""

from .lang import Program, parse_file, parse_program
from .search import SearchConfig, run, run_pure_dfs, run_speculative_dfs
from .solver import BuiltinSolver, SolverConfig, SolverException, SolverStats

__all__ = [
    "BuiltinSolver",
    "Program",
    "SearchConfig",
    "SolverConfig",
    "SolverException",
    "SolverStats",
    "parse_file",
    "parse_program",
    "run",
    "run_pure_dfs",
    "run_speculative_dfs",
]

__version__ = "0.1.0"

"""Temporal-coherent, graph-optimized patch ranking for weighted-patch tracking."""

from patchrank.model import MemoryFrame, Params, RankingInstance, SolverState
from patchrank.solver import RankingResult, solve

__all__ = [
    "MemoryFrame",
    "Params",
    "RankingInstance",
    "RankingResult",
    "SolverState",
    "solve",
]

__version__ = "0.1.0"

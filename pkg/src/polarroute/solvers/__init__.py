from .adapter import ADAPTER_ENV, AdapterConfig, external_adapter
from .anneal import solve_anneal
from .exhaustive import MAX_EXHAUSTIVE_VARS, solve_exhaustive
from .linegraph import solve_linegraph_dijkstra
from .result import AnnealSchedule, SolverResult

SOLVERS = ("exhaustive", "linegraph", "anneal", "external")

__all__ = [
    "ADAPTER_ENV", "AdapterConfig", "AnnealSchedule", "MAX_EXHAUSTIVE_VARS", "SOLVERS", "SolverResult",
    "external_adapter", "solve_anneal", "solve_exhaustive", "solve_linegraph_dijkstra",
]

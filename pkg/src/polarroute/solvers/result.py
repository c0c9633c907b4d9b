from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from ..errors import ModelError
from ..hexgrid import cell_to_string
from ..model import Assignment, CqmModel, assignment_from_edges, evaluate_objective, violations

TIE_RTOL = 1e-9


@dataclass(frozen=True)
class AnnealSchedule:
    """Annealing controls.

    ``initial_temperature``/``final_temperature`` of None are set automatically
    from probe moves.  ``restarts=None`` keeps restarting until ``time_budget``
    expires.  ``moves_per_sweep=None`` uses max(16, number of binary vars).
    """

    initial_temperature: float | None = None
    final_temperature: float | None = None
    sweeps: int = 50
    restarts: int | None = 16
    time_budget: float | None = None
    seed: int = 0
    moves_per_sweep: int | None = None
    mutation_rate: float = 0.1

    def __post_init__(self):
        t0, t1 = self.initial_temperature, self.final_temperature
        if (t0 is not None and t0 <= 0) or (t1 is not None and t1 <= 0):
            raise ModelError("temperatures must be positive")
        if t0 is not None and t1 is not None and t0 < t1:
            raise ModelError("initial temperature must be >= final temperature")
        if self.sweeps < 1:
            raise ModelError("sweeps must be >= 1")
        if self.restarts is None and self.time_budget is None:
            raise ModelError("unbounded restarts need a time budget")
        if self.restarts is not None and self.restarts < 1:
            raise ModelError("restarts must be >= 1")
        if self.time_budget is not None and self.time_budget <= 0:
            raise ModelError("time budget must be positive")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ModelError("mutation_rate must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolverResult:
    assignment: Any
    objective: float
    feasible: bool
    violations: list
    wall_time: float
    solver_name: str
    seed: int | None = None
    trace: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def to_record(self, include_timing: bool = True) -> dict:
        """JSON-ready record; without timing it is reproducible byte-for-byte."""
        a = self.assignment
        if isinstance(a, Assignment):
            payload = {
                "active_edges": [[cell_to_string(i), cell_to_string(j)] for i, j in a.active_edges()],
                "flows": [[cell_to_string(i), cell_to_string(j), v] for (i, j), v in sorted(a.f.items()) if v > 0],
                "slacks": dict(sorted(a.slacks.items())),
            }
        else:
            payload = {"x": list(a.x), "s1": a.s1, "s2": a.s2}
        rec = {
            "solver": self.solver_name,
            "seed": self.seed,
            "objective": self.objective,
            "feasible": self.feasible,
            "violations": [[n, m] for n, m in self.violations],
            "assignment": payload,
            "info": self.info,
        }
        if include_timing:
            rec["wall_time"] = self.wall_time
        return rec


def tie_key(energy: float, active: Sequence[int]) -> tuple:
    """Ranking key: energy, then fewer active variables, then lexicographic list."""
    return (energy, len(active), tuple(active))


def better(a: tuple, b: tuple | None) -> bool:
    """Is candidate key ``a`` strictly preferred to ``b`` (energies tolerant)?"""
    if b is None:
        return True
    tol = TIE_RTOL * max(1.0, abs(a[0]), abs(b[0]))
    if a[0] < b[0] - tol:
        return True
    if a[0] > b[0] + tol:
        return False
    return a[1:] < b[1:]


def finalize_route(model: CqmModel, active_idx: Sequence[int], name: str, t0: float,
                   seed: int | None = None, path=None, **info) -> SolverResult:
    """Package an edge selection, re-scoring it with the shared evaluator."""
    edges = [model.edges[k] for k in sorted(active_idx)]
    a = assignment_from_edges(model, edges, path)
    obj = evaluate_objective(model, a)
    viol = violations(model, a)
    return SolverResult(a, obj, not viol, viol, time.perf_counter() - t0, name, seed, info=info)


def seed_stream(seed: int, index: int) -> int:
    """Independent integer seed for restart ``index``."""
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, index]).generate_state(2, dtype=np.uint64)[0])


def phi_len(count: int, l_min: int, l_max: int, w_len: float) -> float:
    return w_len * (max(0, l_min - count) ** 2 + max(0, count - l_max) ** 2)


def isclose_rel(a: float, b: float, rtol: float = 1e-9) -> bool:
    return math.isclose(a, b, rel_tol=rtol, abs_tol=rtol)

"""Bridge to an external solver process.

The external program is invoked as ``<command...> MODEL_PATH SOLUTION_PATH``.
It reads the text model dump and writes ``var_name value`` lines (an optional
``objective <value>`` line is compared against our own evaluation).  Exit
status 0 means solved, 2 means the solver proved infeasibility; anything else
is an adapter failure.
"""

from __future__ import annotations

import logging
import math
import os
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import AdapterError
from ..model import (EXCESS_VAR, SHORT_VAR, Assignment, CqmModel, arc_var, aux_var, complete, dump_model,
                     edge_var, evaluate_objective, violations)
from .result import SolverResult

logger = logging.getLogger(__name__)

ADAPTER_ENV = "POLARROUTE_ADAPTER"
DISCREPANCY_RTOL = 1e-6


@dataclass(frozen=True)
class AdapterConfig:
    command: tuple = ()
    timeout: float | None = None
    name: str = "external"
    env: dict = field(default_factory=dict)

    @classmethod
    def from_env(cls, timeout: float | None = None) -> "AdapterConfig":
        raw = os.environ.get(ADAPTER_ENV, "").strip()
        if not raw:
            raise AdapterError(f"no adapter configured; set {ADAPTER_ENV}")
        return cls(tuple(shlex.split(raw)), timeout)


def parse_solution(text: str) -> tuple[dict, float | None]:
    values, reported = {}, None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise AdapterError(f"solution line {lineno}: expected 'name value', got {line!r}")
        try:
            value = float(parts[1])
        except ValueError:
            raise AdapterError(f"solution line {lineno}: bad value {parts[1]!r}") from None
        if parts[0] == "objective":
            reported = value
        else:
            values[parts[0]] = value
    return values, reported


def assignment_from_values(model: CqmModel, values: dict) -> Assignment:
    known = set(model.var_index)
    unknown = sorted(set(values) - known)
    if unknown:
        raise AdapterError(f"solution names unknown variable(s): {', '.join(unknown[:5])}")
    x = {e: values.get(edge_var(e), 0.0) for e in model.edges}
    arcs = [(i, j) for i, j in model.edges] + [(j, i) for i, j in model.edges]
    f = {a: values[arc_var(a)] for a in arcs if arc_var(a) in values}
    aux = {v: values[aux_var(v)] for v in model.vertices if aux_var(v) in values}
    slacks = {}
    if SHORT_VAR in values or EXCESS_VAR in values:
        slacks = {"short": values.get(SHORT_VAR, 0.0), "excess": values.get(EXCESS_VAR, 0.0)}
    return Assignment(x, f, slacks, aux)


def external_adapter(model: CqmModel, endpoint: AdapterConfig | None = None) -> SolverResult:
    endpoint = endpoint or AdapterConfig.from_env()
    if not endpoint.command:
        raise AdapterError("adapter command is empty")
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory(prefix="polarroute-adapter-") as tmp:
        model_path = Path(tmp) / "model.txt"
        sol_path = Path(tmp) / "solution.txt"
        model_path.write_text(dump_model(model))
        try:
            proc = subprocess.run([*endpoint.command, str(model_path), str(sol_path)], capture_output=True,
                                  text=True, timeout=endpoint.timeout, env={**os.environ, **endpoint.env})
        except FileNotFoundError as exc:
            raise AdapterError(f"adapter unavailable: {exc}") from None
        except subprocess.TimeoutExpired:
            raise AdapterError(f"adapter timed out after {endpoint.timeout}s") from None
        if proc.returncode == 2:
            empty = complete(model, Assignment({e: 0 for e in model.edges}))
            obj = evaluate_objective(model, empty)
            return SolverResult(empty, obj, False, [("adapter", 1.0)] + violations(model, empty),
                                time.perf_counter() - t0, endpoint.name, info={"status": "infeasible"})
        if proc.returncode != 0:
            tail = (proc.stderr or "").strip().splitlines()[-3:]
            raise AdapterError(f"adapter exited with status {proc.returncode}: {' | '.join(tail)}")
        if not sol_path.exists():
            raise AdapterError("adapter reported success but wrote no solution file")
        values, reported = parse_solution(sol_path.read_text())

    raw = assignment_from_values(model, values)
    filled = complete(model, raw)
    obj = evaluate_objective(model, filled)
    viol = violations(model, filled)
    info = {"status": "solved"}
    if reported is not None:
        info["reported_objective"] = reported
        if not math.isclose(reported, obj, rel_tol=DISCREPANCY_RTOL, abs_tol=DISCREPANCY_RTOL):
            logger.warning("adapter objective %r differs from evaluated %r", reported, obj)
            info["discrepancy"] = True
    return SolverResult(filled, obj, not viol, viol, time.perf_counter() - t0, endpoint.name, info=info)

"""Synthetic cardinality-constrained quadratic benchmark with slack-softened constraints.

    min  sum c_i x_i + sum_{i<j} Q_ij x_i x_j + P (s1 + s2)
    s.t. L <= sum x_i <= U
         T1 - (sum w_i x_i)^2 <= s1,  T2 - sum_{i<j} R_ij x_i x_j <= s2,  s >= 0
"""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ModelError

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ("n", "density", "quad_terms", "solver", "seed", "objective", "feasible", "wall_time_s", "gap")
ORACLE_MAX_N = 22


@dataclass(frozen=True)
class SynthParams:
    """Distributional knobs; all are echoed into reports."""

    c_range: tuple = (-10.0, 10.0)
    q_range: tuple = (-5.0, 5.0)
    w_range: tuple = (0.0, 1.0)
    r_range: tuple = (-5.0, 5.0)
    lower_frac: float = 0.25
    upper_frac: float = 0.75
    threshold_percentile: float = 50.0
    threshold_samples: int = 1000
    slack_penalty: float = 10.0

    def __post_init__(self):
        if self.slack_penalty <= 0:
            raise ModelError("slack_penalty must be positive")
        if not 0 < self.lower_frac <= self.upper_frac <= 1:
            raise ModelError("need 0 < lower_frac <= upper_frac <= 1")
        for name in ("c_range", "q_range", "w_range", "r_range"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ModelError(f"{name} must be (low, high)")
            object.__setattr__(self, name, (float(lo), float(hi)))

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict | None) -> "SynthParams":
        d = dict(d or {})
        for k in ("c_range", "q_range", "w_range", "r_range"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class SyntheticInstance:
    n: int
    density: float
    seed: int
    c: np.ndarray
    Q: np.ndarray  # strictly upper-triangular dense
    w: np.ndarray
    R: np.ndarray  # strictly upper-triangular dense
    L: int
    U: int
    T1: float
    T2: float
    slack_penalty: float
    params: SynthParams = field(default_factory=SynthParams)

    @property
    def quad_terms(self) -> int:
        return int(np.count_nonzero(self.Q))


@dataclass(frozen=True)
class SynthSolution:
    x: tuple
    s1: float
    s2: float


def _upper(rng, n, density, lo, hi) -> np.ndarray:
    iu = np.triu_indices(n, 1)
    mask = rng.random(iu[0].size) < density
    vals = rng.uniform(lo, hi, iu[0].size)
    if not mask.any():
        # keep at least one coupling so the instance stays quadratic
        mask[rng.integers(iu[0].size)] = True
    out = np.zeros((n, n))
    out[iu] = np.where(mask, vals, 0.0)
    return out


def _quad_form(X: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Row-wise x^T U x for a strictly upper-triangular U."""
    return np.einsum("ij,ij->i", X @ U, X)


def generate(n: int, density: float, seed: int, params: SynthParams | None = None) -> SyntheticInstance:
    params = params or SynthParams()
    if n < 2:
        raise ModelError(f"need n >= 2, got {n}")
    if not (0.0 < density <= 1.0) or math.isnan(density):
        raise ModelError(f"density must lie in (0, 1], got {density}")
    rng = np.random.default_rng(seed)
    c = rng.uniform(*params.c_range, n)
    Q = _upper(rng, n, density, *params.q_range)
    w = rng.uniform(*params.w_range, n)
    R = _upper(rng, n, density, *params.r_range)
    X = (rng.random((params.threshold_samples, n)) < 0.5).astype(float)
    T1 = float(np.percentile((X @ w) ** 2, params.threshold_percentile))
    T2 = float(np.percentile(_quad_form(X, R), params.threshold_percentile))
    L = math.ceil(n * params.lower_frac)
    U = math.ceil(n * params.upper_frac)
    return SyntheticInstance(n, float(density), int(seed), c, Q, w, R, L, U, T1, T2,
                             float(params.slack_penalty), params)


def evaluate(inst: SyntheticInstance, x) -> tuple[float, float, float, bool]:
    """Objective with optimal slacks, the slacks, and the cardinality check."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != inst.n:
        raise ModelError(f"assignment has {x.size} entries, instance has {inst.n}")
    s1 = max(0.0, inst.T1 - float(inst.w @ x) ** 2)
    s2 = max(0.0, inst.T2 - float(x @ inst.R @ x))
    obj = float(inst.c @ x) + float(x @ inst.Q @ x) + inst.slack_penalty * (s1 + s2)
    k = int(round(x.sum()))
    return obj, s1, s2, inst.L <= k <= inst.U


def evaluate_batch(inst: SyntheticInstance, X: np.ndarray) -> np.ndarray:
    """Objectives (optimal slacks) for each row of a 0/1 matrix."""
    X = np.asarray(X, dtype=float)
    s1 = np.maximum(0.0, inst.T1 - (X @ inst.w) ** 2)
    s2 = np.maximum(0.0, inst.T2 - _quad_form(X, inst.R))
    return X @ inst.c + _quad_form(X, inst.Q) + inst.slack_penalty * (s1 + s2)


# ---------------------------------------------------------------------------
# dump and structural lint


def dump_instance(inst: SyntheticInstance) -> str:
    r = repr
    lines = ["synth 1", f"n {inst.n}", f"seed {inst.seed}", f"density {r(inst.density)}"]
    for k, v in inst.params.to_dict().items():
        vals = v if isinstance(v, list) else [v]
        lines.append(f"param {k} " + " ".join(r(float(t)) for t in vals))
    lines += [f"L {inst.L}", f"U {inst.U}", f"T1 {r(inst.T1)}", f"T2 {r(inst.T2)}",
              f"slack_penalty {r(inst.slack_penalty)}"]
    lines += [f"c {i} {r(float(v))}" for i, v in enumerate(inst.c)]
    lines += [f"q {i} {j} {r(float(inst.Q[i, j]))}" for i, j in zip(*np.nonzero(inst.Q))]
    lines += [f"w {i} {r(float(v))}" for i, v in enumerate(inst.w)]
    lines += [f"r {i} {j} {r(float(inst.R[i, j]))}" for i, j in zip(*np.nonzero(inst.R))]
    return "\n".join(lines) + "\n"


def lint_dump(text: str) -> list[str]:
    """Structural problems in an instance dump; empty when well formed.

    Checks for binary activations (one c entry per variable), at least one
    quadratic coupling, slack-softened constraints (positive penalty, T1/T2,
    w and r entries) and cardinality bounds L <= U <= n.
    """
    head: dict = {}
    counts = {"c": 0, "q": 0, "w": 0, "r": 0}
    problems = []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        tag = parts[0]
        if tag in counts:
            counts[tag] += 1
            if tag in ("q", "r") and not int(parts[1]) < int(parts[2]):
                problems.append(f"line {lineno}: {tag} entry not upper-triangular")
            if not math.isfinite(float(parts[-1])):
                problems.append(f"line {lineno}: non-finite value")
        elif tag in ("n", "L", "U", "seed"):
            head[tag] = int(parts[1])
        elif tag in ("T1", "T2", "slack_penalty", "density"):
            head[tag] = float(parts[1])
    for key in ("n", "L", "U", "T1", "T2", "slack_penalty"):
        if key not in head:
            problems.append(f"missing {key}")
    if problems:
        return problems
    n = head["n"]
    if counts["c"] != n:
        problems.append(f"expected {n} binary activations, found {counts['c']}")
    if counts["q"] == 0:
        problems.append("no quadratic couplings")
    if counts["w"] != n or counts["r"] == 0:
        problems.append("soft quadratic constraints incomplete")
    if head["slack_penalty"] <= 0:
        problems.append("slack penalty must be positive")
    if not head["L"] <= head["U"] <= n:
        problems.append("cardinality bounds violate L <= U <= n")
    return problems


# ---------------------------------------------------------------------------
# benchmark protocol


@dataclass
class BenchRow:
    n: int
    density: float
    quad_terms: int
    solver: str
    seed: int
    objective: float
    feasible: bool
    wall_time_s: float
    gap: float | None = None
    error: str | None = None

    def csv_fields(self) -> list:
        gap = "" if self.gap is None else repr(self.gap)
        return [self.n, repr(self.density), self.quad_terms, self.solver, self.seed,
                repr(self.objective), int(self.feasible), f"{self.wall_time_s:.6f}", gap]


@dataclass
class BenchReport:
    rows: list
    params: dict = field(default_factory=dict)

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(REPORT_COLUMNS)
            for row in self.rows:
                out.writerow(row.csv_fields())

    def aggregate(self) -> dict:
        """(quad_terms, solver) -> mean objective, feasible rate, mean time, runs."""
        groups: dict = {}
        for row in self.rows:
            groups.setdefault((row.quad_terms, row.solver), []).append(row)
        out = {}
        for key in sorted(groups):
            rows = groups[key]
            objs = [r.objective for r in rows if math.isfinite(r.objective)]
            out[key] = {
                "mean_objective": (math.fsum(objs) / len(objs)) if objs else math.nan,
                "feasible_rate": sum(r.feasible for r in rows) / len(rows),
                "mean_wall_time_s": math.fsum(r.wall_time_s for r in rows) / len(rows),
                "runs": len(rows),
            }
        return out


def relative_gap(objective: float, optimum: float) -> float:
    return (objective - optimum) / max(abs(optimum), 1e-12)


def run_benchmark(sizes: Sequence[int], densities: Sequence[float], solvers: Sequence[str],
                  seeds: Sequence[int], *, schedule=None, params: SynthParams | None = None,
                  workers: int = 1, anneal_workers: int = 1) -> BenchReport:
    """Run every (size, density, seed, solver) combination.

    The exhaustive oracle supplies gaps wherever n <= 22, whether or not it is
    among the requested solvers.  A failing solver is recorded on its row and
    the campaign continues.
    """
    from .solvers import AnnealSchedule, solve_anneal, solve_exhaustive

    if not sizes or not densities or not solvers or not seeds:
        raise ModelError("sizes, densities, solvers and seeds must each be non-empty")
    known = {"exhaustive", "anneal"}
    bad = [s for s in solvers if s not in known]
    if bad:
        raise ModelError(f"unknown solver(s) {bad}; choose from {sorted(known)}")
    schedule = schedule or AnnealSchedule()
    params = params or SynthParams()

    def run_one(name, inst, seed):
        if name == "exhaustive":
            return solve_exhaustive(inst)
        sched = AnnealSchedule(**{**schedule.to_dict(), "seed": seed})
        return solve_anneal(inst, sched, workers=anneal_workers)

    def cell(job):
        n, density, seed = job
        inst = generate(n, density, seed, params)
        oracle = None
        if n <= ORACLE_MAX_N:
            try:
                oracle = solve_exhaustive(inst)
            except Exception as exc:  # recorded, campaign continues
                logger.warning("oracle failed on n=%d seed=%d: %s", n, seed, exc)
        rows = []
        for name in solvers:
            try:
                res = oracle if (name == "exhaustive" and oracle is not None) else run_one(name, inst, seed)
                gap = None
                if oracle is not None and oracle.feasible:
                    gap = relative_gap(res.objective, oracle.objective)
                rows.append(BenchRow(n, density, inst.quad_terms, name, seed, res.objective,
                                     res.feasible, res.wall_time, gap))
            except Exception as exc:
                logger.warning("%s failed on n=%d seed=%d: %s", name, n, seed, exc)
                rows.append(BenchRow(n, density, inst.quad_terms, name, seed, math.nan, False, 0.0,
                                     None, f"{type(exc).__name__}: {exc}"))
        return rows

    jobs = [(n, d, s) for n in sizes for d in densities for s in seeds]
    start = time.perf_counter()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            chunks = list(pool.map(cell, jobs))
    else:
        chunks = [cell(j) for j in jobs]
    logger.info("benchmark: %d runs in %.1fs", sum(map(len, chunks)), time.perf_counter() - start)
    meta = {"params": params.to_dict(), "schedule": schedule.to_dict()}
    return BenchReport([r for rows in chunks for r in rows], meta)

"""Brute-force oracle over every binary assignment (small models only)."""

from __future__ import annotations

import time
from functools import singledispatch

import numpy as np

from ..errors import SolverRefusal
from ..model import CqmModel
from ..synthbench import SyntheticInstance, evaluate_batch
from .result import SolverResult, TIE_RTOL, finalize_route
from .synth import synth_result

MAX_EXHAUSTIVE_VARS = 22
CHUNK = 1 << 15


def _bits(start: int, stop: int, m: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    return ((idx[:, None] >> np.arange(m, dtype=np.int64)) & 1).astype(bool)


class _Best:
    """Running minimum with the deterministic tie-break.

    Keeps, for the lowest energy seen, all codes within tolerance; the final
    pick is by (fewer active, lexicographically smallest active index list).
    """

    def __init__(self):
        self.energy = np.inf
        self.codes: list[tuple[float, int]] = []

    def offer(self, energies: np.ndarray, codes: np.ndarray):
        if energies.size == 0:
            return
        low = float(energies.min())
        tol = TIE_RTOL * max(1.0, abs(low))
        if low < self.energy - tol:
            self.energy = low
            self.codes = [c for c in self.codes if c[0] <= low + tol]
        tol = TIE_RTOL * max(1.0, abs(self.energy))
        keep = energies <= self.energy + tol
        self.codes.extend(zip(energies[keep].tolist(), codes[keep].tolist()))
        self.energy = min(self.energy, low)

    def pick(self, m: int) -> int | None:
        if not self.codes:
            return None
        tol = TIE_RTOL * max(1.0, abs(self.energy))
        cands = [c for e, c in self.codes if e <= self.energy + tol]

        def key(code):
            active = [k for k in range(m) if code >> k & 1]
            return (len(active), active)

        return min(cands, key=key)


@singledispatch
def solve_exhaustive(model) -> SolverResult:
    raise TypeError(f"no exhaustive solver for {type(model).__name__}")


@solve_exhaustive.register
def _(model: CqmModel) -> SolverResult:
    """Enumerate all 2^m edge selections.

    Indicators and slacks take their closed-form optima; flow feasibility is an
    s-g reachability check on the selected edges.
    """
    m = model.num_edge_vars
    if m > MAX_EXHAUSTIVE_VARS:
        raise SolverRefusal(f"exhaustive search capped at {MAX_EXHAUSTIVE_VARS} binary variables, model has {m}")
    t0 = time.perf_counter()
    w = model.weights
    vid = {v: k for k, v in enumerate(model.vertices)}
    nv = len(vid)
    eu = np.array([vid[i] for i, _ in model.edges], dtype=np.int64)
    ev = np.array([vid[j] for _, j in model.edges], dtype=np.int64)
    cost = np.array(model.edge_cost, dtype=float)
    inc = np.zeros((m, nv), dtype=np.int64)
    inc[np.arange(m), eu] = 1
    inc[np.arange(m), ev] = 1
    pa = np.array([a for a, _ in model.turn], dtype=np.int64)
    pb = np.array([b for _, b in model.turn], dtype=np.int64)
    om = np.array(list(model.turn.values()), dtype=float)
    terminal = np.zeros(nv, dtype=bool)
    s, g = vid[model.s], vid[model.g]
    terminal[[s, g]] = True
    lmin, lmax = model.bounds.l_min, model.bounds.l_max

    feasible_best, any_best = _Best(), _Best()
    for start in range(0, 1 << m, CHUNK):
        stop = min(1 << m, start + CHUNK)
        X = _bits(start, stop, m)
        Xf = X.astype(float)
        energy = Xf @ cost
        if om.size:
            energy += (X[:, pa] & X[:, pb]).astype(float) @ om
        deg = X.astype(np.int64) @ inc
        phi = np.where(terminal, (deg - 1) ** 2, np.minimum(deg ** 2, (deg - 2) ** 2))
        cnt = X.sum(axis=1)
        energy += w.w_deg * phi.sum(axis=1)
        energy += w.w_len * (np.maximum(0, lmin - cnt) ** 2 + np.maximum(0, cnt - lmax) ** 2)

        reach = np.zeros((stop - start, nv), dtype=bool)
        reach[:, s] = True
        while True:
            before = reach.copy()
            for k in range(m):
                reach[:, ev[k]] |= reach[:, eu[k]] & X[:, k]
                reach[:, eu[k]] |= reach[:, ev[k]] & X[:, k]
            if np.array_equal(before, reach):
                break
        ok = reach[:, g]
        codes = np.arange(start, stop, dtype=np.int64)
        feasible_best.offer(energy[ok], codes[ok])
        any_best.offer(energy, codes)

    code = feasible_best.pick(m)
    if code is None:
        code = any_best.pick(m)
    active = [k for k in range(m) if code >> k & 1]
    return finalize_route(model, active, "exhaustive", t0, enumerated=1 << m)


@solve_exhaustive.register
def _(inst: SyntheticInstance) -> SolverResult:
    n = inst.n
    if n > MAX_EXHAUSTIVE_VARS:
        raise SolverRefusal(f"exhaustive search capped at {MAX_EXHAUSTIVE_VARS} binary variables, instance has {n}")
    t0 = time.perf_counter()
    feasible_best, any_best = _Best(), _Best()
    for start in range(0, 1 << n, CHUNK):
        stop = min(1 << n, start + CHUNK)
        X = _bits(start, stop, n)
        energy = evaluate_batch(inst, X)
        cnt = X.sum(axis=1)
        ok = (cnt >= inst.L) & (cnt <= inst.U)
        codes = np.arange(start, stop, dtype=np.int64)
        feasible_best.offer(energy[ok], codes[ok])
        any_best.offer(energy, codes)
    code = feasible_best.pick(n)
    if code is None:
        code = any_best.pick(n)
    x = tuple(int(code >> k & 1) for k in range(n))
    return synth_result(inst, x, "exhaustive", t0, None, enumerated=1 << n)


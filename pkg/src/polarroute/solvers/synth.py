"""Annealing and result packaging for synthetic benchmark instances."""

from __future__ import annotations

import math
import random
import time

import numpy as np

from ..synthbench import SyntheticInstance, SynthSolution, evaluate
from .result import AnnealSchedule, SolverResult

PROBE_MOVES = 100
ACCEPT_TARGET = 0.8


def synth_result(inst: SyntheticInstance, x, name: str, t0: float, seed, **info) -> SolverResult:
    x = tuple(int(v) for v in x)
    obj, s1, s2, ok = evaluate(inst, x)
    viol = []
    if not ok:
        k = sum(x)
        viol.append(("cardinality", float(max(inst.L - k, k - inst.U))))
    return SolverResult(SynthSolution(x, s1, s2), obj, ok, viol, time.perf_counter() - t0, name, seed, info=info)


class SynthAnnealer:
    """Incremental-energy annealer with the cardinality window as a hard filter.

    Moves are single flips that stay inside [L, U] and, with probability 1/2,
    swaps (one variable in, one out) which keep the cardinality unchanged.
    """

    def __init__(self, inst: SyntheticInstance):
        self.inst = inst
        self.n = inst.n
        self.c = inst.c.tolist()
        self.Qs = inst.Q + inst.Q.T
        self.Rs = inst.R + inst.R.T
        self.w = inst.w.tolist()
        self.P = inst.slack_penalty
        self.T1, self.T2 = inst.T1, inst.T2

    # -- state ---------------------------------------------------------
    def reset(self, x):
        self.x = np.array(x, dtype=np.int8)
        xf = self.x.astype(float)
        self.hq = self.Qs @ xf
        self.hr = self.Rs @ xf
        self.S = float(self.inst.w @ xf)
        self.rq = float(xf @ self.inst.R @ xf)
        self.k = int(self.x.sum())
        self.energy = evaluate(self.inst, self.x)[0]

    def _slack(self, S, rq):
        return self.P * (max(0.0, self.T1 - S * S) + max(0.0, self.T2 - rq))

    def flip_delta(self, i: int):
        sgn = 1 - 2 * int(self.x[i])
        S = self.S + sgn * self.w[i]
        rq = self.rq + sgn * float(self.hr[i])
        d = sgn * (self.c[i] + float(self.hq[i])) + self._slack(S, rq) - self._slack(self.S, self.rq)
        return d, S, rq

    def flip(self, i: int, d: float, S: float, rq: float):
        sgn = 1 - 2 * int(self.x[i])
        self.x[i] += sgn
        self.hq += sgn * self.Qs[i]
        self.hr += sgn * self.Rs[i]
        self.S, self.rq = S, rq
        self.k += sgn
        self.energy += d

    # -- moves -----------------------------------------------------------
    def propose(self, rng: random.Random):
        """Returns (delta, undo) after applying a move, or None if no legal move."""
        inst = self.inst
        if rng.random() < 0.5 and 0 < self.k < self.n:
            on = np.flatnonzero(self.x)
            off = np.flatnonzero(self.x == 0)
            i = int(off[rng.randrange(off.size)])
            j = int(on[rng.randrange(on.size)])
            d1, S, rq = self.flip_delta(i)
            self.flip(i, d1, S, rq)
            d2, S, rq = self.flip_delta(j)
            self.flip(j, d2, S, rq)
            return d1 + d2, (j, i)
        i = rng.randrange(self.n)
        if not inst.L <= self.k + 1 - 2 * int(self.x[i]) <= inst.U:
            return None
        d, S, rq = self.flip_delta(i)
        self.flip(i, d, S, rq)
        return d, (i,)

    def undo(self, idx):
        for i in idx:
            d, S, rq = self.flip_delta(i)
            self.flip(i, d, S, rq)

    def random_start(self, rng: random.Random):
        k = rng.randint(self.inst.L, self.inst.U)
        on = set(rng.sample(range(self.n), k))
        self.reset([1 if i in on else 0 for i in range(self.n)])


def anneal_synth(inst: SyntheticInstance, schedule: AnnealSchedule, restart: int, rng_seed: int,
                 deadline: float | None):
    """One annealing restart.  Returns (best energy, best x, trace, T0)."""
    rng = random.Random(rng_seed)
    ann = SynthAnnealer(inst)
    ann.random_start(rng)
    start_x = ann.x.copy()

    t0 = schedule.initial_temperature
    if t0 is None:
        ups = []
        for _ in range(PROBE_MOVES):
            mv = ann.propose(rng)
            if mv is None:
                continue
            d, undo = mv
            if d > 0:
                ups.append(d)
            ann.undo(undo)
        t0 = (-(sum(ups) / len(ups)) / math.log(ACCEPT_TARGET)) if ups else 1.0
        ann.reset(start_x)
    t1 = schedule.final_temperature or t0 * 1e-3
    t1 = min(t1, t0)
    decay = (t1 / t0) ** (1.0 / max(1, schedule.sweeps - 1))
    moves = schedule.moves_per_sweep or max(16, ann.n)

    best_e, best_x = ann.energy, ann.x.copy()
    trace = []
    T = t0
    for _ in range(schedule.sweeps):
        for _ in range(moves):
            mv = ann.propose(rng)
            if mv is None:
                continue
            d, undo = mv
            if d <= 0 or rng.random() < math.exp(-d / T):
                if ann.energy < best_e - 1e-12:
                    best_e, best_x = ann.energy, ann.x.copy()
            else:
                ann.undo(undo)
        trace.append(best_e)
        T *= decay
        if deadline is not None and time.perf_counter() >= deadline:
            break
    return best_e, tuple(int(v) for v in best_x), trace, t0

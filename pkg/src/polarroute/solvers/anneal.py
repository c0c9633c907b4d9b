"""Simulated-annealing solver with path-aware moves.

Restarts are independent: each owns a ``random.Random`` stream derived from
(seed, restart index), so the merged result does not depend on how restarts
are scheduled across threads.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import random
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from functools import singledispatch

from ..model import CqmModel
from ..synthbench import SyntheticInstance, evaluate
from .result import AnnealSchedule, SolverResult, better, finalize_route, phi_len, seed_stream, tie_key
from .synth import ACCEPT_TARGET, PROBE_MOVES, anneal_synth, synth_result

logger = logging.getLogger(__name__)

MAX_SPAN = 8
BFS_LIMIT = 4000


class RouteAnnealer:
    """Edge-selection state with O(degree) incremental energy updates."""

    def __init__(self, model: CqmModel):
        self.model = model
        vid = {v: k for k, v in enumerate(model.vertices)}
        self.nv = len(vid)
        self.m = model.num_edge_vars
        self.eu = [vid[i] for i, _ in model.edges]
        self.ev = [vid[j] for _, j in model.edges]
        self.cost = list(model.edge_cost)
        self.tn = model.turn_neighbors
        self.adj = [[] for _ in range(self.nv)]
        for k, (u, v) in enumerate(zip(self.eu, self.ev)):
            self.adj[u].append((v, k))
            self.adj[v].append((u, k))
        self.edge_of = {}
        for k, (u, v) in enumerate(zip(self.eu, self.ev)):
            self.edge_of[(u, v)] = k
            self.edge_of[(v, u)] = k
        self.s, self.g = vid[model.s], vid[model.g]
        self.terminal = [False] * self.nv
        self.terminal[self.s] = self.terminal[self.g] = True
        w = model.weights
        self.wd, self.wl = w.w_deg, w.w_len
        self.lmin, self.lmax = model.bounds.l_min, model.bounds.l_max

    # -- state -----------------------------------------------------------
    def reset(self, active):
        self.on = bytearray(self.m)
        self.deg = [0] * self.nv
        self.count = 0
        self.act: list = []
        self.pos: dict = {}
        for e in active:
            self._toggle(e)
        self.energy = self.full_energy()
        self._path = None  # None: unknown, False: no s-g path, list: vertex path
        self._path_edges = set()

    def full_energy(self) -> float:
        on = self.on
        total = [self.cost[e] for e in self.act]
        total += [om for e in self.act for e2, om in self.tn[e] if e2 > e and on[e2]]
        total += [self.phi(v, k) for v, k in enumerate(self.deg)]
        total.append(phi_len(self.count, self.lmin, self.lmax, self.wl))
        return math.fsum(total)

    def phi(self, v: int, k: int) -> float:
        if self.terminal[v]:
            return self.wd * (k - 1) ** 2
        return self.wd * min(k * k, (k - 2) ** 2)

    def delta(self, e: int) -> float:
        sgn = -1 if self.on[e] else 1
        d = self.cost[e]
        on = self.on
        for e2, om in self.tn[e]:
            if on[e2]:
                d += om
        d *= sgn
        u, v = self.eu[e], self.ev[e]
        du, dv = self.deg[u], self.deg[v]
        d += self.phi(u, du + sgn) - self.phi(u, du) + self.phi(v, dv + sgn) - self.phi(v, dv)
        n = self.count
        d += phi_len(n + sgn, self.lmin, self.lmax, self.wl) - phi_len(n, self.lmin, self.lmax, self.wl)
        return d

    def _toggle(self, e: int):
        u, v = self.eu[e], self.ev[e]
        if self.on[e]:
            self.on[e] = 0
            self.deg[u] -= 1
            self.deg[v] -= 1
            self.count -= 1
            k = self.pos.pop(e)
            last = self.act.pop()
            if last != e:
                self.act[k] = last
                self.pos[last] = k
        else:
            self.on[e] = 1
            self.deg[u] += 1
            self.deg[v] += 1
            self.count += 1
            self.pos[e] = len(self.act)
            self.act.append(e)

    def toggle(self, e: int, d: float):
        removing = bool(self.on[e])
        self._toggle(e)
        self.energy += d
        if removing:
            if self._path and e in self._path_edges:
                self._path = None
        elif self._path is False:
            self._path = None

    # -- connectivity ------------------------------------------------------
    def path(self):
        """Fewest-hop s-g path over active edges (vertex indices), cached."""
        if self._path is None:
            self._path = self._bfs_active(skip=None) or False
            if self._path:
                self._path_edges = {self.edge_of[(a, b)] for a, b in zip(self._path, self._path[1:])}
        return self._path or None

    def _bfs_active(self, skip):
        prev = {self.s: -1}
        queue = deque([self.s])
        on, g = self.on, self.g
        while queue:
            u = queue.popleft()
            if u == g:
                out = [u]
                while prev[out[-1]] != -1:
                    out.append(prev[out[-1]])
                return out[::-1]
            for v, e in self.adj[u]:
                if on[e] and e != skip and v not in prev:
                    prev[v] = u
                    queue.append(v)
        return None

    def removal_keeps_path(self, e: int) -> bool:
        p = self.path()
        if p is None or e not in self._path_edges:
            return True
        return self._bfs_active(skip=e) is not None

    def bfs(self, a: int, b: int, forbidden, rng: random.Random):
        """Shortest a-b lattice path avoiding ``forbidden``; random tie-break."""
        prev = {a: -1}
        queue = deque([a])
        while queue and len(prev) < BFS_LIMIT:
            u = queue.popleft()
            if u == b:
                out = [u]
                while prev[out[-1]] != -1:
                    out.append(prev[out[-1]])
                return out[::-1]
            nb = self.adj[u]
            k0 = rng.randrange(len(nb))
            for t in range(len(nb)):
                v = nb[(k0 + t) % len(nb)][0]
                if v not in prev and v not in forbidden:
                    prev[v] = u
                    queue.append(v)
        return None

    def dijkstra(self, weights):
        """Cheapest s-g path under per-edge ``weights`` (ties by vertex index)."""
        dist = {self.s: 0.0}
        prev = {self.s: -1}
        heap = [(0.0, self.s)]
        done = set()
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            if u == self.g:
                out = [u]
                while prev[out[-1]] != -1:
                    out.append(prev[out[-1]])
                return out[::-1]
            for v, e in self.adj[u]:
                nd = d + weights[e]
                if v not in done and nd < dist.get(v, math.inf):
                    dist[v] = nd
                    prev[v] = u
                    heapq.heappush(heap, (nd, v))
        return None

    def path_edges(self, verts):
        return [self.edge_of[(a, b)] for a, b in zip(verts, verts[1:])]

    # -- moves -------------------------------------------------------------
    def propose(self, rng: random.Random, mutation_rate: float):
        """Apply a random move; returns (delta, edges toggled) or None."""
        if rng.random() < mutation_rate:
            mv = self._mutate(rng)
            if mv is not None:
                return mv
        return self._flip(rng)

    def _flip(self, rng):
        if self.act:
            e0 = self.act[rng.randrange(len(self.act))]
            v = self.eu[e0] if rng.random() < 0.5 else self.ev[e0]
            nb = self.adj[v]
            e = nb[rng.randrange(len(nb))][1]
        else:
            e = rng.randrange(self.m)
        if self.on[e] and not self.removal_keeps_path(e):
            return None
        d = self.delta(e)
        self.toggle(e, d)
        return d, [e]

    def _mutate(self, rng):
        path = self.path()
        if path is None:
            return None
        hops = len(path) - 1
        span = rng.randint(1, min(hops, MAX_SPAN))
        i = rng.randint(0, hops - span)
        j = i + span
        a, b = path[i], path[j]
        forbidden = set(path[:i]) | set(path[j + 1:])
        if rng.random() < 0.5:
            alt = self.bfs(a, b, forbidden, rng)
        else:
            inner = path[i + 1:j] or [a]
            via = inner[rng.randrange(len(inner))]
            for _ in range(rng.randint(1, 2)):
                nb = self.adj[via]
                via = nb[rng.randrange(len(nb))][0]
            if via in forbidden or via == a or via == b:
                return None
            first = self.bfs(a, via, forbidden | {b}, rng)
            if first is None:
                return None
            second = self.bfs(via, b, forbidden | set(first[:-1]), rng)
            alt = None if second is None else first + second[1:]
        if alt is None or alt == path[i:j + 1]:
            return None
        old = self.path_edges(path[i:j + 1])
        new = self.path_edges(alt)
        newset = set(new)
        changed = [e for e in new if not self.on[e]] + [e for e in old if e not in newset]
        total = 0.0
        for e in changed:
            d = self.delta(e)
            self.toggle(e, d)
            total += d
        self._path = None
        return total, changed

    def undo(self, changed):
        for e in reversed(changed):
            self.toggle(e, self.delta(e))


def _anneal_route(model: CqmModel, schedule: AnnealSchedule, restart: int, deadline):
    rng = random.Random(seed_stream(schedule.seed, restart))
    ann = RouteAnnealer(model)
    if restart % 3 == 0:
        start = ann.dijkstra(ann.cost)
    elif restart % 3 == 1:
        start = ann.dijkstra([c * (0.5 + rng.random()) for c in ann.cost])
    else:
        start = ann.bfs(ann.s, ann.g, set(), rng)
    start_edges = ann.path_edges(start) if start else []
    ann.reset(start_edges)

    t0 = schedule.initial_temperature
    if t0 is None:
        ups = []
        for _ in range(PROBE_MOVES):
            mv = ann.propose(rng, schedule.mutation_rate)
            if mv is None:
                continue
            if mv[0] > 0:
                ups.append(mv[0])
            ann.undo(mv[1])
        t0 = (-(sum(ups) / len(ups)) / math.log(ACCEPT_TARGET)) if ups else 1.0
        ann.reset(start_edges)
    t1 = min(schedule.final_temperature or t0 * 1e-3, t0)
    decay = (t1 / t0) ** (1.0 / max(1, schedule.sweeps - 1))
    moves = schedule.moves_per_sweep or max(16, ann.m)

    def rank():
        return (ann.path() is None, ann.energy)

    best, best_edges = rank(), sorted(ann.act)
    trace = []
    T = t0
    for _ in range(schedule.sweeps):
        for _ in range(moves):
            mv = ann.propose(rng, schedule.mutation_rate)
            if mv is None:
                continue
            d, changed = mv
            if d <= 0 or rng.random() < math.exp(-d / T):
                if best[0] or ann.energy < best[1] - 1e-12:
                    r = rank()
                    if r[0] < best[0] or (r[0] == best[0] and r[1] < best[1] - 1e-12):
                        best, best_edges = r, sorted(ann.act)
            else:
                ann.undo(changed)
        trace.append(best[1])
        T *= decay
        if deadline is not None and time.perf_counter() >= deadline:
            break
    # exact re-score so that restarts compare on identical arithmetic
    ann.reset(best_edges)
    return ann.path() is not None, tie_key(ann.energy, best_edges), best_edges, trace, t0


def _run_restarts(run_one, schedule: AnnealSchedule, workers: int, deadline):
    """Execute restarts; returns results ordered by restart index."""
    limit = schedule.restarts

    if workers <= 1:
        out = []
        for r in itertools.count():
            if limit is not None and r >= limit:
                break
            if r > 0 and deadline is not None and time.perf_counter() >= deadline:
                break
            out.append(run_one(r))
        return out

    if limit is not None and deadline is None:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(run_one, range(limit)))

    lock = threading.Lock()
    counter = itertools.count()
    results = {}

    def worker():
        while True:
            with lock:
                r = next(counter)
            if limit is not None and r >= limit:
                return
            if r > 0 and time.perf_counter() >= deadline:
                return
            res = run_one(r)
            with lock:
                results[r] = res

    with ThreadPoolExecutor(workers) as pool:
        for f in [pool.submit(worker) for _ in range(workers)]:
            f.result()
    return [results[r] for r in sorted(results)]


@singledispatch
def solve_anneal(model, schedule: AnnealSchedule | None = None, workers: int = 1) -> SolverResult:
    raise TypeError(f"no annealer for {type(model).__name__}")


@solve_anneal.register
def _(model: CqmModel, schedule: AnnealSchedule | None = None, workers: int = 1) -> SolverResult:
    schedule = schedule or AnnealSchedule()
    t0 = time.perf_counter()
    deadline = t0 + schedule.time_budget if schedule.time_budget else None
    runs = _run_restarts(lambda r: _anneal_route(model, schedule, r, deadline), schedule, workers, deadline)
    best = None
    any_feasible = any(run[0] for run in runs)
    for r, (ok, key, edges, trace, temp) in enumerate(runs):
        if ok == any_feasible and better(key, best and best[0]):
            best = (key, edges, trace, temp, r)
    key, edges, trace, temp, r = best
    res = finalize_route(model, edges, "anneal", t0, schedule.seed, restarts=len(runs),
                         best_restart=r, initial_temperature=temp)
    res.trace = trace
    return res


@solve_anneal.register
def _(inst: SyntheticInstance, schedule: AnnealSchedule | None = None, workers: int = 1) -> SolverResult:
    schedule = schedule or AnnealSchedule()
    t0 = time.perf_counter()
    deadline = t0 + schedule.time_budget if schedule.time_budget else None

    def run_one(r):
        e, x, trace, temp = anneal_synth(inst, schedule, r, seed_stream(schedule.seed, r), deadline)
        exact = evaluate(inst, x)[0]
        return tie_key(exact, [i for i, v in enumerate(x) if v]), x, trace, temp

    runs = _run_restarts(run_one, schedule, workers, deadline)
    best = None
    for r, (key, x, trace, temp) in enumerate(runs):
        if better(key, best and best[0]):
            best = (key, x, trace, temp, r)
    key, x, trace, temp, r = best
    res = synth_result(inst, x, "anneal", t0, schedule.seed, restarts=len(runs), best_restart=r,
                       initial_temperature=temp)
    res.trace = trace
    return res

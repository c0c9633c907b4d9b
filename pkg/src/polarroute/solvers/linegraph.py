"""Exact path solver over edge-adjacency states.

For a simple s-g path the objective reduces to the sum of edge costs, the turn
weights at interior vertices and the length penalty.  States are directed
arcs; moving from arc (i, j) to arc (j, k) costs omega(ijk) + c_jk.  A reverse
Dijkstra over arcs (ignoring simplicity) gives an admissible, consistent
cost-to-go, and an A* search over simple partial paths finishes the job.  The
length penalty is added when a path reaches the goal, so the first goal entry
popped is optimal.  Because every vertex of a simple path has degree 2 (1 at
the ends) the degree penalty is zero on all candidates.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time

from ..model import CqmModel
from .result import SolverResult, finalize_route, phi_len


def _arc_tables(model: CqmModel):
    vid = {v: k for k, v in enumerate(model.vertices)}
    tail, head, edge = [], [], []
    for k, (i, j) in enumerate(model.edges):
        tail += [vid[i], vid[j]]
        head += [vid[j], vid[i]]
        edge += [k, k]
    out_arcs = [[] for _ in vid]
    in_arcs = [[] for _ in vid]
    for a in range(len(tail)):
        out_arcs[tail[a]].append(a)
        in_arcs[head[a]].append(a)
    return vid, tail, head, edge, out_arcs, in_arcs


def solve_linegraph_dijkstra(model: CqmModel) -> SolverResult:
    t0 = time.perf_counter()
    vid, tail, head, edge, out_arcs, in_arcs = _arc_tables(model)
    cost = model.edge_cost
    turn = model.turn
    s, g = vid[model.s], vid[model.g]
    w = model.weights
    lmin, lmax = model.bounds.l_min, model.bounds.l_max

    def omega(a, b):
        ea, eb = edge[a], edge[b]
        return turn[(ea, eb) if ea < eb else (eb, ea)]

    # h[a]: cheapest continuation after arriving through arc a (walks allowed)
    h = [math.inf] * len(tail)
    heap = []
    for a in in_arcs[g]:
        h[a] = 0.0
        heap.append((0.0, a))
    heapq.heapify(heap)
    while heap:
        d, b = heapq.heappop(heap)
        if d > h[b]:
            continue
        u = tail[b]
        if u == g:
            continue
        for a in in_arcs[u]:
            if tail[a] == head[b]:
                continue  # immediate reversal
            nd = d + omega(a, b) + cost[edge[b]]
            if nd < h[a]:
                h[a] = nd
                heapq.heappush(heap, (nd, a))

    counter = itertools.count()
    # entries: (priority, tiebreak, is_goal, cost_so_far, arc, hops, visited_bits, parent)
    frontier = []
    for a in out_arcs[s]:
        c = cost[edge[a]]
        if head[a] == g:
            heapq.heappush(frontier, (c + phi_len(1, lmin, lmax, w.w_len), next(counter), True, c, a, 1, 0, None))
        elif h[a] < math.inf:
            node = (a, None)
            heapq.heappush(frontier, (c + h[a], next(counter), False, c, a, 1, (1 << s) | (1 << head[a]), node))
    expansions = 0
    found = None
    while frontier:
        pri, _, is_goal, c, a, hops, seen, node = heapq.heappop(frontier)
        if is_goal:
            found = (node, a)
            break
        expansions += 1
        for b in out_arcs[head[a]]:
            v = head[b]
            if seen >> v & 1:
                continue
            nc = c + omega(a, b) + cost[edge[b]]
            if v == g:
                heapq.heappush(frontier, (nc + phi_len(hops + 1, lmin, lmax, w.w_len), next(counter),
                                          True, nc, b, hops + 1, 0, node))
            elif h[b] < math.inf:
                heapq.heappush(frontier, (nc + h[b], next(counter), False, nc, b, hops + 1,
                                          seen | (1 << v), (b, node)))

    if found is None:
        return finalize_route(model, [], "linegraph", t0, reason="no s-g path")
    parent, last = found
    arcs = [last]
    while parent is not None:
        arcs.append(parent[0])
        parent = parent[1]
    arcs.reverse()
    verts = [model.vertices[tail[arcs[0]]]] + [model.vertices[head[a]] for a in arcs]
    return finalize_route(model, [edge[a] for a in arcs], "linegraph", t0, path=verts, expansions=expansions)

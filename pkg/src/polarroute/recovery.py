"""Route reconstruction from solver output, repair, metrics and GeoJSON export."""

from __future__ import annotations

import csv
import heapq
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import RecoveryError
from .geodesy import GeoPoint, haversine, interpolate, meridian_crossing_lat, turning_angle
from .hexgrid import cell_pitch_km, cell_resolution, cell_to_string
from .model import CqmModel

CARGO_T = 50_000.0
EMISSION_G_PER_TKM = 10.0
SAMPLE_KM = 25.0
METRICS_COLUMNS = ("solver", "nodes", "quad_terms", "objective", "selected_nodes", "km", "zigzag_pct", "co2_kg",
                   "time_s")


@dataclass(frozen=True)
class ActiveSubgraph:
    edges: tuple  # canonical (i, j) pairs with x > threshold
    flows: dict = field(default_factory=dict)  # directed arc -> f, positive only

    def adjacency(self) -> dict:
        adj: dict = {}
        for i, j in self.edges:
            adj.setdefault(i, []).append(j)
            adj.setdefault(j, []).append(i)
        return {v: sorted(n) for v, n in adj.items()}


@dataclass(frozen=True)
class Route:
    cells: tuple
    polyline: tuple
    relinked_edges: tuple = ()

    @property
    def edges(self) -> list:
        return [(a, b) if a < b else (b, a) for a, b in zip(self.cells, self.cells[1:])]


@dataclass(frozen=True)
class RouteMetrics:
    length_km: float
    zigzag_raw: float
    zigzag_pct: float
    co2_kg: float
    selected_nodes: int

    def to_dict(self) -> dict:
        return asdict(self)


def extract_active(result, threshold: float = 0.5) -> ActiveSubgraph:
    """Edges with x strictly above ``threshold`` plus positive flows on them."""
    a = result.assignment
    edges = tuple(sorted(e for e, v in a.x.items() if v > threshold))
    active = set(edges)
    flows = {arc: v for arc, v in sorted(a.f.items())
             if v > 0 and ((arc[0], arc[1]) if arc[0] < arc[1] else (arc[1], arc[0])) in active}
    return ActiveSubgraph(edges, flows)


def _follow_flow(sub: ActiveSubgraph, s: int, g: int):
    out: dict = {}
    for (u, v), f in sub.flows.items():
        out.setdefault(u, []).append((-f, v))
    path, seen = [s], {s}
    while path[-1] != g:
        options = sorted(o for o in out.get(path[-1], []) if o[1] not in seen)
        if not options:
            return None
        nxt = options[0][1]
        path.append(nxt)
        seen.add(nxt)
    return path


def _cheapest(adj: dict, weight, s: int, g: int):
    """Dijkstra by (cost, hops, vertex id); returns a vertex list or None."""
    best = {s: (0.0, 0)}
    prev = {s: None}
    heap = [(0.0, 0, s)]
    done = set()
    while heap:
        c, h, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == g:
            out = [u]
            while prev[out[-1]] is not None:
                out.append(prev[out[-1]])
            return out[::-1]
        for v in adj.get(u, ()):
            key = (c + weight(u, v), h + 1)
            if v not in done and key < best.get(v, (math.inf, 0)):
                best[v] = key
                prev[v] = u
                heapq.heappush(heap, (key[0], key[1], v))
    return None


def reconstruct(sub: ActiveSubgraph, model: CqmModel) -> Route:
    """Order the active edges into an s-g route, relinking fragments if needed."""
    s, g = model.s, model.g
    cost = {e: c for e, c in zip(model.edges, model.edge_cost)}

    def c_of(u, v):
        return cost[(u, v) if u < v else (v, u)]

    relinked: list = []
    path = _follow_flow(sub, s, g) if sub.flows else None
    if path is None:
        path = _cheapest(sub.adjacency(), c_of, s, g)
    if path is None:
        active = set(sub.edges)
        full = {v: [n for n, _ in nb] for v, nb in model.adjacency.items()}

        def repair_cost(u, v):
            e = (u, v) if u < v else (v, u)
            return 0.0 if e in active else cost[e]

        path = _cheapest(full, repair_cost, s, g)
        if path is None:
            raise RecoveryError("start and goal are not connected even in the full graph")
        relinked = [e for e in ((a, b) if a < b else (b, a) for a, b in zip(path, path[1:])) if e not in active]
    return Route(tuple(path), tuple(model.centroids[c] for c in path), tuple(relinked))


def co2_proxy(length_km: float) -> float:
    return length_km * CARGO_T * EMISSION_G_PER_TKM / 1000.0


def metrics(route: Route) -> RouteMetrics:
    pts = route.polyline
    if len(pts) < 2:
        raise RecoveryError("route needs at least 2 points")
    length = math.fsum(haversine(a, b) for a, b in zip(pts, pts[1:]))
    turns = [1.0 - math.cos(math.radians(turning_angle(a, b, c))) for a, b, c in zip(pts, pts[1:], pts[2:])]
    zeta = math.fsum(turns)
    pct = 100.0 * zeta / (2.0 * len(turns)) if turns else 0.0
    return RouteMetrics(length, zeta, pct, co2_proxy(length), len(route.cells))


def route_problems(route: Route, model: CqmModel) -> list[str]:
    """Violations of the route invariants; empty for a valid route."""
    problems = []
    cells = list(route.cells)
    if not cells or cells[0] != model.s or cells[-1] != model.g:
        problems.append("endpoints differ from (s, g)")
    if len(set(cells)) != len(cells):
        problems.append("repeated cell")
    nbrs = {v: {n for n, _ in nb} for v, nb in model.adjacency.items()}
    for a, b in zip(cells, cells[1:]):
        if b not in nbrs.get(a, ()):
            problems.append(f"{cell_to_string(a)} -> {cell_to_string(b)} not adjacent")
    # adjacent centroids are about one pitch apart; a jump means a broken seam
    limit = 1.5 * cell_pitch_km(cell_resolution(model.s))
    for a, b in zip(route.polyline, route.polyline[1:]):
        if haversine(a, b) > limit:
            problems.append("discontinuous polyline step")
    deg: dict = {}
    for a, b in zip(cells, cells[1:]):
        deg[a] = deg.get(a, 0) + 1
        deg[b] = deg.get(b, 0) + 1
    for v, k in deg.items():
        if k != (1 if v in (model.s, model.g) else 2):
            problems.append(f"degree penalty nonzero at {cell_to_string(v)}")
    hops = len(cells) - 1
    if not model.bounds.l_min <= hops <= model.bounds.l_max:
        problems.append(f"route has {hops} edges, outside [{model.bounds.l_min}, {model.bounds.l_max}]")
    return problems


# ---------------------------------------------------------------------------
# export


def densify(a: GeoPoint, b: GeoPoint, max_km: float = SAMPLE_KM) -> list[GeoPoint]:
    """Great-circle samples from a to b (both included), spaced <= max_km."""
    n = max(1, math.ceil(haversine(a, b) / max_km))
    return [a] + [interpolate(a, b, k / n) for k in range(1, n)] + [b]


def split_antimeridian(points) -> list[list[tuple]]:
    """Lon/lat parts of a polyline, cut where a segment crosses +-180."""
    parts = [[(points[0].lon, points[0].lat)]]
    for a, b in zip(points, points[1:]):
        if abs(b.lon - a.lon) > 180.0:
            lat = meridian_crossing_lat(a, b, 180.0)
            east = 180.0 if a.lon > 0 else -180.0
            parts[-1].append((east, lat))
            parts.append([(-east, lat)])
        parts[-1].append((b.lon, b.lat))
    return parts


def export_geojson(route: Route, m: RouteMetrics, path, properties: dict | None = None) -> dict:
    pts = [route.polyline[0]]
    for a, b in zip(route.polyline, route.polyline[1:]):
        pts.extend(densify(a, b)[1:])
    parts = split_antimeridian(pts)
    if len(parts) == 1:
        geom = {"type": "LineString", "coordinates": [list(p) for p in parts[0]]}
    else:
        geom = {"type": "MultiLineString", "coordinates": [[list(p) for p in part] for part in parts]}
    props = {**m.to_dict(), "relinked_edges": [[cell_to_string(i), cell_to_string(j)] for i, j in route.relinked_edges]}
    props.update(properties or {})
    features = [{"type": "Feature", "geometry": geom, "properties": props}]
    for k, (cell, p) in enumerate(zip(route.cells, route.polyline)):
        features.append({"type": "Feature", "geometry": {"type": "Point", "coordinates": [p.lon, p.lat]},
                         "properties": {"cell": cell_to_string(cell), "order": k}})
    doc = {"type": "FeatureCollection", "features": features}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")
    return doc


def write_metrics_csv(path, rows: list[dict], include_timing: bool = True) -> None:
    with Path(path).open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(METRICS_COLUMNS)
        for row in rows:
            vals = [row[c] for c in METRICS_COLUMNS]
            if not include_timing:
                vals[-1] = ""
            out.writerow(vals)

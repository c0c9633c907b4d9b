"""Constrained quadratic routing model over a corridor grid.

Objective (minimised over edge activations x, flows f, degree indicators y and
length slacks):

    sum_e c_e x_e + sum_{e,e' share a vertex} w_turn (1 - cos theta) x_e x_e'
      + W_deg * sum_v (deg(v) - d_v y_v)^2 + W_len * (short^2 + excess^2)

with unit-flow conservation from s to g, f_a <= x_e on both arcs of every edge,
short >= L_min - sum x, excess >= sum x - L_max.

The degree penalty uses a binary indicator y_v per vertex (fixed to 1 at s and
g) so that unused vertices cost nothing and the penalty stays quadratic:
min_y (k - 2y)^2 is 0 for k in {0, 2} and 1 for k in {1, 3}.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Callable, Mapping, Sequence

from .envdata import Calibration, CellFeatures
from .errors import DisconnectedError, ModelError
from .geodesy import (GeoPoint, GreatCircleAxis, angle_between_bearings, midpoint,
                      segment_bearing_at_midpoint, turning_angle)
from .hexgrid import CorridorGrid, cell_to_string, hex_distance

FEAS_TOL = 1e-6


@dataclass(frozen=True)
class Weights:
    k_safety: float = 1.0
    w_thick: float = 1.0
    w_age: float = 1.0
    w_conc: float = 1.0
    w_snow: float = 1.0
    w_side: float = 1.0
    w_lat: float = 1.0
    h: float = 0.01
    w_turn: float = 1.0
    w_deg: float = 1.0
    w_len: float = 1.0
    w_drift: float = 0.0  # experimental drift-speed term, off by default

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value) or value < 0:
                raise ModelError(f"weight {name} must be finite and nonnegative, got {value}")
        if self.h <= 0:
            raise ModelError("connectivity constant h must be positive")

    def replace(self, **changes) -> "Weights":
        return Weights(**{**asdict(self), **changes})


@dataclass(frozen=True)
class PathBounds:
    l_min: int
    l_max: int

    def __post_init__(self):
        if self.l_min < 1 or self.l_max < self.l_min:
            raise ModelError(f"need 1 <= l_min <= l_max, got ({self.l_min}, {self.l_max})")

    @classmethod
    def default(cls, s: int, g: int) -> "PathBounds":
        lo = max(1, hex_distance(s, g))
        return cls(lo, 3 * lo)


@dataclass(frozen=True)
class PairPenalties:
    p_thick: float
    p_age: float
    p_conc: float
    p_snow: float
    sigma: float
    lam: float
    drift: float = 0.0  # worst endpoint drift speed, m/s


def _ramp(excess: float, span: float) -> float:
    if span <= 0.0:
        return 0.0
    return min(1.0, max(0.0, excess / span))


def _alignment_axis(axis: GreatCircleAxis, a: GeoPoint, b: GeoPoint) -> tuple[float, float]:
    m = midpoint(a, b)
    lam = abs(axis.cross_track_km(m)) / axis.length_km
    dbeta = math.radians(angle_between_bearings(segment_bearing_at_midpoint(a, b), axis.bearing_at(m)))
    # undirected edges: sin^2 is invariant to endpoint order
    return math.sin(dbeta) ** 2, lam


def _alignment_directed(axis: GreatCircleAxis, a: GeoPoint, b: GeoPoint) -> tuple[float, float]:
    m = midpoint(a, b)
    lam = abs(axis.cross_track_km(m)) / axis.length_km
    dbeta = math.radians(angle_between_bearings(segment_bearing_at_midpoint(a, b), axis.bearing_at(m)))
    return (1.0 - math.cos(dbeta)) / 2.0, lam


ALIGNMENT_STRATEGIES: dict[str, Callable] = {
    "axis": _alignment_axis,
    "axis-directed": _alignment_directed,
}


def pair_penalties(fi: CellFeatures | None, fj: CellFeatures | None, cal: Calibration,
                   axis: GreatCircleAxis, endpoints: tuple[GeoPoint, GeoPoint],
                   alignment: str = "axis") -> PairPenalties:
    """Worst-case neighbour penalties for one edge, each clipped to [0, 1].

    A missing endpoint record, or a missing field, yields penalty 1 for the
    affected terms; a degenerate calibration span yields 0.
    """
    sigma, lam = ALIGNMENT_STRATEGIES[alignment](axis, *endpoints)

    def worst(attr, pick):
        if fi is None or fj is None:
            return None
        a, b = getattr(fi, attr), getattr(fj, attr)
        return None if a is None or b is None else pick(a, b)

    def penalty(value, excess, span):
        return 1.0 if value is None else _ramp(excess(value), span)

    tau = worst("thickness", max)
    age = worst("age", max)
    conc = worst("concentration", min)
    snow = worst("snow", max)
    speeds = [math.hypot(f.u, f.v) for f in (fi, fj) if f is not None and f.u is not None and f.v is not None]
    return PairPenalties(
        p_thick=penalty(tau, lambda v: v - cal.warn_thick, cal.thick_max - cal.warn_thick),
        p_age=penalty(age, lambda v: v - cal.warn_age, cal.age_max - cal.warn_age),
        p_conc=penalty(conc, lambda v: cal.warn_conc - v, cal.warn_conc - cal.conc_min),
        p_snow=penalty(snow, lambda v: v - cal.warn_snow, cal.snow_max - cal.warn_snow),
        sigma=sigma,
        lam=lam,
        drift=max(speeds, default=0.0),
    )


def edge_cost(pp: PairPenalties, w: Weights) -> float:
    env = w.w_thick * pp.p_thick + w.w_age * pp.p_age + w.w_conc * pp.p_conc + w.w_snow * pp.p_snow
    return w.k_safety * env + w.w_side * pp.sigma + w.w_lat * pp.lam + w.w_drift * pp.drift + w.h


def turn_weight(theta_deg: float, w_turn: float) -> float:
    return w_turn * (1.0 - math.cos(math.radians(theta_deg)))


def _pivot(e1: tuple, e2: tuple) -> tuple:
    shared = set(e1) & set(e2)
    if len(shared) != 1 or len(set(e1)) != 2 or len(set(e2)) != 2:
        raise ModelError(f"edges {e1} and {e2} must share exactly one vertex")
    j = shared.pop()
    i = e1[0] if e1[1] == j else e1[1]
    k = e2[0] if e2[1] == j else e2[1]
    return i, j, k


def turn_penalty(e1: tuple, e2: tuple, grid: CorridorGrid, w: Weights) -> float:
    i, j, k = _pivot(e1, e2)
    theta = turning_angle(grid.centroid(i), grid.centroid(j), grid.centroid(k))
    return turn_weight(theta, w.w_turn)


# ---------------------------------------------------------------------------
# model container


@dataclass(frozen=True)
class Variable:
    name: str
    vtype: str  # "BINARY" or "REAL"
    lb: float = 0.0
    ub: float = 1.0


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple  # ((var_name, coef), ...)
    sense: str  # "==", "<=", ">="
    rhs: float

    def violation(self, values: Mapping[str, float]) -> float:
        lhs = math.fsum(c * values.get(v, 0.0) for v, c in self.terms)
        if self.sense == "==":
            return abs(lhs - self.rhs)
        if self.sense == "<=":
            return max(0.0, lhs - self.rhs)
        return max(0.0, self.rhs - lhs)


@dataclass
class Assignment:
    """Values for every model variable.

    ``x`` maps canonical edges to {0, 1}; ``f`` maps directed arcs to flow;
    ``aux`` holds the per-vertex degree indicators; ``slacks`` the two
    length slacks ("short", "excess").
    """

    x: dict
    f: dict = field(default_factory=dict)
    slacks: dict = field(default_factory=dict)
    aux: dict = field(default_factory=dict)

    def active_edges(self, threshold: float = 0.5) -> list:
        return sorted(e for e, v in self.x.items() if v > threshold)


def edge_var(e) -> str:
    return f"x_{cell_to_string(e[0])}_{cell_to_string(e[1])}"


def arc_var(a) -> str:
    return f"f_{cell_to_string(a[0])}_{cell_to_string(a[1])}"


def aux_var(v) -> str:
    return f"y_{cell_to_string(v)}"


SHORT_VAR = "len_short"
EXCESS_VAR = "len_excess"


@dataclass(frozen=True, eq=False)
class CqmModel:
    s: int
    g: int
    bounds: PathBounds
    weights: Weights
    calibration_digest: str
    alignment: str
    vertices: tuple
    centroids: dict
    edges: tuple
    edge_cost: tuple
    turn: dict  # (edge_index_a, edge_index_b), a < b -> omega
    variables: tuple
    linear: dict
    quadratic: dict
    offset: float
    constraints: tuple

    # -- structure ------------------------------------------------------

    @cached_property
    def edge_index(self) -> dict:
        return {e: k for k, e in enumerate(self.edges)}

    @cached_property
    def incident(self) -> dict:
        inc = {v: [] for v in self.vertices}
        for k, (i, j) in enumerate(self.edges):
            inc[i].append(k)
            inc[j].append(k)
        return inc

    @cached_property
    def adjacency(self) -> dict:
        """vertex -> tuple of (neighbour, edge index)."""
        adj = {v: [] for v in self.vertices}
        for k, (i, j) in enumerate(self.edges):
            adj[i].append((j, k))
            adj[j].append((i, k))
        return {v: tuple(sorted(n)) for v, n in adj.items()}

    @cached_property
    def turn_neighbors(self) -> list:
        """Per edge index: list of (other edge index, omega)."""
        out = [[] for _ in self.edges]
        for (a, b), w in self.turn.items():
            out[a].append((b, w))
            out[b].append((a, w))
        return out

    def degree_target(self, v) -> int:
        return 1 if v in (self.s, self.g) else 2

    @property
    def num_edge_vars(self) -> int:
        return len(self.edges)

    @property
    def quad_term_count(self) -> int:
        """Number of edge-edge quadratic couplings in the objective."""
        return len(self.turn)

    @cached_property
    def var_index(self) -> dict:
        return {v.name: k for k, v in enumerate(self.variables)}

    # -- evaluation -----------------------------------------------------

    def values(self, a: Assignment) -> dict:
        """Flat ``var_name -> value`` map, filling unset aux/slacks optimally."""
        a = complete(self, a)
        vals = {edge_var(e): float(a.x.get(e, 0)) for e in self.edges}
        for arc, v in a.f.items():
            vals[arc_var(arc)] = float(v)
        for v, y in a.aux.items():
            vals[aux_var(v)] = float(y)
        vals[SHORT_VAR] = float(a.slacks.get("short", 0.0))
        vals[EXCESS_VAR] = float(a.slacks.get("excess", 0.0))
        return vals

    def energy(self, values: Mapping[str, float]) -> float:
        """Objective from the expanded linear/quadratic terms."""
        total = [self.offset]
        total += [c * values.get(v, 0.0) for v, c in self.linear.items()]
        total += [c * values.get(u, 0.0) * values.get(v, 0.0) for (u, v), c in self.quadratic.items()]
        return math.fsum(total)


def _optimal_aux(model: CqmModel, deg: Mapping) -> dict:
    return {v: (1 if deg.get(v, 0) >= 2 else 0) for v in model.vertices if v not in (model.s, model.g)}


def _optimal_slacks(model: CqmModel, count: int) -> dict:
    return {"short": float(max(0, model.bounds.l_min - count)),
            "excess": float(max(0, count - model.bounds.l_max))}


def degrees(model: CqmModel, x: Mapping) -> dict:
    deg = dict.fromkeys(model.vertices, 0)
    for (i, j), v in x.items():
        if v > 0.5:
            deg[i] += 1
            deg[j] += 1
    return deg


def find_path(model: CqmModel, active: Sequence) -> list | None:
    """Fewest-hop s-g vertex path inside the given edges, or None."""
    adj: dict = {}
    for i, j in active:
        adj.setdefault(i, []).append(j)
        adj.setdefault(j, []).append(i)
    prev = {model.s: None}
    queue = deque([model.s])
    while queue:
        u = queue.popleft()
        if u == model.g:
            path = [u]
            while prev[path[-1]] is not None:
                path.append(prev[path[-1]])
            return path[::-1]
        for v in sorted(adj.get(u, ())):
            if v not in prev:
                prev[v] = u
                queue.append(v)
    return None


def complete(model: CqmModel, a: Assignment) -> Assignment:
    """Fill missing flows, indicators and slacks with their optimal values.

    Flows, when absent, are routed as one unit along a fewest-hop s-g path in
    the active edge set (none if no such path exists).
    """
    x = {e: int(round(a.x.get(e, 0))) for e in model.edges}
    f = dict(a.f)
    if not f:
        path = find_path(model, [e for e, v in x.items() if v])
        if path:
            f = {(u, v): 1.0 for u, v in zip(path, path[1:])}
    aux = dict(a.aux) if a.aux else _optimal_aux(model, degrees(model, x))
    slacks = dict(a.slacks) if a.slacks else _optimal_slacks(model, sum(x.values()))
    return Assignment(x, f, slacks, aux)


def assignment_from_edges(model: CqmModel, active: Sequence, path: Sequence | None = None) -> Assignment:
    """Complete assignment for a set of active edges, flows along ``path``."""
    active = set(active)
    x = {e: (1 if e in active else 0) for e in model.edges}
    f = {}
    if path:
        f = {(u, v): 1.0 for u, v in zip(path, path[1:])}
    return complete(model, Assignment(x, f))


def evaluate_objective(model: CqmModel, a: Assignment) -> float:
    """Term-by-term objective: edge costs, curvature, degree and length penalties.

    Works from the model's structural data (costs, turn weights, targets),
    independently of the expanded coefficient dictionaries.
    """
    w = model.weights
    xv = [1.0 if a.x.get(e, 0) > 0.5 else 0.0 for e in model.edges]
    env = math.fsum(c * x for c, x in zip(model.edge_cost, xv))
    curv = math.fsum(om * xv[p] * xv[q] for (p, q), om in model.turn.items())
    deg = dict.fromkeys(model.vertices, 0.0)
    for (i, j), x in zip(model.edges, xv):
        deg[i] += x
        deg[j] += x
    aux = a.aux if a.aux else _optimal_aux(model, deg)
    phi_deg = []
    for v in model.vertices:
        if v in (model.s, model.g):
            phi_deg.append((deg[v] - 1.0) ** 2)
        else:
            phi_deg.append((deg[v] - 2.0 * aux.get(v, 0)) ** 2)
    slacks = a.slacks if a.slacks else _optimal_slacks(model, int(sum(xv)))
    phi_len = slacks.get("short", 0.0) ** 2 + slacks.get("excess", 0.0) ** 2
    return math.fsum([env, curv, w.w_deg * math.fsum(phi_deg), w.w_len * phi_len])


def violations(model: CqmModel, a: Assignment, tol: float = FEAS_TOL) -> list:
    """Hard-constraint violations as ``(name, magnitude)`` pairs above ``tol``."""
    vals = model.values(a)
    out = []
    for var in model.variables:
        v = vals.get(var.name, 0.0)
        if var.vtype == "BINARY" and min(abs(v), abs(v - 1.0)) > tol:
            out.append((f"integrality:{var.name}", min(abs(v), abs(v - 1.0))))
        if v < var.lb - tol:
            out.append((f"bound:{var.name}", var.lb - v))
        if var.ub is not None and v > var.ub + tol:
            out.append((f"bound:{var.name}", v - var.ub))
    for con in model.constraints:
        mag = con.violation(vals)
        if mag > tol:
            out.append((con.name, mag))
    return out


# ---------------------------------------------------------------------------
# construction


def _features_by_cell(features) -> dict:
    if isinstance(features, Mapping):
        return dict(features)
    return {f.cell: f for f in features}


def build_model(grid: CorridorGrid, features, cal: Calibration, w: Weights | None, s: int, g: int,
                bounds: PathBounds | None = None, *, alignment: str = "axis",
                check_connected: bool = True) -> CqmModel:
    w = w or Weights()
    if s == g:
        raise ModelError("start and goal must differ")
    for name, c in (("start", s), ("goal", g)):
        if c not in grid.cells:
            raise ModelError(f"{name} cell {cell_to_string(c)} is not an ocean cell of the grid")
    if alignment not in ALIGNMENT_STRATEGIES:
        raise ModelError(f"unknown alignment strategy {alignment!r}")
    if check_connected and not grid.connected(s, g):
        raise DisconnectedError("start and goal are not connected in the grid")
    lower = hex_distance(s, g)
    bounds = bounds or PathBounds.default(s, g)
    if bounds.l_min < lower:
        raise ModelError(f"l_min={bounds.l_min} is below the lattice distance {lower}")

    feats = _features_by_cell(features)
    vertices = grid.ids
    centroids = {v: grid.centroid(v) for v in vertices}
    edges = grid.edges
    axis = GreatCircleAxis(centroids[s], centroids[g])

    costs = []
    for i, j in edges:
        pp = pair_penalties(feats.get(i), feats.get(j), cal, axis, (centroids[i], centroids[j]), alignment)
        costs.append(edge_cost(pp, w))

    index = {e: k for k, e in enumerate(edges)}
    incident = {v: [] for v in vertices}
    for k, (i, j) in enumerate(edges):
        incident[i].append(k)
        incident[j].append(k)

    turn = {}
    for j in vertices:
        inc = incident[j]
        for p in range(len(inc)):
            for q in range(p + 1, len(inc)):
                a, b = inc[p], inc[q]
                ea, eb = edges[a], edges[b]
                i = ea[0] if ea[1] == j else ea[1]
                k = eb[0] if eb[1] == j else eb[1]
                theta = turning_angle(centroids[i], centroids[j], centroids[k])
                turn[(min(a, b), max(a, b))] = turn_weight(theta, w.w_turn)

    # variables
    evars = [edge_var(e) for e in edges]
    arcs = sorted([(i, j) for i, j in edges] + [(j, i) for i, j in edges])
    variables = [Variable(n, "BINARY") for n in evars]
    variables += [Variable(arc_var(a), "REAL", 0.0, 1.0) for a in arcs]
    inner = [v for v in vertices if v not in (s, g)]
    variables += [Variable(aux_var(v), "BINARY") for v in inner]
    variables += [Variable(SHORT_VAR, "REAL", 0.0, None), Variable(EXCESS_VAR, "REAL", 0.0, None)]

    linear: dict = {}
    quadratic: dict = {}
    offset = 0.0

    def add_lin(v, c):
        linear[v] = linear.get(v, 0.0) + c

    def add_quad(u, v, c):
        key = (u, v) if u <= v else (v, u)  # re-keyed by variable order below
        quadratic[key] = quadratic.get(key, 0.0) + c

    for k, c in enumerate(costs):
        add_lin(evars[k], c)
    for (a, b), om in turn.items():
        add_quad(evars[a], evars[b], om)

    wd = w.w_deg
    for v in vertices:
        inc = incident[v]
        if v in (s, g):
            # (sum x - 1)^2 = sum x + 2 sum_{pairs} x x' - 2 sum x + 1
            for k in inc:
                add_lin(evars[k], -wd)
            offset += wd
        else:
            # (sum x - 2y)^2 = sum x + 2 sum_{pairs} x x' - 4 y sum x + 4 y
            yv = aux_var(v)
            for k in inc:
                add_lin(evars[k], wd)
                add_quad(evars[k], yv, -4.0 * wd)
            add_lin(yv, 4.0 * wd)
        for p in range(len(inc)):
            for q in range(p + 1, len(inc)):
                add_quad(evars[inc[p]], evars[inc[q]], 2.0 * wd)
    add_quad(SHORT_VAR, SHORT_VAR, w.w_len)
    add_quad(EXCESS_VAR, EXCESS_VAR, w.w_len)

    # canonical ordering of terms follows variable order
    order = {v.name: k for k, v in enumerate(variables)}
    linear = {v: linear[v] for v in sorted(linear, key=order.__getitem__)}
    canon = {((u, v) if order[u] <= order[v] else (v, u)): c for (u, v), c in quadratic.items()}
    quadratic = {uv: canon[uv] for uv in sorted(canon, key=lambda uv: (order[uv[0]], order[uv[1]]))}

    constraints = []
    out_arcs = {v: [] for v in vertices}
    in_arcs = {v: [] for v in vertices}
    for a in arcs:
        out_arcs[a[0]].append(a)
        in_arcs[a[1]].append(a)
    for v in vertices:
        terms = tuple([(arc_var(a), 1.0) for a in out_arcs[v]] + [(arc_var(a), -1.0) for a in in_arcs[v]])
        rhs = 1.0 if v == s else (-1.0 if v == g else 0.0)
        constraints.append(Constraint(f"flow_{cell_to_string(v)}", terms, "==", rhs))
    for a in arcs:
        e = a if a[0] < a[1] else (a[1], a[0])
        constraints.append(Constraint(f"cap_{arc_var(a)[2:]}", ((arc_var(a), 1.0), (edge_var(e), -1.0)), "<=", 0.0))
    constraints.append(Constraint("len_lower", tuple((n, 1.0) for n in evars) + ((SHORT_VAR, 1.0),),
                                  ">=", float(bounds.l_min)))
    constraints.append(Constraint("len_upper", tuple((n, 1.0) for n in evars) + ((EXCESS_VAR, -1.0),),
                                  "<=", float(bounds.l_max)))

    return CqmModel(
        s=s, g=g, bounds=bounds, weights=w, calibration_digest=cal.digest(), alignment=alignment,
        vertices=vertices, centroids=centroids, edges=edges, edge_cost=tuple(costs), turn=turn,
        variables=tuple(variables), linear=linear, quadratic=quadratic, offset=offset,
        constraints=tuple(constraints),
    )


# ---------------------------------------------------------------------------
# text dump


def _fmt(x: float) -> str:
    return repr(float(x))


def dump_model(model: CqmModel) -> str:
    """Canonical, platform-stable text serialisation."""
    lines = ["cqm 1",
             f"meta start {cell_to_string(model.s)}",
             f"meta goal {cell_to_string(model.g)}",
             f"meta l_min {model.bounds.l_min}",
             f"meta l_max {model.bounds.l_max}",
             f"meta calibration {model.calibration_digest}",
             f"meta alignment {model.alignment}"]
    for k, v in sorted(asdict(model.weights).items()):
        lines.append(f"meta weight.{k} {_fmt(v)}")
    lines.append(f"offset {_fmt(model.offset)}")
    for var in model.variables:
        ub = "inf" if var.ub is None else _fmt(var.ub)
        lines.append(f"var {var.name} {var.vtype.lower()} {_fmt(var.lb)} {ub}")
    for name, c in model.linear.items():
        lines.append(f"lin {name} {_fmt(c)}")
    for (u, v), c in model.quadratic.items():
        lines.append(f"quad {u} {v} {_fmt(c)}")
    for con in model.constraints:
        terms = " ".join(f"{n}:{_fmt(c)}" for n, c in con.terms)
        lines.append(f"con {con.name} {con.sense} {_fmt(con.rhs)} {terms}")
    return "\n".join(lines) + "\n"


@dataclass
class DumpedModel:
    """A parsed model dump: enough to evaluate and check any assignment."""

    meta: dict
    offset: float
    variables: list
    linear: dict
    quadratic: dict
    constraints: list

    def energy(self, values: Mapping[str, float]) -> float:
        total = [self.offset]
        total += [c * values.get(v, 0.0) for v, c in self.linear.items()]
        total += [c * values.get(u, 0.0) * values.get(v, 0.0) for (u, v), c in self.quadratic.items()]
        return math.fsum(total)

    def violations(self, values: Mapping[str, float], tol: float = FEAS_TOL) -> list:
        return [(c.name, m) for c in self.constraints if (m := c.violation(values)) > tol]


def parse_model_dump(text: str) -> DumpedModel:
    meta, variables, linear, quadratic, constraints = {}, [], {}, {}, []
    offset = 0.0
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        tag = parts[0]
        try:
            if tag == "cqm":
                continue
            if tag == "meta":
                meta[parts[1]] = parts[2]
            elif tag == "offset":
                offset = float(parts[1])
            elif tag == "var":
                ub = None if parts[4] == "inf" else float(parts[4])
                variables.append(Variable(parts[1], parts[2].upper(), float(parts[3]), ub))
            elif tag == "lin":
                linear[parts[1]] = float(parts[2])
            elif tag == "quad":
                quadratic[(parts[1], parts[2])] = float(parts[3])
            elif tag == "con":
                terms = tuple((t.rsplit(":", 1)[0], float(t.rsplit(":", 1)[1])) for t in parts[4:])
                constraints.append(Constraint(parts[1], terms, parts[2], float(parts[3])))
            else:
                raise ValueError(f"unknown record {tag!r}")
        except (IndexError, ValueError) as exc:
            raise ModelError(f"model dump line {lineno}: {exc}") from None
    return DumpedModel(meta, offset, variables, linear, quadratic, constraints)

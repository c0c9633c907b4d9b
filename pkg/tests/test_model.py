import dataclasses
import itertools
import math

import numpy as np
import pytest

from polarroute.envdata import Calibration, CellFeatures, calibrate
from polarroute.errors import DisconnectedError, ModelError
from polarroute.fixtures import FIXTURE_DATE, line_patch, random_patch, uniform_features
from polarroute.geodesy import GeoPoint, GreatCircleAxis
from polarroute.hexgrid import CorridorGrid, hex_distance, neighbors, point_to_cell
from polarroute.model import (
    Assignment,
    PairPenalties,
    PathBounds,
    Weights,
    assignment_from_edges,
    build_model,
    dump_model,
    edge_cost,
    evaluate_objective,
    pair_penalties,
    parse_model_dump,
    turn_penalty,
    turn_weight,
    violations,
)

CAL = Calibration(warn_thick=1.0, warn_age=2.0, warn_conc=0.8, warn_snow=0.2,
                  thick_max=3.0, age_max=4.0, conc_min=0.5, snow_max=0.4)
AXIS = GreatCircleAxis(GeoPoint(70, 178), GeoPoint(71, -178))
ENDS = (GeoPoint(70.2, 179), GeoPoint(70.3, 179.5))


def feat(thick=1.0, age=2.0, conc=0.8, snow=0.2, cell=1):
    return CellFeatures(cell, FIXTURE_DATE, thick, age, conc, snow, 0.0, 0.0, 1)


def simple_paths(model, limit=None):
    adj = {v: [n for n, _ in nb] for v, nb in model.adjacency.items()}

    def walk(path):
        u = path[-1]
        if u == model.g:
            yield list(path)
            return
        for v in adj[u]:
            if v not in path:
                path.append(v)
                yield from walk(path)
                path.pop()

    yield from walk([model.s])


def path_edges(path):
    return [(a, b) if a < b else (b, a) for a, b in zip(path, path[1:])]


# -- penalties and costs ---------------------------------------------------------


def test_threshold_boundary_gives_zero():
    pp = pair_penalties(feat(), feat(), CAL, AXIS, ENDS)
    assert (pp.p_thick, pp.p_age, pp.p_conc, pp.p_snow) == (0.0, 0.0, 0.0, 0.0)


def test_upper_bound_gives_one():
    pp = pair_penalties(feat(thick=0.5), feat(thick=3.0), CAL, AXIS, ENDS)
    assert pp.p_thick == 1.0


def test_concentration_worst_case():
    pp = pair_penalties(feat(conc=0.9), feat(conc=0.7), CAL, AXIS, ENDS)
    assert pp.p_conc == pytest.approx(1 / 3, abs=1e-12)


def test_missing_features_are_maximal_risk():
    pp = pair_penalties(None, feat(), CAL, AXIS, ENDS)
    assert (pp.p_thick, pp.p_age, pp.p_conc, pp.p_snow) == (1.0, 1.0, 1.0, 1.0)
    pp = pair_penalties(feat(thick=None), feat(), CAL, AXIS, ENDS)
    assert pp.p_thick == 1.0 and pp.p_age == 0.0


def test_degenerate_span_gives_zero():
    cal = Calibration(1.0, 2.0, 1.0, 0.2, 1.0, 4.0, 1.0, 0.4)
    pp = pair_penalties(feat(thick=5.0, conc=0.1), feat(), cal, AXIS, ENDS)
    assert pp.p_thick == 0.0 and pp.p_conc == 0.0


def test_penalties_clipped_under_random_calibrations():
    rng = np.random.default_rng(123)
    for _ in range(10_000):
        warn = rng.uniform(0, 2, 4)
        cal = Calibration(warn[0], warn[1], warn[2], warn[3],
                          warn[0] + rng.uniform(-0.5, 2), warn[1] + rng.uniform(-0.5, 2),
                          warn[2] - rng.uniform(-0.5, 1), warn[3] + rng.uniform(-0.5, 1))
        fi = feat(*rng.uniform(-1, 5, 4))
        fj = feat(*rng.uniform(-1, 5, 4))
        pp = pair_penalties(fi, fj, cal, AXIS, ENDS)
        for p in (pp.p_thick, pp.p_age, pp.p_conc, pp.p_snow):
            assert 0.0 <= p <= 1.0
        assert pp.sigma >= 0 and pp.lam >= 0


def test_edge_cost_floor_and_substitution():
    zero = PairPenalties(0, 0, 0, 0, 0, 0)
    assert edge_cost(zero, Weights(h=0.25)) == 0.25
    w = Weights(k_safety=2.0, w_thick=1.0, h=0.1)
    assert edge_cost(PairPenalties(0.5, 0, 0, 0, 0, 0), w) == pytest.approx(1.1)


def test_edge_cost_linear_in_safety():
    pp = PairPenalties(0.3, 0.1, 0.7, 0.2, 0.4, 0.05)
    w1, w2 = Weights(k_safety=1.5), Weights(k_safety=3.0)
    geo = w1.w_side * pp.sigma + w1.w_lat * pp.lam + w1.h
    assert edge_cost(pp, w2) - geo == pytest.approx(2 * (edge_cost(pp, w1) - geo))


def test_weights_validation():
    with pytest.raises(ModelError):
        Weights(h=0.0)
    with pytest.raises(ModelError):
        Weights(w_turn=-1)
    with pytest.raises(ModelError):
        PathBounds(3, 2)


def test_alignment_on_axis_is_zero():
    a, b = GeoPoint(0, 0), GeoPoint(0, 10)
    axis = GreatCircleAxis(a, b)
    pp = pair_penalties(feat(), feat(), CAL, axis, (GeoPoint(0, 3), GeoPoint(0, 4)))
    assert pp.sigma == pytest.approx(0, abs=1e-12) and pp.lam == pytest.approx(0, abs=1e-12)
    cross = pair_penalties(feat(), feat(), CAL, axis, (GeoPoint(-0.5, 5), GeoPoint(0.5, 5)))
    assert cross.sigma == pytest.approx(1.0, abs=1e-6)
    directed = pair_penalties(feat(), feat(), CAL, axis, (GeoPoint(-0.5, 5), GeoPoint(0.5, 5)),
                              alignment="axis-directed")
    assert directed.sigma == pytest.approx(0.5, abs=1e-6)


# -- turn penalties -------------------------------------------------------------------


@pytest.mark.parametrize("theta,factor", [(0.0, 0.0), (60.0, 0.5), (180.0, 2.0)])
def test_turn_anchors(theta, factor):
    assert turn_weight(theta, 1.7) == pytest.approx(factor * 1.7, abs=1e-9)


def _planar_turn(grid, i, j, k):
    from polarroute.hexgrid import project

    (xi, xj, xk), (yi, yj, yk) = project([grid.centroid(c).lat for c in (i, j, k)],
                                         [grid.centroid(c).lon for c in (i, j, k)])
    h1 = math.atan2(yj - yi, xj - xi)
    h2 = math.atan2(yk - yj, xk - xj)
    return abs(math.degrees((h2 - h1 + math.pi) % (2 * math.pi) - math.pi))


def test_lattice_turns_near_projection_centre():
    # the polar lattice is least distorted near the pole
    c = point_to_cell(GeoPoint(88.0, 10.0), 5)
    nb = neighbors(c)
    grid = CorridorGrid.from_cells([c, *nb], 5)
    w = Weights(w_turn=2.0)

    def edge(a, b):
        return (a, b) if a < b else (b, a)

    straight = turn_penalty(edge(nb[0], c), edge(c, nb[3]), grid, w)
    sharp = turn_penalty(edge(nb[0], c), edge(c, nb[1]), grid, w)  # 120 deg turn
    gentle = turn_penalty(edge(nb[0], c), edge(c, nb[2]), grid, w)  # 60 deg turn
    assert straight == pytest.approx(0.0, abs=0.02)
    assert gentle == pytest.approx(0.5 * 2.0, abs=0.02)
    assert sharp == pytest.approx(1.5 * 2.0, abs=0.02)
    for k, want in ((3, 0.0), (2, 60.0), (1, 120.0)):
        assert _planar_turn(grid, nb[0], c, nb[k]) == pytest.approx(want, abs=1e-9)
    with pytest.raises(ModelError):
        turn_penalty(edge(nb[0], c), edge(nb[0], c), grid, w)
    with pytest.raises(ModelError):
        turn_penalty(edge(nb[0], c), edge(nb[2], nb[3]), grid, w)


# -- model construction -----------------------------------------------------------------


def test_two_cell_model(flower):
    grid, s, _ = flower
    g = neighbors(s)[0] if neighbors(s)[0] in grid else [n for n in grid.neighbors(s)][0]
    pair = CorridorGrid.from_cells([s, g], 5)
    feats = uniform_features(pair)
    m = build_model(pair, feats, calibrate(feats), Weights(), s, g)
    assert m.num_edge_vars == 1
    assert sum(v.name.startswith("f_") for v in m.variables) == 2
    empty = assignment_from_edges(m, [])
    assert violations(m, empty)
    full = assignment_from_edges(m, m.edges)
    assert violations(m, full) == []
    assert full.f[(s, g)] == 1.0


def test_three_cell_path_has_zero_degree_penalty():
    grid = line_patch(3)
    s, _, g = sorted(grid.ids, key=lambda c: grid.centroid(c).lon % 360)
    feats = uniform_features(grid)
    m = build_model(grid, feats, calibrate(feats), Weights(), s, g)
    a = assignment_from_edges(m, m.edges)
    base = math.fsum(m.edge_cost) + math.fsum(m.turn.values())
    assert evaluate_objective(m, a) == pytest.approx(base, rel=1e-12)
    assert violations(m, a) == []


def test_flower_quadratic_term_count(flower_model):
    m = flower_model
    pairs = 0
    for e1, e2 in itertools.combinations(m.edges, 2):
        if len(set(e1) & set(e2)) == 1:
            pairs += 1
    assert pairs == 33
    assert m.quad_term_count == pairs
    assert len(m.edges) == 12


def test_turn_pairs_share_one_vertex(flower_model):
    m = flower_model
    for a, b in m.turn:
        assert len(set(m.edges[a]) & set(m.edges[b])) == 1


def test_energy_matches_evaluator():
    for seed in range(10):
        patch = random_patch(seed, size=10, max_edges=20)
        m = build_model(patch.grid, patch.features, patch.calibration, Weights(w_deg=1.3, w_len=0.7), patch.s,
                        patch.g)
        rng = np.random.default_rng(seed)
        for _ in range(30):
            active = [e for e in m.edges if rng.random() < 0.4]
            a = assignment_from_edges(m, active)
            assert m.energy(m.values(a)) == pytest.approx(evaluate_objective(m, a), rel=1e-9, abs=1e-12)


def test_every_simple_path_within_bounds_has_zero_soft_penalties():
    for seed in range(6):
        patch = random_patch(seed, size=10, max_edges=20)
        m = build_model(patch.grid, patch.features, patch.calibration, Weights(), patch.s, patch.g)
        for path in simple_paths(m):
            edges = path_edges(path)
            a = assignment_from_edges(m, edges, path)
            idx = [m.edge_index[e] for e in edges]
            base = math.fsum(m.edge_cost[k] for k in idx)
            base += math.fsum(m.turn.get((min(p, q), max(p, q)), 0.0) for p, q in itertools.combinations(idx, 2))
            if m.bounds.l_min <= len(edges) <= m.bounds.l_max:
                assert evaluate_objective(m, a) == pytest.approx(base, rel=1e-12)
                assert violations(m, a) == []


def _phi_deg_oracle(m, active):
    deg = {v: sum(v in e for e in active) for v in m.vertices}
    total = 0.0
    for v, k in deg.items():
        total += (k - 1) ** 2 if v in (m.s, m.g) else min((k - 2 * y) ** 2 for y in (0, 1))
    return m.weights.w_deg * total


def test_degree_anchor_cases(flower_model):
    m = flower_model
    center = [v for v in m.vertices if len(m.adjacency[v]) == 6][0]
    spokes = [m.edges[k] for k in m.incident[center]]
    contrib = {}
    for k in range(7):
        active = spokes[:k]
        a = assignment_from_edges(m, active)
        idx = [m.edge_index[e] for e in active]
        base = math.fsum(m.edge_cost[i] for i in idx)
        base += math.fsum(m.turn[(min(p, q), max(p, q))] for p, q in itertools.combinations(idx, 2))
        short = max(0, m.bounds.l_min - k)
        excess = max(0, k - m.bounds.l_max)
        phi = evaluate_objective(m, a) - base - m.weights.w_len * (short ** 2 + excess ** 2)
        assert phi == pytest.approx(_phi_deg_oracle(m, active), abs=1e-9)
        contrib[k] = min((k - 2 * y) ** 2 for y in (0, 1))
    # untouched -> 0, on-route degree -> 0, one extra branch -> positive
    assert contrib[0] == 0 and contrib[2] == 0 and contrib[3] > 0


def test_flow_soundness_on_feasible_assignments(flower_model):
    m = flower_model
    for bits in range(1 << len(m.edges)):
        active = [e for k, e in enumerate(m.edges) if bits >> k & 1]
        a = assignment_from_edges(m, active)
        if not violations(m, a):
            adj = {}
            for i, j in active:
                adj.setdefault(i, set()).add(j)
                adj.setdefault(j, set()).add(i)
            seen, stack = {m.s}, [m.s]
            while stack:
                for v in adj.get(stack.pop(), ()):
                    if v not in seen:
                        seen.add(v)
                        stack.append(v)
            assert m.g in seen


def test_default_bounds(flower_model):
    m = flower_model
    d = hex_distance(m.s, m.g)
    assert (m.bounds.l_min, m.bounds.l_max) == (d, 3 * d)


def test_build_errors(flower):
    grid, s, g = flower
    feats = uniform_features(grid)
    cal = calibrate(feats)
    with pytest.raises(ModelError):
        build_model(grid, feats, cal, None, s, s)
    far = point_to_cell(GeoPoint(80, 0), 5)
    with pytest.raises(ModelError):
        build_model(grid, feats, cal, None, s, far)
    with pytest.raises(ModelError):
        build_model(grid, feats, cal, None, s, g, PathBounds(1, 3))
    split = CorridorGrid.from_cells([s, g], 5)
    with pytest.raises(DisconnectedError):
        build_model(split, feats, cal, None, s, g)


def test_dump_roundtrip(flower_model):
    text = dump_model(flower_model)
    assert dump_model(flower_model) == text
    parsed = parse_model_dump(text)
    assert [v.name for v in parsed.variables] == [v.name for v in flower_model.variables]
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = assignment_from_edges(flower_model, [e for e in flower_model.edges if rng.random() < 0.5])
        vals = flower_model.values(a)
        assert parsed.energy(vals) == pytest.approx(flower_model.energy(vals), rel=1e-12)
        assert bool(parsed.violations(vals)) == bool(violations(flower_model, a))
    with pytest.raises(ModelError):
        parse_model_dump("bogus line\n")


def _optimum(grid, feats, cal, w, s, g):
    from polarroute.solvers import solve_exhaustive

    return solve_exhaustive(build_model(grid, feats, cal, w, s, g)).objective


def test_relabel_symmetry():
    from polarroute.hexgrid import decode_cell, encode_cell

    def shifted(c):
        res, q, r = decode_cell(c)
        return encode_cell(res, q + 40, r - 20)

    # with geometry-free weights the optimum depends only on topology and ice
    w = Weights(w_side=0.0, w_lat=0.0, w_turn=0.0)
    for seed in range(4):
        patch = random_patch(seed, size=8, max_edges=14)
        cal = patch.calibration
        grid2 = CorridorGrid.from_cells([shifted(c) for c in patch.grid.ids], 5)
        feats2 = [CellFeatures(shifted(f.cell), f.time, f.thickness, f.age, f.concentration, f.snow, f.u, f.v,
                               f.sample_count) for f in patch.features]
        assert grid2.ids != patch.grid.ids
        a = _optimum(patch.grid, patch.features, cal, w, patch.s, patch.g)
        b = _optimum(grid2, feats2, cal, w, shifted(patch.s), shifted(patch.g))
        assert a == pytest.approx(b, rel=1e-9)


def test_safety_monotonicity():
    for seed in range(5):
        patch = random_patch(seed, size=8, max_edges=14)
        cal = patch.calibration
        prev = -math.inf
        for k in (0.0, 0.5, 1.0, 2.0, 4.0):
            val = _optimum(patch.grid, patch.features, cal, Weights(k_safety=k), patch.s, patch.g)
            assert val >= prev - 1e-12
            prev = val


def test_drift_term_off_by_default():
    fast = CellFeatures(1, FIXTURE_DATE, 1.0, 2.0, 0.8, 0.2, 0.3, 0.4, 1)
    still = CellFeatures(2, FIXTURE_DATE, 1.0, 2.0, 0.8, 0.2, None, None, 1)
    pp = pair_penalties(fast, still, CAL, AXIS, ENDS)
    assert pp.drift == pytest.approx(0.5)
    assert edge_cost(pp, Weights()) == edge_cost(dataclasses.replace(pp, drift=0.0), Weights())
    assert edge_cost(pp, Weights(w_drift=2.0)) - edge_cost(pp, Weights()) == pytest.approx(1.0)

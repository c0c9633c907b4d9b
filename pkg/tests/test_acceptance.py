"""Acceptance gate: one verdict line per criterion, printed in the terminal summary."""

import json
import math

import numpy as np
import pytest

import conftest
from polarroute.cli import bundle_fingerprint, load_features, load_grid, main
from polarroute.config import RunConfig
from polarroute.envdata import Calibration, CellFeatures
from polarroute.fixtures import FIXTURE_DATE, random_patch, write_demo_inputs
from polarroute.geodesy import GeoPoint, GreatCircleAxis, haversine
from polarroute.model import build_model, pair_penalties, turn_weight, Weights
from polarroute.recovery import Route, export_geojson, extract_active, metrics, reconstruct, route_problems
from polarroute.solvers import (AnnealSchedule, solve_anneal, solve_exhaustive, solve_linegraph_dijkstra)
from polarroute.solvers.result import isclose_rel
from polarroute.synthbench import generate, relative_gap

# every routed solver output seen by the campaigns; checked by the validity criterion
ROUTED: list = []


def verdict(name, ok, detail):
    conftest.VERDICTS.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    assert ok, detail


def collect(model, result):
    ROUTED.append((model, result))


# -- CO2 proxy ------------------------------------------------------------------------------------------

CO2_ROWS = [
    (1483.14, 741_569), (1483.03, 741_514), (1448.62, 724_310),
    (3165.44, 1_582_719), (3148.78, 1_573_889), (3130.94, 1_565_471),
    (4097.32, 2_048_659), (4079.49, 2_039_746), (4043.2914, 2_021_645.71),
]


def straight_route(km):
    a = GeoPoint(0.0, 0.0)
    b = GeoPoint(0.0, math.degrees(km / 6371.0))
    return Route((1, 2), (a, b))


@pytest.mark.parametrize("km,kg", CO2_ROWS)
def test_co2_proxy_rows(km, kg):
    got = metrics(straight_route(km)).co2_kg
    verdict(f"co2 proxy {km} km", abs(got - kg) <= 0.5, f"got {got:.2f} kg, reference {kg} kg")


# -- oracle equivalence on routing fixtures -----------------------------------------------------------------


def test_routing_oracle_equivalence():
    n, lg_hits, sa_hits = 50, 0, 0
    for seed in range(n):
        fx = random_patch(seed)
        model = build_model(fx.grid, fx.features, fx.calibration, Weights(), fx.s, fx.g)
        assert len(fx.grid) <= 12
        best = solve_exhaustive(model)
        lg = solve_linegraph_dijkstra(model)
        sa = solve_anneal(model, AnnealSchedule(restarts=100, seed=seed))
        lg_hits += isclose_rel(lg.objective, best.objective)
        sa_hits += isclose_rel(sa.objective, best.objective)
        for r in (best, lg, sa):
            collect(model, r)
    ok = lg_hits == n and sa_hits >= 0.9 * n
    verdict("routing oracle equivalence", ok, f"linegraph {lg_hits}/{n}, anneal {sa_hits}/{n}")


# -- oracle equivalence on synthetic instances ----------------------------------------------------------------


def test_synthetic_oracle_equivalence():
    hits, gaps = 0, []
    runs = 100
    for seed in range(runs):
        inst = generate(8 + seed % 13, (0.2, 0.5, 0.8)[seed % 3], seed)
        best = solve_exhaustive(inst)
        sa = solve_anneal(inst, AnnealSchedule(seed=seed))
        if isclose_rel(sa.objective, best.objective):
            hits += 1
        else:
            gaps.append(relative_gap(sa.objective, best.objective))
    mean_gap = float(np.mean(gaps)) if gaps else 0.0
    ok = hits >= 0.9 * runs and mean_gap <= 0.02
    verdict("synthetic oracle equivalence", ok, f"{hits}/{runs} optimal, mean gap on misses {mean_gap:.4%}")


# -- scaling stability ---------------------------------------------------------------------------------------------


def test_scaling_stability():
    budget = 30.0
    runs, bad, terms = 0, [], []
    for n in (64, 100, 142, 200, 260, 317):
        for seed in range(3):
            inst = generate(n, 0.5, seed)
            r = solve_anneal(inst, AnnealSchedule(time_budget=budget, seed=seed))
            runs += 1
            terms.append(inst.quad_terms)
            if not r.feasible or r.wall_time > budget:
                bad.append((n, seed, r.feasible, r.wall_time))
    ok = not bad and min(terms) <= 1000 * 1.1 and max(terms) >= 25000
    verdict("scaling stability", ok,
            f"{runs - len(bad)}/{runs} feasible within {budget:g}s over {min(terms)}..{max(terms)} terms")


# -- budget saturation -----------------------------------------------------------------------------------------------


def test_budget_saturation(tmp_path):
    cfg = RunConfig.load(write_demo_inputs(tmp_path))
    grid = load_grid(cfg)
    feats, cal = load_features(cfg, grid)
    s, _ = grid.nearest(cfg.start)
    g, _ = grid.nearest(cfg.goal)
    model = build_model(grid, feats, cal, cfg.weights, s, g)
    best = {}
    for budget in (5.0, 15.0, 30.0, 60.0):
        r = solve_anneal(model, AnnealSchedule(restarts=None, time_budget=budget, seed=cfg.seed))
        collect(model, r)
        best[budget] = r.objective
    rel = abs(best[60.0] - best[30.0]) / abs(best[30.0])
    trail = ", ".join(f"{b:g}s {v:.6f}" for b, v in best.items())
    verdict("budget saturation", rel <= 0.002, f"{len(grid)} cells; {trail}; 60s vs 30s {rel:.4%}")


# -- numerical identities -----------------------------------------------------------------------------------------


def central_angle_km(a, b, r=6371.0):
    p1, p2 = math.radians(a.lat), math.radians(b.lat)
    dl = math.radians(b.lon - a.lon)
    num = math.hypot(math.cos(p2) * math.sin(dl),
                     math.cos(p1) * math.sin(p2) - math.sin(p1) * math.cos(p2) * math.cos(dl))
    den = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(dl)
    return r * math.atan2(num, den)


def test_numerical_identities():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        a = GeoPoint(float(rng.uniform(-89, 89)), float(rng.uniform(-180, 180)))
        b = GeoPoint(float(rng.uniform(-89, 89)), float(rng.uniform(-180, 180)))
        want = central_angle_km(a, b)
        worst = max(worst, abs(haversine(a, b) - want) / max(want, 1e-12))
    anchors = [abs(turn_weight(t, 1.3) - f * 1.3) for t, f in ((0.0, 0.0), (60.0, 0.5), (180.0, 2.0))]

    axis = GreatCircleAxis(GeoPoint(70, 178), GeoPoint(71, -178))
    ends = (GeoPoint(70.2, 179), GeoPoint(70.3, 179.5))
    clipped = 0
    for _ in range(10_000):
        warn = rng.uniform(0, 2, 4)
        cal = Calibration(*warn, warn[0] + rng.uniform(-0.5, 2), warn[1] + rng.uniform(-0.5, 2),
                          warn[2] - rng.uniform(-0.5, 1), warn[3] + rng.uniform(-0.5, 1))
        fi, fj = (CellFeatures(k, FIXTURE_DATE, *rng.uniform(-1, 5, 4), 0.0, 0.0, 1) for k in (1, 2))
        pp = pair_penalties(fi, fj, cal, axis, ends)
        clipped += all(0.0 <= p <= 1.0 for p in (pp.p_thick, pp.p_age, pp.p_conc, pp.p_snow))
    ok = worst <= 1e-6 and max(anchors) <= 1e-9 and clipped == 10_000
    verdict("numerical identities", ok,
            f"haversine worst rel {worst:.1e}, turn anchors max err {max(anchors):.1e}, clipped {clipped}/10000")


# -- determinism ---------------------------------------------------------------------------------------------------


def test_determinism(tmp_path, monkeypatch):
    sched = {"restarts": 8, "sweeps": 20}
    runs = {}
    for tag, workers in (("a", 1), ("b", 1), ("c", 4)):
        cfg = write_demo_inputs(tmp_path / f"in_{tag}", solver={"name": "anneal", "workers": workers,
                                                                "schedule": sched})
        work = tmp_path / tag
        work.mkdir()
        monkeypatch.chdir(work)
        assert main(["optimize", "--config", str(cfg), "--seed", "5", "--out", "bundle"]) == 0
        runs[tag] = bundle_fingerprint(work / "bundle")
        rec = json.loads((work / "bundle" / "result.json").read_text())
        assert rec["status"] == "solved"
    # the echoed config differs between runs only by the inputs' directory and the thread count
    same_run = {k: v for k, v in runs["a"].items() if k != "config.json"} == \
               {k: v for k, v in runs["b"].items() if k != "config.json"}
    threads = {k: v for k, v in runs["a"].items() if k != "config.json"} == \
              {k: v for k, v in runs["c"].items() if k != "config.json"}

    # identical inputs in place: byte-identical including the config echo
    twice = []
    for tag in ("x", "y"):
        work = tmp_path / tag
        work.mkdir()
        monkeypatch.chdir(work)
        assert main(["optimize", "--config", str(tmp_path / "in_a" / "config.json"), "--seed", "5",
                     "--out", "bundle"]) == 0
        twice.append(bundle_fingerprint(work / "bundle"))
    ok = same_run and threads and twice[0] == twice[1]
    verdict("determinism", ok, f"rerun identical {twice[0] == twice[1]}, 1 vs 4 threads identical {threads}")


# -- route validity over everything above -----------------------------------------------------------------------


def meridian_continuous(route, m, path):
    doc = export_geojson(route, m, path)
    geom = doc["features"][0]["geometry"]
    parts = [geom["coordinates"]] if geom["type"] == "LineString" else geom["coordinates"]
    for part in parts:
        for (x0, _), (x1, _) in zip(part, part[1:]):
            if abs(x1 - x0) > 180.0:
                return False
    for a, b in zip(parts, parts[1:]):
        if abs(abs(a[-1][0]) - 180.0) > 1e-9 or a[-1][1] != b[0][1] or a[-1][0] != -b[0][0]:
            return False
    return True


def test_route_validity(tmp_path):
    if not ROUTED:
        pytest.skip("no campaign outputs collected (run the whole module)")
    failures = []
    for k, (model, result) in enumerate(ROUTED):
        if not result.feasible:
            failures.append((k, "infeasible"))
            continue
        route = reconstruct(extract_active(result), model)
        problems = route_problems(route, model)
        if route.relinked_edges:
            problems.append("needed relinking")
        if not meridian_continuous(route, metrics(route), tmp_path / "r.geojson"):
            problems.append("antimeridian discontinuity")
        if problems:
            failures.append((k, problems))
    verdict("route validity", not failures, f"{len(ROUTED) - len(failures)}/{len(ROUTED)} solver outputs valid")

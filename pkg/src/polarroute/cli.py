"""Command-line entry point.

Exit codes: 0 success, 2 model infeasible, 3 input validation, 4 I/O, 5 adapter.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as dt
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

from .config import RunConfig, SolverConfig
from .envdata import calibrate, load_samples, make_policy, map_to_cells
from .errors import AdapterError, ConfigError, DisconnectedError, PolarRouteError, RecoveryError
from .hexgrid import CorridorGrid, build_corridor, cell_to_string, polygons_from_geojson, write_grid_dump
from .model import build_model, dump_model
from .recovery import export_geojson, extract_active, metrics, reconstruct, write_metrics_csv
from .solvers import (AdapterConfig, external_adapter, solve_anneal, solve_exhaustive,
                      solve_linegraph_dijkstra)
from .synthbench import run_benchmark

logger = logging.getLogger("polarroute")

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4
EXIT_ADAPTER = 5

TIMING_FILE = "timing.json"
SWEEP_COLUMNS = ("budget_s", "objective", "selected_nodes", "km", "zigzag_pct", "co2_kg")


class Infeasible(PolarRouteError):
    pass


# ---------------------------------------------------------------------------
# pipeline stages


def load_grid(cfg: RunConfig) -> CorridorGrid:
    cfg.require("corridor_path", "landmask_path")
    corridor = polygons_from_geojson(cfg.corridor_path)
    land = polygons_from_geojson(cfg.landmask_path)
    return build_corridor(corridor, land, cfg.resolution)


def load_features(cfg: RunConfig, grid: CorridorGrid):
    cfg.require("env_csv_path")
    samples = load_samples(cfg.env_csv_path)
    when = dt.date.fromisoformat(cfg.date) if cfg.date else None
    feats = map_to_cells(samples, grid, when)
    cal = calibrate(feats, make_policy(cfg.calibration))
    return feats, cal


def run_solver(model, cfg: RunConfig):
    sc = cfg.solver
    if sc.name == "exhaustive":
        return solve_exhaustive(model)
    if sc.name == "linegraph":
        return solve_linegraph_dijkstra(model)
    if sc.name == "anneal":
        return solve_anneal(model, dataclasses.replace(sc.schedule, seed=cfg.seed), workers=sc.workers)
    return external_adapter(model, AdapterConfig.from_env(sc.adapter_timeout))


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def optimize(cfg: RunConfig, out: Path) -> dict:
    """Full pipeline into a reproducibility bundle; returns the summary record."""
    cfg.require("corridor_path", "landmask_path", "env_csv_path", "start", "goal")
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()
    (out / "config.json").write_text(cfg.to_json())

    grid = load_grid(cfg)
    if not grid.cells:
        raise Infeasible("corridor grid has no ocean cells")
    feats, cal = load_features(cfg, grid)
    cal.dump(out / "calibration.json")
    s, s_km = grid.nearest(cfg.start)
    g, g_km = grid.nearest(cfg.goal)
    snap = {"start": {"cell": cell_to_string(s), "snap_km": s_km},
            "goal": {"cell": cell_to_string(g), "snap_km": g_km}}
    logger.info("start snapped %.2f km to %s, goal snapped %.2f km to %s", s_km, cell_to_string(s), g_km,
                cell_to_string(g))
    try:
        model = build_model(grid, feats, cal, cfg.weights, s, g, cfg.bounds, alignment=cfg.alignment)
    except DisconnectedError as exc:
        _write_json(out / "result.json", {"status": "disconnected", "message": str(exc), **snap})
        raise Infeasible(str(exc)) from None
    (out / "model.txt").write_text(dump_model(model))

    result = run_solver(model, cfg)
    result.seed = cfg.seed
    record = {**result.to_record(include_timing=False), **snap, "nodes": len(grid),
              "edges": model.num_edge_vars, "quad_terms": model.quad_term_count, "status": "solved"}
    if not result.feasible:
        record["status"] = "infeasible"
        _write_json(out / "result.json", record)
        _write_json(out / TIMING_FILE, {"solver_s": result.wall_time, "total_s": time.perf_counter() - t_start})
        raise Infeasible(f"solver returned an infeasible assignment: {result.violations[:3]}")

    route = reconstruct(extract_active(result), model)
    m = metrics(route)
    record["route"] = [cell_to_string(c) for c in route.cells]
    record["relinked_edges"] = [[cell_to_string(i), cell_to_string(j)] for i, j in route.relinked_edges]
    record["metrics"] = m.to_dict()
    _write_json(out / "result.json", record)
    export_geojson(route, m, out / "route.geojson", {"solver": result.solver_name, "objective": result.objective})
    row = {"solver": result.solver_name, "nodes": len(grid), "quad_terms": model.quad_term_count,
           "objective": repr(result.objective), "selected_nodes": m.selected_nodes, "km": repr(m.length_km),
           "zigzag_pct": repr(m.zigzag_pct), "co2_kg": repr(m.co2_kg), "time_s": f"{result.wall_time:.6f}"}
    write_metrics_csv(out / "metrics.csv", [row])
    _write_json(out / TIMING_FILE, {"solver_s": result.wall_time, "total_s": time.perf_counter() - t_start})
    return record


def bundle_fingerprint(out: Path) -> dict:
    """sha256 per bundle file with wall-clock values masked.

    ``timing.json`` is skipped and the ``time_s`` column of ``metrics.csv`` is
    blanked; everything else must match byte for byte between reruns.
    """
    digests = {}
    for p in sorted(Path(out).rglob("*")):
        if not p.is_file() or p.name == TIMING_FILE:
            continue
        data = p.read_bytes()
        if p.name == "metrics.csv":
            rows = list(csv.reader(data.decode().splitlines()))
            k = rows[0].index("time_s")
            data = "\n".join(",".join(r[:k] + [""] + r[k + 1:]) for r in rows).encode()
        digests[str(p.relative_to(out))] = hashlib.sha256(data).hexdigest()
    return digests


# ---------------------------------------------------------------------------
# commands


def cmd_build_grid(cfg: RunConfig, out: Path) -> int:
    grid = load_grid(cfg)
    out.mkdir(parents=True, exist_ok=True)
    write_grid_dump(grid, out / "grid.txt")
    summary = {"resolution": grid.resolution, "ocean_cells": len(grid), "land_cells": len(grid.land_cells),
               "edges": len(grid.edges), "ocean_fraction": grid.ocean_fraction()}
    _write_json(out / "grid_summary.json", summary)
    if not grid.cells:
        logger.warning("grid is empty: the corridor lies entirely on land")
    print(f"{summary['ocean_cells']} ocean cells, ocean fraction {summary['ocean_fraction']:.3f}")
    return EXIT_OK


def cmd_map_features(cfg: RunConfig, out: Path) -> int:
    grid = load_grid(cfg)
    feats, cal = load_features(cfg, grid)
    out.mkdir(parents=True, exist_ok=True)
    cal.dump(out / "calibration.json")
    with (out / "features.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell", "date", "thickness", "age", "concentration", "snow", "u", "v", "samples"])
        for f in feats:
            vals = [f.thickness, f.age, f.concentration, f.snow, f.u, f.v]
            w.writerow([cell_to_string(f.cell), f.time.isoformat()]
                       + ["NA" if v is None else repr(v) for v in vals] + [f.sample_count])
    print(f"{len(feats)} of {len(grid)} cells populated")
    return EXIT_OK


def cmd_optimize(cfg: RunConfig, out: Path) -> int:
    rec = optimize(cfg, out)
    m = rec["metrics"]
    print(f"{rec['solver']}: objective {rec['objective']:.6f}, {m['selected_nodes']} cells, "
          f"{m['length_km']:.2f} km, zigzag {m['zigzag_pct']:.2f}%, CO2 {m['co2_kg']:.0f} kg")
    return EXIT_OK


def cmd_bench(cfg: RunConfig, out: Path) -> int:
    b = cfg.bench
    sched = dataclasses.replace(cfg.solver.schedule, seed=cfg.seed)
    report = run_benchmark(b.sizes, b.densities, b.solvers, b.seeds, schedule=sched, params=b.params,
                           workers=b.workers)
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "bench.csv")
    agg = [{"quad_terms": k[0], "solver": k[1], **v} for k, v in report.aggregate().items()]
    _write_json(out / "bench_summary.json", {"config": report.params, "aggregate": agg})
    failed = sum(r.error is not None for r in report.rows)
    print(f"{len(report.rows)} runs, {failed} failed")
    return EXIT_OK


def cmd_budget_sweep(cfg: RunConfig, out: Path) -> int:
    if not cfg.budgets:
        raise ConfigError("budget list is empty")
    if any(b <= 0 for b in cfg.budgets):
        raise ConfigError("budgets must be positive")
    rows = []
    for budget in cfg.budgets:
        sched = dataclasses.replace(cfg.solver.schedule, restarts=None, time_budget=float(budget), seed=cfg.seed)
        sub = cfg.replace(solver=dataclasses.replace(cfg.solver, name="anneal", schedule=sched))
        rec = optimize(sub, out / f"budget_{budget:g}s")
        m = rec["metrics"]
        rows.append([f"{budget:g}", repr(rec["objective"]), m["selected_nodes"], repr(m["length_km"]),
                     repr(m["zigzag_pct"]), repr(m["co2_kg"])])
        print(f"budget {budget:g}s: objective {rec['objective']:.6f}, {m['length_km']:.2f} km")
    with (out / "budget_sweep.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        w.writerows(rows)
    return EXIT_OK


COMMANDS = {
    "build-grid": cmd_build_grid,
    "map-features": cmd_map_features,
    "optimize": cmd_optimize,
    "bench": cmd_bench,
    "budget-sweep": cmd_budget_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polarroute", description="Sea-ice aware route optimisation")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="JSON run configuration (defaults apply when omitted)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--solver", choices=("exhaustive", "linegraph", "anneal", "external"))
        sp.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
        if name == "budget-sweep":
            sp.add_argument("--budgets", help="comma-separated seconds, e.g. 5,15,30,60")
    return p


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.solver:
        if args.command == "bench":
            cfg = cfg.replace(bench=dataclasses.replace(cfg.bench, solvers=(args.solver,)))
        else:
            cfg = cfg.replace(solver=dataclasses.replace(cfg.solver, name=args.solver))
    if args.out:
        cfg = cfg.replace(output_dir=str(args.out))
    if getattr(args, "budgets", None) is not None:
        try:
            budgets = tuple(float(x) for x in args.budgets.split(",") if x.strip())
        except ValueError:
            raise ConfigError(f"bad --budgets value {args.budgets!r}") from None
        cfg = cfg.replace(budgets=budgets)
    # the echoed schedule carries the effective seed
    sched = dataclasses.replace(cfg.solver.schedule, seed=cfg.seed)
    return cfg.replace(solver=SolverConfig(cfg.solver.name, sched, cfg.solver.workers, cfg.solver.adapter_timeout))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, Path(cfg.output_dir))
    except (Infeasible, RecoveryError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except AdapterError as exc:
        print(f"adapter error: {exc}", file=sys.stderr)
        return EXIT_ADAPTER
    except (PolarRouteError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

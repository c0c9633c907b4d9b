"""Seeded synthetic inputs: corridor polygons, land masks, ice fields and small lattice patches."""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .envdata import CellFeatures, EnvSample, calibrate, write_samples
from .geodesy import GeoPoint
from .hexgrid import CorridorGrid, Polygon, hex_distance, neighbors, point_to_cell

FIXTURE_DATE = dt.date(2024, 9, 15)


def box(lon0: float, lon1: float, lat0: float, lat1: float, step: float = 1.0) -> Polygon:
    """Lon/lat box; ``lon1 < lon0`` means the box crosses the antimeridian."""
    span = (lon1 - lon0) % 360.0
    n = max(1, math.ceil(span / step))
    south = [(lon0 + span * k / n, lat0) for k in range(n + 1)]
    north = [(lon0 + span * k / n, lat1) for k in range(n, -1, -1)]
    ring = [((x + 180.0) % 360.0 - 180.0, y) for x, y in south + north]
    return Polygon.from_lonlat(ring)


def ice_field(point: GeoPoint, seed: int = 0) -> dict:
    """Smooth, seeded sea-ice state at a point."""
    rng = np.random.default_rng(seed)
    ph = rng.uniform(0, 2 * math.pi, 4)
    lon = math.radians(point.lon)
    lat = math.radians(point.lat)
    a = math.sin(3 * lon + ph[0]) * math.cos(5 * lat + ph[1])
    b = math.cos(2 * lon + ph[2]) * math.sin(7 * lat + ph[3])
    return {
        "sithick": max(0.0, 1.5 + 1.0 * a + 0.4 * b),
        "siage": max(0.0, 2.0 + 1.5 * b),
        "siconc": min(1.0, max(0.0, 0.75 + 0.2 * a)),
        "sisnthick": max(0.0, 0.2 + 0.1 * (a + b)),
        "usi": 0.1 * a,
        "vsi": 0.1 * b,
    }


def synthetic_samples(lat0: float, lat1: float, lon0: float, lon1: float, step_deg: float = 0.25,
                      seed: int = 0, date: dt.date = FIXTURE_DATE) -> list[EnvSample]:
    """Regular lat/lon sample grid over a (possibly antimeridian-crossing) box."""
    span = (lon1 - lon0) % 360.0
    out = []
    nlat = int(round((lat1 - lat0) / step_deg)) + 1
    nlon = int(round(span / step_deg)) + 1
    for i in range(nlat):
        lat = lat0 + i * step_deg
        for j in range(nlon):
            p = GeoPoint(lat, lon0 + j * step_deg)
            out.append(EnvSample(p, date, **ice_field(p, seed)))
    return out


def random_features(grid: CorridorGrid, rng: np.random.Generator, missing_rate: float = 0.05,
                    date: dt.date = FIXTURE_DATE) -> list[CellFeatures]:
    """Independent random per-cell features; some cells or fields left missing."""
    out = []
    for c in grid.ids:
        if rng.random() < missing_rate:
            continue
        vals = {
            "thickness": float(rng.uniform(0.0, 3.0)),
            "age": float(rng.uniform(0.0, 5.0)),
            "concentration": float(rng.uniform(0.3, 1.0)),
            "snow": float(rng.uniform(0.0, 0.5)),
        }
        for k in list(vals):
            if rng.random() < missing_rate:
                vals[k] = None
        out.append(CellFeatures(c, date, u=0.0, v=0.0, sample_count=1, **vals))
    return out


@dataclass
class PatchFixture:
    grid: CorridorGrid
    features: list
    s: int
    g: int

    @property
    def calibration(self):
        return calibrate(self.features)


def random_patch(seed: int, size: int = 12, max_edges: int = 22, resolution: int = 5,
                 origin: GeoPoint = GeoPoint(70.0, 178.0)) -> PatchFixture:
    """A connected, elongated lattice patch with random ice features.

    Growth is biased along a random lattice direction so that the patch stays
    thin; start and goal are the two cells farthest apart.
    """
    rng = np.random.default_rng(seed)
    for _ in range(1000):
        start = point_to_cell(origin, resolution)
        cells = [start]
        members = {start}
        direction = int(rng.integers(6))
        target = start
        for _ in range(4 * size):
            target = neighbors(target)[direction]
        while len(cells) < size:
            frontier = sorted({n for c in cells for n in neighbors(c)} - members)
            score = -np.array([hex_distance(n, target) for n in frontier], dtype=float)
            p = np.exp(0.7 * (score - score.max()))
            pick = frontier[int(rng.choice(len(frontier), p=p / p.sum()))]
            cells.append(pick)
            members.add(pick)
        grid = CorridorGrid.from_cells(cells, resolution)
        if len(grid.edges) > max_edges:
            continue
        ids = grid.ids
        s, g = max(((a, b) for a in ids for b in ids if a < b), key=lambda ab: (hex_distance(*ab), -ab[0], -ab[1]))
        features = random_features(grid, rng)
        if len(features) < 2:
            continue
        return PatchFixture(grid, features, s, g)
    raise RuntimeError("could not grow a patch within the edge budget")


def line_patch(length: int, resolution: int = 5, origin: GeoPoint = GeoPoint(70.0, 178.0),
               direction: int = 0) -> CorridorGrid:
    """Straight run of ``length`` cells along one lattice direction."""
    cells = [point_to_cell(origin, resolution)]
    for _ in range(length - 1):
        cells.append(neighbors(cells[-1])[direction])
    return CorridorGrid.from_cells(cells, resolution)


def uniform_features(grid: CorridorGrid, date: dt.date = FIXTURE_DATE, **values) -> list[CellFeatures]:
    base = {"thickness": 1.0, "age": 1.0, "concentration": 0.8, "snow": 0.1}
    base.update(values)
    return [CellFeatures(c, date, u=0.0, v=0.0, sample_count=1, **base) for c in grid.ids]


def polygon_geojson(polys) -> dict:
    feats = [{"type": "Feature", "properties": {},
              "geometry": {"type": "Polygon", "coordinates": [[list(p) for p in ring] for ring in poly.rings]}}
             for poly in polys]
    return {"type": "FeatureCollection", "features": feats}


def write_demo_inputs(directory, *, lon0: float = 174.0, lon1: float = -174.0, lat0: float = 70.0,
                      lat1: float = 72.5, resolution: int = 5, seed: int = 0, island: bool = True,
                      **overrides) -> Path:
    """Corridor, land mask, ice CSV and a config file for an antimeridian demo.

    Returns the config path.  ``overrides`` are merged into the config record.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    land = []
    if island:
        land.append(Polygon.from_lonlat([(178.6, 70.9), (179.7, 70.9), (179.7, 71.4), (178.6, 71.4)]))
    (d / "corridor.geojson").write_text(json.dumps(polygon_geojson([box(lon0, lon1, lat0, lat1)])))
    (d / "land.geojson").write_text(json.dumps(polygon_geojson(land)))
    write_samples(synthetic_samples(lat0, lat1, lon0, lon1, 0.1, seed), d / "ice.csv")
    span = (lon1 - lon0) % 360.0
    record = {
        "corridor_path": "corridor.geojson",
        "landmask_path": "land.geojson",
        "env_csv_path": "ice.csv",
        "resolution": resolution,
        "start": [lat0 + 0.35 * (lat1 - lat0), lon0 + 0.05 * span],
        "goal": [lat0 + 0.65 * (lat1 - lat0), lon0 + 0.95 * span],
        "seed": seed,
    }
    record.update(overrides)
    path = d / "config.json"
    path.write_text(json.dumps(record, indent=2) + "\n")
    return path

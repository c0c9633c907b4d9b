"""Hexagonal ocean grids for polar corridors.

Cells live on a pointy-top axial hex lattice laid over a north-polar Lambert
azimuthal equal-area projection of the sphere.  Because the projection is
equal-area, every cell covers exactly the same spherical area, and because the
lattice is planar around the pole, adjacency is continuous across the 180°
meridian without any special casing.  Centroids are back-projected to lat/lon.

Mean cell area follows an aperture-7 progression anchored at 252.9 km² for
level 5 (see ``mean_cell_area_km2``).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import shapely
import shapely.affinity
from shapely.geometry import Polygon as ShapelyPolygon
from shapely.strtree import STRtree

from .errors import InvalidCellError, MalformedPolygonError, ResolutionError
from .geodesy import EARTH_RADIUS_KM, GeoPoint, haversine

logger = logging.getLogger(__name__)

MIN_RESOLUTION = 3
MAX_RESOLUTION = 8
LEVEL5_AREA_KM2 = 252.9
APERTURE = 7

# Lattice domain: cells whose centre lies south of this latitude are invalid.
MIN_CENTER_LAT = -60.0

_OFFSET = 1 << 28
_COORD_MASK = (1 << 29) - 1
_MODE_BIT = 1 << 62

# axial neighbour directions, fixed order
_DIRECTIONS = ((1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1))


# ---------------------------------------------------------------------------
# polygons and longitude normalisation


@dataclass(frozen=True)
class Polygon:
    """Polygon rings as ``(lon, lat)`` tuples; first ring outer, others holes.

    ``shifted`` marks longitudes held in [0, 360) inside a normalisation scope.
    """

    rings: tuple
    shifted: bool = False

    @classmethod
    def from_lonlat(cls, outer: Sequence, holes: Sequence = (), shifted: bool = False) -> "Polygon":
        rings = [tuple((float(x), float(y)) for x, y in outer)]
        rings += [tuple((float(x), float(y)) for x, y in h) for h in holes]
        return cls(tuple(rings), shifted)

    @property
    def outer(self):
        return self.rings[0]

    def to_shapely(self) -> ShapelyPolygon:
        return ShapelyPolygon(self.rings[0], self.rings[1:])


def _close_ring(ring) -> tuple:
    pts = [tuple(map(float, p[:2])) for p in ring]
    if len(pts) and pts[0] != pts[-1]:
        pts.append(pts[0])
    if len(set(pts)) < 3:
        raise MalformedPolygonError(f"ring needs at least 3 distinct vertices, got {len(set(pts))}")
    return tuple(pts)


def _signed_area(ring) -> float:
    x = np.array([p[0] for p in ring])
    y = np.array([p[1] for p in ring])
    return 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))


def shift_lon(x: float) -> float:
    return x + 360.0 if x < 0.0 else x


def unshift_lon(x: float) -> float:
    return x - 360.0 if x >= 180.0 else x


def normalize_longitudes(poly: Polygon) -> Polygon:
    """Map every vertex longitude into [0, 360) and orient rings.

    Outer rings come back counter-clockwise and holes clockwise.
    """
    rings = []
    for k, ring in enumerate(poly.rings):
        closed = _close_ring(ring)
        if not poly.shifted:
            closed = tuple((shift_lon(x), y) for x, y in closed)
        area = _signed_area(closed)
        if (k == 0 and area < 0) or (k > 0 and area > 0):
            closed = closed[::-1]
        rings.append(closed)
    out = Polygon(tuple(rings), shifted=True)
    if not out.to_shapely().exterior.is_simple:
        raise MalformedPolygonError("outer ring self-intersects after normalisation")
    return out


def denormalize_longitudes(poly: Polygon) -> Polygon:
    if not poly.shifted:
        return poly
    rings = tuple(tuple((unshift_lon(x), y) for x, y in ring) for ring in poly.rings)
    return Polygon(rings, shifted=False)


def _unwrapped_land(poly: Polygon) -> list[ShapelyPolygon]:
    """Land polygon in shifted space, plus copies displaced by ±360°."""
    rings = []
    for ring in poly.rings:
        closed = _close_ring(ring)
        xs = [shift_lon(x) if not poly.shifted else x for x, _ in closed]
        if max(xs) - min(xs) > 180.0:
            # crosses the 0° seam of the shifted space; unwrap consecutively
            xs = [closed[0][0]]
            for x, _ in closed[1:]:
                prev = xs[-1]
                x = x + 360.0 * round((prev - x) / 360.0)
                xs.append(x)
        rings.append([(x, y) for x, (_, y) in zip(xs, closed)])
    base = ShapelyPolygon(rings[0], rings[1:])
    if not base.is_valid:
        base = shapely.make_valid(base)
    return [shapely.affinity.translate(base, xoff=dx) for dx in (-360.0, 0.0, 360.0)]


def polygons_from_geojson(obj) -> list[Polygon]:
    """Extract Polygon/MultiPolygon geometries from parsed GeoJSON."""
    if isinstance(obj, (str, Path)):
        obj = json.loads(Path(obj).read_text())
    kind = obj.get("type")
    if kind == "FeatureCollection":
        out = []
        for feat in obj["features"]:
            out.extend(polygons_from_geojson(feat))
        return out
    if kind == "Feature":
        return polygons_from_geojson(obj["geometry"]) if obj.get("geometry") else []
    if kind == "Polygon":
        coords = obj["coordinates"]
        return [Polygon.from_lonlat(coords[0], coords[1:])]
    if kind == "MultiPolygon":
        return [Polygon.from_lonlat(p[0], p[1:]) for p in obj["coordinates"]]
    if kind == "GeometryCollection":
        out = []
        for g in obj["geometries"]:
            out.extend(polygons_from_geojson(g))
        return out
    raise MalformedPolygonError(f"unsupported GeoJSON type {kind!r}")


# ---------------------------------------------------------------------------
# lattice


def check_resolution(resolution: int) -> int:
    if not isinstance(resolution, (int, np.integer)) or not MIN_RESOLUTION <= resolution <= MAX_RESOLUTION:
        raise ResolutionError(f"resolution must be an integer in [{MIN_RESOLUTION}, {MAX_RESOLUTION}], got {resolution!r}")
    return int(resolution)


def mean_cell_area_km2(resolution: int) -> float:
    """Spherical area of every cell at this level (cells are exactly equal-area)."""
    return LEVEL5_AREA_KM2 * APERTURE ** (5 - check_resolution(resolution))


def hex_edge_km(resolution: int) -> float:
    """Side length of the planar hexagon in projected km."""
    return math.sqrt(2.0 * mean_cell_area_km2(resolution) / (3.0 * math.sqrt(3.0)))


def cell_pitch_km(resolution: int) -> float:
    """Centre-to-centre spacing in the projected plane."""
    return math.sqrt(3.0) * hex_edge_km(resolution)


def project(lat, lon):
    """North-polar Lambert azimuthal equal-area projection (km)."""
    colat = np.radians(90.0 - np.asarray(lat, dtype=float))
    lam = np.radians(np.asarray(lon, dtype=float))
    rho = 2.0 * EARTH_RADIUS_KM * np.sin(colat / 2.0)
    return rho * np.sin(lam), -rho * np.cos(lam)


def unproject(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rho = np.hypot(x, y)
    colat = 2.0 * np.arcsin(np.clip(rho / (2.0 * EARTH_RADIUS_KM), -1.0, 1.0))
    lat = 90.0 - np.degrees(colat)
    lon = np.degrees(np.arctan2(x, -y))
    lon = np.where(lon >= 180.0, lon - 360.0, lon)
    return lat, lon


def _axial_to_xy(q, r, a):
    return a * math.sqrt(3.0) * (q + r / 2.0), a * 1.5 * r


def _xy_to_axial(x, y, a):
    qf = (math.sqrt(3.0) / 3.0 * x - y / 3.0) / a
    rf = (2.0 / 3.0 * y) / a
    sf = -qf - rf
    q, r, s = round(qf), round(rf), round(sf)
    dq, dr, ds = abs(q - qf), abs(r - rf), abs(s - sf)
    if dq > dr and dq > ds:
        q = -r - s
    elif dr > ds:
        r = -q - s
    return int(q), int(r)


def encode_cell(resolution: int, q: int, r: int) -> int:
    return _MODE_BIT | (resolution << 58) | ((q + _OFFSET) << 29) | (r + _OFFSET)


def decode_cell(cell: int) -> tuple[int, int, int]:
    """Return ``(resolution, q, r)``; raises on a malformed id."""
    if not isinstance(cell, (int, np.integer)) or cell < 0 or not cell & _MODE_BIT:
        raise InvalidCellError(f"not a cell id: {cell!r}")
    cell = int(cell)
    res = (cell >> 58) & 0xF
    q = ((cell >> 29) & _COORD_MASK) - _OFFSET
    r = (cell & _COORD_MASK) - _OFFSET
    if not MIN_RESOLUTION <= res <= MAX_RESOLUTION or cell >> 63:
        raise InvalidCellError(f"not a cell id: {cell:#x}")
    return res, q, r


def cell_resolution(cell: int) -> int:
    return decode_cell(cell)[0]


def cell_to_string(cell: int) -> str:
    return format(int(cell), "016x")


def cell_from_string(text: str) -> int:
    try:
        cell = int(text, 16)
    except ValueError:
        raise InvalidCellError(f"not a cell id: {text!r}") from None
    decode_cell(cell)
    return cell


def _center_xy(cell: int) -> tuple[float, float]:
    res, q, r = decode_cell(cell)
    return _axial_to_xy(q, r, hex_edge_km(res))


def _in_domain(x: float, y: float) -> bool:
    lat, _ = unproject(x, y)
    return float(lat) >= MIN_CENTER_LAT


def is_valid_cell(cell) -> bool:
    try:
        x, y = _center_xy(cell)
    except InvalidCellError:
        return False
    return _in_domain(x, y)


def _require_valid(cell) -> None:
    if not is_valid_cell(cell):
        raise InvalidCellError(f"invalid cell id: {cell!r}")


def cell_centroid(cell: int) -> GeoPoint:
    _require_valid(cell)
    lat, lon = unproject(*_center_xy(cell))
    return GeoPoint(float(lat), float(lon))


def point_to_cell(point: GeoPoint, resolution: int) -> int:
    res = check_resolution(resolution)
    x, y = project(point.lat, point.lon)
    q, r = _xy_to_axial(float(x), float(y), hex_edge_km(res))
    cell = encode_cell(res, q, r)
    _require_valid(cell)
    return cell


def neighbors(cell: int) -> list[int]:
    """Lattice neighbours in fixed direction order (at most 6)."""
    _require_valid(cell)
    res, q, r = decode_cell(cell)
    out = []
    for dq, dr in _DIRECTIONS:
        nb = encode_cell(res, q + dq, r + dr)
        if is_valid_cell(nb):
            out.append(nb)
    return out


def hex_distance(a: int, b: int) -> int:
    """Minimum number of lattice steps between two cells of the same level."""
    ra, qa, rra = decode_cell(a)
    rb, qb, rrb = decode_cell(b)
    if ra != rb:
        raise InvalidCellError("cells at different resolutions")
    dq, dr = qa - qb, rra - rrb
    return (abs(dq) + abs(dr) + abs(dq + dr)) // 2


def cell_boundary(cell: int, densify: int = 0) -> list[GeoPoint]:
    """Hexagon vertices (counter-clockwise in the plane), optionally densified."""
    _require_valid(cell)
    res, _, _ = decode_cell(cell)
    a = hex_edge_km(res)
    cx, cy = _center_xy(cell)
    corners = [
        (cx + a * math.cos(math.radians(60 * k - 30)), cy + a * math.sin(math.radians(60 * k - 30)))
        for k in range(6)
    ]
    pts = []
    for k in range(6):
        (x0, y0), (x1, y1) = corners[k], corners[(k + 1) % 6]
        for t in range(densify + 1):
            f = t / (densify + 1)
            pts.append((x0 + f * (x1 - x0), y0 + f * (y1 - y0)))
    lat, lon = unproject([p[0] for p in pts], [p[1] for p in pts])
    return [GeoPoint(float(la), float(lo)) for la, lo in zip(lat, lon)]


def _footprints(cells: Sequence[int], densify: int = 2) -> list[ShapelyPolygon]:
    """Cell hexagons in shifted lon/lat space, unwrapped around each centroid."""
    out = []
    for cell in cells:
        cx, cy = _center_xy(cell)
        res = decode_cell(cell)[0]
        if math.hypot(cx, cy) < hex_edge_km(res):
            # hexagon contains the pole: a polar cap in lon/lat
            lat_min = min(p.lat for p in cell_boundary(cell, densify))
            out.append(shapely.box(0.0, lat_min, 360.0, 90.0))
            continue
        c_lon = shift_lon(cell_centroid(cell).lon)
        ring = []
        for p in cell_boundary(cell, densify):
            x = shift_lon(p.lon)
            x += 360.0 * round((c_lon - x) / 360.0)
            ring.append((x, p.lat))
        out.append(ShapelyPolygon(ring))
    return out


def cell_footprint(cell: int) -> ShapelyPolygon:
    return _footprints([cell])[0]


def polygon_to_cells(poly: Polygon, resolution: int) -> set[int]:
    """All lattice cells whose hexagon intersects the polygon."""
    res = check_resolution(resolution)
    norm = poly if poly.shifted else normalize_longitudes(poly)
    shape = norm.to_shapely()
    if shape.is_empty or shape.area == 0.0:
        return set()

    # projected bounding box of the densified boundary (encloses the interior)
    boundary = shape.exterior.segmentize(0.25)
    bx, by = np.asarray(boundary.xy)
    px, py = project(by, bx)
    a = hex_edge_km(res)
    pad = 2.0 * a
    xmin, xmax = px.min() - pad, px.max() + pad
    ymin, ymax = py.min() - pad, py.max() + pad

    r_lo = math.floor(ymin / (1.5 * a))
    r_hi = math.ceil(ymax / (1.5 * a))
    candidates = []
    for r in range(r_lo, r_hi + 1):
        q_lo = math.floor(xmin / (a * math.sqrt(3.0)) - r / 2.0)
        q_hi = math.ceil(xmax / (a * math.sqrt(3.0)) - r / 2.0)
        for q in range(q_lo, q_hi + 1):
            cell = encode_cell(res, q, r)
            if is_valid_cell(cell):
                candidates.append(cell)
    if not candidates:
        return set()
    shapely.prepare(shape)
    feet = np.array(_footprints(candidates), dtype=object)
    hit = shapely.intersects(shape, feet)
    return {c for c, h in zip(candidates, hit) if h}


def filter_land(cells: Iterable[int], land: Sequence[Polygon]) -> set[int]:
    """Drop every cell whose hexagon intersects any land polygon."""
    cells = sorted(set(cells))
    if not land or not cells:
        return set(cells)
    geoms = []
    for poly in land:
        geoms.extend(_unwrapped_land(poly))
    tree = STRtree(geoms)
    feet = _footprints(cells)
    hits = tree.query(feet, predicate="intersects")
    wet = np.ones(len(cells), dtype=bool)
    wet[np.unique(hits[0])] = False
    return {c for c, keep in zip(cells, wet) if keep}


# ---------------------------------------------------------------------------
# corridor grids


@dataclass(frozen=True)
class HexCell:
    id: int
    centroid: GeoPoint
    neighbors: tuple
    is_ocean: bool = True


@dataclass(frozen=True)
class CorridorGrid:
    """Immutable set of routable ocean cells with symmetric adjacency.

    ``cells`` contains ocean cells only; cells of the corridor removed by the
    land mask are kept in ``land_cells`` for reporting.
    """

    resolution: int
    cells: dict
    bbox: Polygon | None = None
    land_cells: frozenset = field(default_factory=frozenset)

    @classmethod
    def from_cells(cls, ids: Iterable[int], resolution: int | None = None, bbox=None, land_cells=()) -> "CorridorGrid":
        ids = sorted(set(int(c) for c in ids))
        if resolution is None:
            if not ids:
                raise ValueError("resolution required for an empty grid")
            resolution = cell_resolution(ids[0])
        members = set(ids)
        cells = {}
        for c in ids:
            if cell_resolution(c) != resolution:
                raise InvalidCellError(f"cell {cell_to_string(c)} is not at level {resolution}")
            nbs = tuple(n for n in neighbors(c) if n in members)
            cells[c] = HexCell(c, cell_centroid(c), nbs, True)
        return cls(resolution, cells, bbox, frozenset(land_cells))

    def __len__(self):
        return len(self.cells)

    def __contains__(self, cell):
        return cell in self.cells

    @cached_property
    def ids(self) -> tuple:
        return tuple(sorted(self.cells))

    def centroid(self, cell: int) -> GeoPoint:
        return self.cells[cell].centroid

    def neighbors(self, cell: int) -> tuple:
        return self.cells[cell].neighbors

    @cached_property
    def edges(self) -> tuple:
        """Canonical ``(i, j)`` pairs with ``i < j``, sorted."""
        out = set()
        for c, hc in self.cells.items():
            for n in hc.neighbors:
                out.add((c, n) if c < n else (n, c))
        return tuple(sorted(out))

    def hex_distance(self, a: int, b: int) -> int:
        return hex_distance(a, b)

    @cached_property
    def _kdtree(self):
        from scipy.spatial import cKDTree

        pts = np.array([self.cells[c].centroid.to_vector() for c in self.ids])
        return cKDTree(pts)

    def nearest(self, point: GeoPoint) -> tuple[int, float]:
        """Nearest ocean cell centroid and its haversine distance (km)."""
        if not self.cells:
            raise ValueError("empty grid")
        _, idx = self._kdtree.query(point.to_vector())
        cell = self.ids[int(idx)]
        return cell, haversine(point, self.cells[cell].centroid)

    def connected(self, a: int, b: int) -> bool:
        seen, stack = {a}, [a]
        while stack:
            u = stack.pop()
            if u == b:
                return True
            for v in self.cells[u].neighbors:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return False

    def ocean_fraction(self) -> float:
        total = len(self.cells) + len(self.land_cells)
        return len(self.cells) / total if total else 0.0


def build_corridor(corridor: Polygon | Sequence[Polygon], land: Sequence[Polygon], resolution: int) -> CorridorGrid:
    """Hexagonalise a corridor, mask land, and link ocean neighbours."""
    polys = [corridor] if isinstance(corridor, Polygon) else list(corridor)
    res = check_resolution(resolution)
    normalized = [normalize_longitudes(p) for p in polys]
    cells: set[int] = set()
    for p in normalized:
        cells |= polygon_to_cells(p, res)
    ocean = filter_land(cells, land)
    if cells and not ocean:
        logger.warning("corridor lies entirely on land; grid is empty")
    grid = CorridorGrid.from_cells(ocean, res, normalized[0] if normalized else None, frozenset(cells - ocean))
    logger.info("corridor grid: %d ocean cells, %d land cells at level %d", len(ocean), len(cells - ocean), res)
    return grid


def write_grid_dump(grid: CorridorGrid, path) -> None:
    """Newline-delimited ``cell_id,lat,lon,is_ocean,neighbor_ids`` records."""
    lines = []
    for c in grid.ids:
        hc = grid.cells[c]
        nbs = ";".join(cell_to_string(n) for n in hc.neighbors)
        lines.append(f"{cell_to_string(c)},{hc.centroid.lat:.9f},{hc.centroid.lon:.9f},1,{nbs}")
    for c in sorted(grid.land_cells):
        p = cell_centroid(c)
        lines.append(f"{cell_to_string(c)},{p.lat:.9f},{p.lon:.9f},0,")
    Path(path).write_text("".join(line + "\n" for line in lines))


def read_grid_dump(path) -> CorridorGrid:
    ocean, land = [], []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        cid, _lat, _lon, is_ocean, _nbs = line.split(",", 4)
        (ocean if is_ocean == "1" else land).append(cell_from_string(cid))
    res = cell_resolution((ocean or land)[0]) if (ocean or land) else MIN_RESOLUTION
    return CorridorGrid.from_cells(ocean, res, None, land)

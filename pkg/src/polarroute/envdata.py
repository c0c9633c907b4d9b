"""Sea-ice field ingestion, nearest-centroid aggregation and calibration."""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CalibrationError, EnvDataError
from .geodesy import GeoPoint, haversine
from .hexgrid import CorridorGrid

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("lat", "lon", "time", "sithick", "siage", "siconc", "sisnthick", "usi", "vsi")
MISSING_TOKEN = "NA"

# column -> (lower, upper) inclusive bounds; None means unbounded
FIELD_BOUNDS = {
    "sithick": (0.0, None),
    "siage": (0.0, None),
    "siconc": (0.0, 1.0),
    "sisnthick": (0.0, None),
    "usi": (None, None),
    "vsi": (None, None),
}

# sample column -> CellFeatures attribute
FEATURE_NAMES = {
    "sithick": "thickness",
    "siage": "age",
    "siconc": "concentration",
    "sisnthick": "snow",
    "usi": "u",
    "vsi": "v",
}


@dataclass(frozen=True, slots=True)
class EnvSample:
    point: GeoPoint
    time: dt.date
    sithick: float | None
    siage: float | None
    siconc: float | None
    sisnthick: float | None
    usi: float | None
    vsi: float | None

    @property
    def missing(self) -> tuple[str, ...]:
        return tuple(k for k in FIELD_BOUNDS if getattr(self, k) is None)


@dataclass(frozen=True)
class CellFeatures:
    """Per-cell means of the samples assigned to it; ``None`` where all missing."""

    cell: int
    time: dt.date
    thickness: float | None
    age: float | None
    concentration: float | None
    snow: float | None
    u: float | None
    v: float | None
    sample_count: int


def _parse_value(text: str, column: str, row: int, errors: list) -> float | None:
    text = text.strip()
    if text == MISSING_TOKEN or text == "":
        return None
    try:
        value = float(text)
    except ValueError:
        errors.append((row, f"column {column!r}: cannot parse {text!r}"))
        return None
    if not math.isfinite(value):
        errors.append((row, f"column {column!r}: non-finite value {text!r}"))
        return None
    lo, hi = FIELD_BOUNDS.get(column, (None, None))
    if (lo is not None and value < lo) or (hi is not None and value > hi):
        bound = f"[{lo if lo is not None else '-inf'}, {hi if hi is not None else 'inf'}]"
        errors.append((row, f"column {column!r}: value {value} outside bound {bound}"))
    return value


def load_samples(path, *, on_error: str = "raise") -> list[EnvSample]:
    """Read the environmental CSV.

    Rows that fail to parse or break a field bound are rejected with a
    row-indexed diagnostic (row 1 is the header).  ``on_error="raise"`` raises
    EnvDataError listing every diagnostic; ``"skip"`` logs them and returns the
    clean rows.
    """
    if on_error not in ("raise", "skip"):
        raise ValueError("on_error must be 'raise' or 'skip'")
    path = Path(path)
    samples: list[EnvSample] = []
    diagnostics: list[tuple[int, str]] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EnvDataError(f"{path}: empty file, expected header {','.join(CSV_COLUMNS)}") from None
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise EnvDataError(f"{path}: missing column(s) {', '.join(missing)}")
        idx = {c: header.index(c) for c in CSV_COLUMNS}
        for rownum, rec in enumerate(reader, start=2):
            if not rec or all(not x.strip() for x in rec):
                continue
            if len(rec) < len(header):
                diagnostics.append((rownum, f"expected {len(header)} fields, got {len(rec)}"))
                continue
            row_errors: list = []
            try:
                lat = float(rec[idx["lat"]])
                lon = float(rec[idx["lon"]])
                if not (-90.0 <= lat <= 90.0):
                    row_errors.append((rownum, f"column 'lat': value {lat} outside bound [-90, 90]"))
                if not (-180.0 <= lon <= 180.0):
                    row_errors.append((rownum, f"column 'lon': value {lon} outside bound [-180, 180]"))
            except ValueError:
                row_errors.append((rownum, "unparseable lat/lon"))
            try:
                when = dt.date.fromisoformat(rec[idx["time"]].strip()[:10])
            except ValueError:
                row_errors.append((rownum, f"column 'time': not an ISO-8601 date {rec[idx['time']]!r}"))
            values = {c: _parse_value(rec[idx[c]], c, rownum, row_errors) for c in FIELD_BOUNDS}
            if row_errors:
                diagnostics.extend(row_errors)
                continue
            samples.append(EnvSample(GeoPoint(lat, lon), when, **values))
    if diagnostics:
        rows = sorted({r for r, _ in diagnostics})
        summary = f"{path}: rejected {len(rows)} row(s)"
        detail = "; ".join(f"row {r}: {m}" for r, m in diagnostics[:20])
        if on_error == "raise":
            raise EnvDataError(f"{summary}: {detail}", diagnostics)
        for r, m in diagnostics:
            logger.warning("%s row %d: %s", path, r, m)
        logger.warning(summary)
    return samples


def write_samples(samples: Iterable[EnvSample], path) -> None:
    def fmt(v):
        return MISSING_TOKEN if v is None else repr(float(v))

    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for s in samples:
            w.writerow([repr(s.point.lat), repr(s.point.lon), s.time.isoformat()]
                       + [fmt(getattr(s, c)) for c in FIELD_BOUNDS])


def assign_nearest(points: Sequence[GeoPoint], grid: CorridorGrid) -> list[int]:
    """Cell id whose centroid is nearest (great-circle) to each point."""
    if not points:
        return []
    from scipy.spatial import cKDTree

    ids = grid.ids
    tree = cKDTree(np.array([grid.centroid(c).to_vector() for c in ids]))
    # chord length is monotone in arc length, so the Euclidean nearest is exact
    _, idx = tree.query(np.array([p.to_vector() for p in points]))
    return [ids[int(i)] for i in idx]


def map_to_cells(samples: Sequence[EnvSample], grid: CorridorGrid, time: dt.date | None = None,
                 max_distance_km: float | None = None) -> list[CellFeatures]:
    """Average the samples of one day onto their nearest cell centroids.

    Cells receiving no sample are absent from the output.
    """
    if not grid.cells:
        raise ValueError("grid is empty")
    chosen = [s for s in samples if time is None or s.time == time]
    if time is None and len({s.time for s in chosen}) > 1:
        raise ValueError("samples span several dates; pass the date to map")
    targets = assign_nearest([s.point for s in chosen], grid)
    buckets: dict[int, list[EnvSample]] = {}
    for s, cell in zip(chosen, targets):
        if max_distance_km is not None and haversine(s.point, grid.centroid(cell)) > max_distance_km:
            continue
        buckets.setdefault(cell, []).append(s)
    out = []
    for cell in sorted(buckets):
        group = buckets[cell]
        means = {}
        for column, attr in FEATURE_NAMES.items():
            vals = [getattr(s, column) for s in group if getattr(s, column) is not None]
            means[attr] = math.fsum(vals) / len(vals) if vals else None
        out.append(CellFeatures(cell, group[0].time, sample_count=len(group), **means))
    return out


# ---------------------------------------------------------------------------
# calibration


@dataclass(frozen=True)
class Calibration:
    warn_thick: float
    warn_age: float
    warn_conc: float
    warn_snow: float
    thick_max: float
    age_max: float
    conc_min: float
    snow_max: float
    policy: str = "percentile"

    def degenerate(self, name: str) -> bool:
        """True when the field's penalty denominator vanishes."""
        span = {
            "thick": self.thick_max - self.warn_thick,
            "age": self.age_max - self.warn_age,
            "conc": self.warn_conc - self.conc_min,
            "snow": self.snow_max - self.warn_snow,
        }[name]
        return span <= 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def dump(self, path) -> None:
        record = {**self.to_dict(), "digest": self.digest()}
        Path(path).write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "Calibration":
        record = json.loads(Path(path).read_text())
        record.pop("digest", None)
        return cls(**record)


@dataclass(frozen=True)
class PercentilePolicy:
    """Warning thresholds as percentiles of the corridor distribution.

    Concentration uses a low percentile: thin cover is the hazard direction.
    """

    thick: float = 75.0
    age: float = 75.0
    snow: float = 75.0
    conc: float = 25.0
    name: str = field(default="percentile", init=False)

    def thresholds(self, values: dict[str, np.ndarray]) -> dict[str, float]:
        return {k: float(np.percentile(values[k], getattr(self, k))) for k in ("thick", "age", "conc", "snow")}


@dataclass(frozen=True)
class FixedPolicy:
    thick: float
    age: float
    snow: float
    conc: float
    name: str = field(default="fixed", init=False)

    def thresholds(self, values):
        return {"thick": self.thick, "age": self.age, "conc": self.conc, "snow": self.snow}


def make_policy(record: dict | None):
    record = dict(record or {})
    kind = record.pop("name", "percentile")
    if kind == "percentile":
        return PercentilePolicy(**record)
    if kind == "fixed":
        return FixedPolicy(**record)
    raise CalibrationError(f"unknown calibration policy {kind!r}")


def policy_to_dict(policy) -> dict:
    d = asdict(policy)
    d["name"] = policy.name
    return d


def calibrate(features: Sequence[CellFeatures], policy=None) -> Calibration:
    policy = policy or PercentilePolicy()
    if not features:
        raise CalibrationError("no populated cells to calibrate from")
    columns = {"thick": "thickness", "age": "age", "conc": "concentration", "snow": "snow"}
    values = {}
    for key, attr in columns.items():
        vals = np.array([getattr(f, attr) for f in features if getattr(f, attr) is not None], dtype=float)
        if vals.size == 0:
            raise CalibrationError(f"field {attr!r} missing in every cell")
        values[key] = vals
    warn = policy.thresholds(values)
    cal = Calibration(
        warn_thick=warn["thick"], warn_age=warn["age"], warn_conc=warn["conc"], warn_snow=warn["snow"],
        thick_max=float(values["thick"].max()), age_max=float(values["age"].max()),
        conc_min=float(values["conc"].min()), snow_max=float(values["snow"].max()),
        policy=policy.name,
    )
    for name in columns:
        if cal.degenerate(name):
            logger.warning("calibration: %s span is degenerate; its penalty is identically 0", name)
    return cal

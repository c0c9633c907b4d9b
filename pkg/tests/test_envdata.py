import csv
import datetime as dt
import math
import random

import numpy as np
import pytest

from polarroute.envdata import (
    CSV_COLUMNS,
    Calibration,
    CellFeatures,
    EnvSample,
    FixedPolicy,
    PercentilePolicy,
    calibrate,
    load_samples,
    make_policy,
    map_to_cells,
    write_samples,
)
from polarroute.errors import CalibrationError, EnvDataError
from polarroute.fixtures import random_patch, synthetic_samples
from polarroute.geodesy import GeoPoint, haversine
from polarroute.hexgrid import CorridorGrid, neighbors, point_to_cell

DAY = dt.date(2024, 9, 15)
HEADER = ",".join(CSV_COLUMNS) + "\n"


def sample(lat, lon, thick=1.0, age=1.0, conc=0.8, snow=0.1, u=0.0, v=0.0, day=DAY):
    return EnvSample(GeoPoint(lat, lon), day, thick, age, conc, snow, u, v)


def feature(cell, thick, age=1.0, conc=0.8, snow=0.1):
    return CellFeatures(cell, DAY, thick, age, conc, snow, 0.0, 0.0, 1)


@pytest.fixture(scope="module")
def fifty_cells():
    c0 = point_to_cell(GeoPoint(71.0, 179.5), 5)
    cells, frontier = {c0}, [c0]
    while len(cells) < 50:
        nxt = []
        for c in frontier:
            for n in neighbors(c):
                if n not in cells and len(cells) < 50:
                    cells.add(n)
                    nxt.append(n)
        frontier = nxt
    return CorridorGrid.from_cells(cells, 5)


# -- loading --------------------------------------------------------------------


def test_empty_file_with_header(tmp_path):
    p = tmp_path / "ice.csv"
    p.write_text(HEADER)
    assert load_samples(p) == []


def test_missing_column(tmp_path):
    p = tmp_path / "ice.csv"
    p.write_text("lat,lon,time,sithick\n")
    with pytest.raises(EnvDataError, match="siage"):
        load_samples(p)


def test_out_of_bound_row_rejected(tmp_path):
    p = tmp_path / "ice.csv"
    p.write_text(HEADER + "70,178,2024-09-15,1,1,0.5,0.1,0,0\n" + "70,179,2024-09-15,1,1,1.2,0.1,0,0\n")
    with pytest.raises(EnvDataError) as err:
        load_samples(p)
    assert err.value.diagnostics[0][0] == 3
    assert "siconc" in str(err.value) and "1.0" in str(err.value)
    kept = load_samples(p, on_error="skip")
    assert len(kept) == 1


def test_unparseable_rows_counted(tmp_path):
    p = tmp_path / "ice.csv"
    p.write_text(HEADER + "70,178,2024-09-15,abc,1,0.5,0.1,0,0\n" + "x,179,2024-09-15,1,1,0.5,0.1,0,0\n")
    with pytest.raises(EnvDataError, match="rejected 2 row"):
        load_samples(p)


def test_missing_token_is_none(tmp_path):
    p = tmp_path / "ice.csv"
    p.write_text(HEADER + "70,178,2024-09-15,NA,1,0.5,0.1,0,0\n")
    (s,) = load_samples(p)
    assert s.sithick is None and s.missing == ("sithick",)


def test_thousand_rows_column_means(tmp_path):
    rng = np.random.default_rng(11)
    rows = []
    for _ in range(1000):
        rows.append(sample(float(rng.uniform(66, 80)), float(rng.uniform(-180, 180)),
                           float(rng.uniform(0, 4)), float(rng.uniform(0, 6)), float(rng.uniform(0, 1)),
                           float(rng.uniform(0, 0.6)), float(rng.normal(0, 0.1)), float(rng.normal(0, 0.1))))
    p = tmp_path / "ice.csv"
    write_samples(rows, p)
    got = load_samples(p)
    assert len(got) == 1000
    # independent column means straight from the text
    with p.open() as fh:
        table = list(csv.DictReader(fh))
    for col in ("sithick", "siage", "siconc", "sisnthick", "usi", "vsi"):
        want = sum(float(r[col]) for r in table) / len(table)
        assert np.mean([getattr(s, col) for s in got]) == pytest.approx(want, rel=1e-12)


# -- mapping -----------------------------------------------------------------------


def test_sample_on_centroid(fifty_cells):
    c = fifty_cells.ids[7]
    p = fifty_cells.centroid(c)
    (f,) = map_to_cells([sample(p.lat, p.lon)], fifty_cells, DAY)
    assert f.cell == c and f.sample_count == 1


def test_two_samples_mean(fifty_cells):
    p = fifty_cells.centroid(fifty_cells.ids[0])
    (f,) = map_to_cells([sample(p.lat, p.lon, thick=0.4), sample(p.lat, p.lon, thick=0.8)], fifty_cells, DAY)
    assert f.thickness == pytest.approx(0.6) and f.sample_count == 2


def test_missing_values_not_zero_filled(fifty_cells):
    p = fifty_cells.centroid(fifty_cells.ids[0])
    a = sample(p.lat, p.lon, thick=None)
    b = sample(p.lat, p.lon, thick=0.5)
    (f,) = map_to_cells([a, b], fifty_cells, DAY)
    assert f.thickness == 0.5
    (f,) = map_to_cells([a], fifty_cells, DAY)
    assert f.thickness is None


def _random_samples(grid, n, seed):
    rng = np.random.default_rng(seed)
    lats = [grid.centroid(c).lat for c in grid.ids]
    lons = [grid.centroid(c).lon % 360 for c in grid.ids]
    out = []
    for _ in range(n):
        lon = float(rng.uniform(min(lons) - 0.2, max(lons) + 0.2))
        out.append(sample(float(rng.uniform(min(lats) - 0.1, max(lats) + 0.1)), (lon + 180) % 360 - 180,
                          thick=float(rng.uniform(0, 3)), age=float(rng.uniform(0, 5))))
    return out


def test_nearest_assignment_matches_brute_force(fifty_cells):
    samples = _random_samples(fifty_cells, 500, 5)
    feats = map_to_cells(samples, fifty_cells, DAY)
    counts = {}
    sums = {}
    for s in samples:
        best = min(fifty_cells.ids, key=lambda c: haversine(s.point, fifty_cells.centroid(c)))
        counts[best] = counts.get(best, 0) + 1
        sums[best] = sums.get(best, 0.0) + s.sithick
    assert {f.cell: f.sample_count for f in feats} == counts
    for f in feats:
        assert f.thickness == pytest.approx(sums[f.cell] / counts[f.cell], rel=1e-12)


def test_aggregation_conservation_and_order_invariance(fifty_cells):
    samples = _random_samples(fifty_cells, 300, 9)
    feats = map_to_cells(samples, fifty_cells, DAY)
    for attr, col in (("thickness", "sithick"), ("age", "siage")):
        total = math.fsum(getattr(f, attr) * f.sample_count for f in feats)
        assert total == pytest.approx(math.fsum(getattr(s, col) for s in samples), rel=1e-9)
    shuffled = samples[:]
    random.Random(1).shuffle(shuffled)
    again = map_to_cells(shuffled, fifty_cells, DAY)
    assert [(f.cell, f.sample_count) for f in again] == [(f.cell, f.sample_count) for f in feats]
    for a, b in zip(feats, again):
        assert a.thickness == pytest.approx(b.thickness, rel=1e-12)


def test_date_filter_and_mixed_dates(fifty_cells):
    p = fifty_cells.centroid(fifty_cells.ids[0])
    other = dt.date(2024, 9, 16)
    samples = [sample(p.lat, p.lon, thick=1.0), sample(p.lat, p.lon, thick=3.0, day=other)]
    (f,) = map_to_cells(samples, fifty_cells, other)
    assert f.thickness == 3.0
    with pytest.raises(ValueError):
        map_to_cells(samples, fifty_cells)


def test_fixture_samples_cover_patch():
    patch = random_patch(0)
    feats = map_to_cells(synthetic_samples(69.5, 71.5, 175.0, -175.0, 0.1), patch.grid)
    assert {f.cell for f in feats} == set(patch.grid.ids)


# -- calibration -------------------------------------------------------------------------


def test_single_cell_degenerate():
    cal = calibrate([feature(1, 0.5)])
    assert cal.thick_max == 0.5
    assert cal.degenerate("thick")


def test_percentile_oracle():
    feats = [feature(k, t) for k, t in enumerate(np.linspace(0.1, 1.0, 10))]
    cal = calibrate(feats)
    assert cal.warn_thick == pytest.approx(0.775, abs=1e-12)
    assert cal.thick_max == pytest.approx(1.0)
    assert not cal.degenerate("thick")


def test_full_concentration_is_degenerate():
    cal = calibrate([feature(k, 1.0, conc=1.0) for k in range(5)])
    assert cal.conc_min == 1.0 and cal.degenerate("conc")


def test_empty_calibration():
    with pytest.raises(CalibrationError):
        calibrate([])


def test_bounds_are_exact_extremes():
    rng = np.random.default_rng(2)
    feats = [CellFeatures(k, DAY, *rng.uniform(0, 1, 4), 0.0, 0.0, 1) for k in range(40)]
    cal = calibrate(feats)
    assert cal.thick_max == max(f.thickness for f in feats)
    assert cal.age_max == max(f.age for f in feats)
    assert cal.conc_min == min(f.concentration for f in feats)
    assert cal.snow_max == max(f.snow for f in feats)


def test_monotone_under_larger_thickness():
    rng = np.random.default_rng(4)
    feats = [feature(k, float(t)) for k, t in enumerate(rng.uniform(0, 2, 30))]
    for step in range(20):
        before = calibrate(feats)
        feats.append(feature(100 + step, before.thick_max + float(rng.uniform(0.01, 1))))
        after = calibrate(feats)
        assert after.thick_max > before.thick_max
        assert after.warn_thick >= before.warn_thick


def test_policies_and_dump(tmp_path):
    feats = [feature(k, 0.1 * k) for k in range(1, 11)]
    fixed = calibrate(feats, FixedPolicy(thick=0.5, age=1.0, snow=0.1, conc=0.8))
    assert fixed.warn_thick == 0.5 and fixed.policy == "fixed"
    assert isinstance(make_policy(None), PercentilePolicy)
    assert make_policy({"name": "percentile", "thick": 90.0}).thick == 90.0
    with pytest.raises(CalibrationError):
        make_policy({"name": "magic"})
    p = tmp_path / "cal.json"
    fixed.dump(p)
    assert Calibration.load(p) == fixed
    assert Calibration.load(p).digest() == fixed.digest()

import datetime as dt

import pytest

from polarroute.envdata import calibrate
from polarroute.fixtures import FIXTURE_DATE, uniform_features
from polarroute.geodesy import GeoPoint
from polarroute.hexgrid import CorridorGrid, neighbors, point_to_cell
from polarroute.model import Weights, build_model

ORIGIN = GeoPoint(70.0, 178.0)


def flower_cells(resolution=5, origin=ORIGIN):
    center = point_to_cell(origin, resolution)
    return center, neighbors(center)


@pytest.fixture
def flower():
    """7-cell hex flower: centre plus its ring; s and g sit on opposite petals."""
    center, ring = flower_cells()
    grid = CorridorGrid.from_cells([center, *ring], 5)
    return grid, ring[0], ring[3]


@pytest.fixture
def flower_model(flower):
    grid, s, g = flower
    feats = uniform_features(grid)
    return build_model(grid, feats, calibrate(feats), Weights(), s, g)


@pytest.fixture
def fixture_date():
    return FIXTURE_DATE


@pytest.fixture
def day():
    return dt.date(2024, 9, 15)


# acceptance verdicts, printed once at the end of the session
VERDICTS: list = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)

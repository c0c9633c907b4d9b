"""Shared builders for solver and acceptance tests."""

import math

from polarroute.envdata import calibrate
from polarroute.fixtures import uniform_features
from polarroute.geodesy import GeoPoint
from polarroute.hexgrid import CorridorGrid, decode_cell, encode_cell, point_to_cell
from polarroute.model import Weights, build_model

AXIAL = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)]


def lattice_walk(base, dirs):
    """Cells visited from ``base`` following axial direction indices."""
    res, q, r = decode_cell(base)
    out = [base]
    for d in dirs:
        q, r = q + AXIAL[d][0], r + AXIAL[d][1]
        out.append(encode_cell(res, q, r))
    return out


# Short path: 5 edges, three 60 deg turns (turn sum 1.5).
# Detour: 6 edges, two 60 deg turns (turn sum 1.0).
SHORT_DIRS = (0, 0, 1, 0, 1)
DETOUR_DIRS = (1, 1, 1, 0, 0, 5)


def kink_fixture(w_turn, h=0.01, origin=GeoPoint(88.0, 0.0)):
    """Two-route fixture near the projection centre, where lattice turns are
    close to multiples of 60 degrees.  Crossover at w_turn = h / (1.5 - 1.0)."""
    base = point_to_cell(origin, 5)
    short = lattice_walk(base, SHORT_DIRS)
    detour = lattice_walk(base, DETOUR_DIRS)
    assert short[-1] == detour[-1]
    grid = CorridorGrid.from_cells(set(short) | set(detour), 5)
    feats = uniform_features(grid)
    w = Weights(w_side=0.0, w_lat=0.0, h=h, w_turn=w_turn)
    return build_model(grid, feats, calibrate(feats), w, short[0], short[-1]), short, detour


def route_edges(cells):
    return sorted((a, b) if a < b else (b, a) for a, b in zip(cells, cells[1:]))


def same_objective(a, b, rtol=1e-9):
    return math.isclose(a, b, rel_tol=rtol, abs_tol=rtol)

"""Spherical geometry on a sphere of radius 6371 km."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_KM = 6371.0


def canonical_lon(lon: float) -> float:
    """Wrap a longitude into [-180, 180)."""
    out = math.fmod(lon + 180.0, 360.0)
    if out < 0:
        out += 360.0
    out -= 180.0
    # fmod can leave -180 + tiny negative rounding; keep the half-open range
    return -180.0 if out >= 180.0 else out


@dataclass(frozen=True, slots=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0) or math.isnan(self.lat):
            raise ValueError(f"latitude out of range: {self.lat}")
        if not math.isfinite(self.lon):
            raise ValueError(f"longitude not finite: {self.lon}")
        if not (-180.0 <= self.lon < 180.0):
            object.__setattr__(self, "lon", canonical_lon(self.lon))

    def to_vector(self) -> np.ndarray:
        return to_vector(self.lat, self.lon)


def to_vector(lat: float, lon: float) -> np.ndarray:
    phi, lam = math.radians(lat), math.radians(lon)
    return np.array([math.cos(phi) * math.cos(lam), math.cos(phi) * math.sin(lam), math.sin(phi)])


def from_vector(v) -> GeoPoint:
    x, y, z = (float(c) for c in v)
    norm = math.sqrt(x * x + y * y + z * z)
    lat = math.degrees(math.asin(max(-1.0, min(1.0, z / norm))))
    lon = math.degrees(math.atan2(y, x))
    return GeoPoint(lat, lon)


def haversine(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in km."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def haversine_array(lat1, lon1, lat2, lon2):
    """Vectorized haversine over numpy arrays of degrees."""
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = phi2 - phi1
    dlam = np.radians(np.asarray(lon2) - np.asarray(lon1))
    h = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def initial_bearing(a: GeoPoint, b: GeoPoint) -> float:
    """Forward azimuth from a towards b, degrees clockwise from north in [0, 360)."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dlam = math.radians(b.lon - a.lon)
    y = math.sin(dlam) * math.cos(phi2)
    x = math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(dlam)
    return math.degrees(math.atan2(y, x)) % 360.0


def final_bearing(a: GeoPoint, b: GeoPoint) -> float:
    """Azimuth of travel on arrival at b along the great circle from a."""
    return (initial_bearing(b, a) + 180.0) % 360.0


def angle_between_bearings(b1: float, b2: float) -> float:
    """Absolute difference of two azimuths, in [0, 180]."""
    d = abs(b2 - b1) % 360.0
    return 360.0 - d if d > 180.0 else d


def turning_angle(a: GeoPoint, pivot: GeoPoint, c: GeoPoint) -> float:
    """Heading change (degrees, [0, 180]) when travelling a -> pivot -> c."""
    return angle_between_bearings(final_bearing(a, pivot), initial_bearing(pivot, c))


def destination(origin: GeoPoint, bearing_deg: float, distance_km: float) -> GeoPoint:
    delta = distance_km / EARTH_RADIUS_KM
    theta = math.radians(bearing_deg)
    phi1, lam1 = math.radians(origin.lat), math.radians(origin.lon)
    sin_phi2 = math.sin(phi1) * math.cos(delta) + math.cos(phi1) * math.sin(delta) * math.cos(theta)
    phi2 = math.asin(max(-1.0, min(1.0, sin_phi2)))
    y = math.sin(theta) * math.sin(delta) * math.cos(phi1)
    x = math.cos(delta) - math.sin(phi1) * sin_phi2
    lam2 = lam1 + math.atan2(y, x)
    return GeoPoint(math.degrees(phi2), math.degrees(lam2))


def midpoint(a: GeoPoint, b: GeoPoint) -> GeoPoint:
    return from_vector(a.to_vector() + b.to_vector())


def interpolate(a: GeoPoint, b: GeoPoint, fraction: float) -> GeoPoint:
    """Point at ``fraction`` of the way along the minor great-circle arc a-b."""
    va, vb = a.to_vector(), b.to_vector()
    omega = math.acos(max(-1.0, min(1.0, float(va @ vb))))
    if omega < 1e-15:
        return a
    s = math.sin(omega)
    v = (math.sin((1 - fraction) * omega) / s) * va + (math.sin(fraction * omega) / s) * vb
    return from_vector(v)


def _tangent_bearing(point: np.ndarray, tangent: np.ndarray) -> float:
    lat = math.asin(max(-1.0, min(1.0, point[2])))
    lon = math.atan2(point[1], point[0])
    east = np.array([-math.sin(lon), math.cos(lon), 0.0])
    north = np.array([-math.sin(lat) * math.cos(lon), -math.sin(lat) * math.sin(lon), math.cos(lat)])
    return math.degrees(math.atan2(float(tangent @ east), float(tangent @ north))) % 360.0


@dataclass(frozen=True)
class GreatCircleAxis:
    """The oriented great circle through a start and a goal point."""

    start: GeoPoint
    goal: GeoPoint

    def __post_init__(self):
        n = np.cross(self.start.to_vector(), self.goal.to_vector())
        norm = float(np.linalg.norm(n))
        if norm < 1e-12:
            raise ValueError("axis endpoints coincide or are antipodal")
        object.__setattr__(self, "_normal", n / norm)
        object.__setattr__(self, "_length_km", haversine(self.start, self.goal))

    @property
    def length_km(self) -> float:
        return self._length_km

    def cross_track_km(self, p: GeoPoint) -> float:
        """Signed distance of p from the axis great circle."""
        s = float(p.to_vector() @ self._normal)
        return EARTH_RADIUS_KM * math.asin(max(-1.0, min(1.0, s)))

    def nearest_point(self, p: GeoPoint) -> np.ndarray:
        v = p.to_vector()
        proj = v - float(v @ self._normal) * self._normal
        norm = float(np.linalg.norm(proj))
        if norm < 1e-12:
            # p is a pole of the axis; every axis point is equidistant
            return self.start.to_vector()
        return proj / norm

    def bearing_at(self, p: GeoPoint) -> float:
        """Direction of travel (start towards goal) at the axis point nearest p."""
        q = self.nearest_point(p)
        return _tangent_bearing(q, np.cross(self._normal, q))


def segment_bearing_at_midpoint(a: GeoPoint, b: GeoPoint) -> float:
    """Azimuth of the a->b great circle, measured at the arc midpoint."""
    va, vb = a.to_vector(), b.to_vector()
    n = np.cross(va, vb)
    m = va + vb
    m = m / np.linalg.norm(m)
    return _tangent_bearing(m, np.cross(n / np.linalg.norm(n), m))


def meridian_crossing_lat(a: GeoPoint, b: GeoPoint, lon: float = 180.0) -> float:
    """Latitude where the minor arc a-b crosses the meridian ``lon``."""
    n_arc = np.cross(a.to_vector(), b.to_vector())
    lam = math.radians(lon)
    n_mer = np.array([-math.sin(lam), math.cos(lam), 0.0])
    d = np.cross(n_arc, n_mer)
    d = d / np.linalg.norm(d)
    # choose the intersection on the requested meridian half
    if float(d @ np.array([math.cos(lam), math.sin(lam), 0.0])) < 0:
        d = -d
    return math.degrees(math.asin(max(-1.0, min(1.0, float(d[2])))))

"""Great-circle geometry on GPS coordinates.

License
-------
This file is part of edgeplanner
BSD 3-Clause License
"""
import math
from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_KM = 6371.0
# Length of one degree of latitude on the sphere used by `haversine_km`.
METERS_PER_DEGREE = math.pi * EARTH_RADIUS_KM * 1000.0 / 180.0


@dataclass(frozen=True)
class GpsPoint:
    """GPS coordinate in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")


def haversine_km(a: GpsPoint, b: GpsPoint) -> float:
    """Great-circle distance in kilometers between two GPS points.

    The atan2 form stays well conditioned for antipodal points, where the
    arcsine form loses precision.
    """
    lat1 = math.radians(a.lat)
    lat2 = math.radians(b.lat)
    dlat = lat2 - lat1
    dlon = math.radians(b.lon - a.lon)
    h = (
        math.sin(dlat / 2) ** 2
        + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    )
    h = min(max(h, 0.0), 1.0)
    return 2 * EARTH_RADIUS_KM * math.atan2(math.sqrt(h), math.sqrt(1 - h))


def haversine_km_array(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Vectorized `haversine_km` over broadcastable degree arrays."""
    lat1 = np.radians(np.asarray(lat1, dtype=float))
    lat2 = np.radians(np.asarray(lat2, dtype=float))
    dlat = lat2 - lat1
    dlon = np.radians(np.asarray(lon2, dtype=float) - np.asarray(lon1, dtype=float))
    h = np.sin(dlat / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2) ** 2
    h = np.clip(h, 0.0, 1.0)
    return 2 * EARTH_RADIUS_KM * np.arctan2(np.sqrt(h), np.sqrt(1 - h))


class LocalFrame:
    """Flat east/north frame in meters anchored at a GPS origin.

    Valid at city scale; positions are converted with an equirectangular
    projection around the origin latitude.
    """

    def __init__(self, origin: GpsPoint):
        self.origin = origin
        self.meters_per_deg_lon = METERS_PER_DEGREE * math.cos(
            math.radians(origin.lat)
        )

    def to_gps(self, x_m: float, y_m: float) -> GpsPoint:
        """Convert east/north meters into a GPS point."""
        return GpsPoint(
            lat=self.origin.lat + y_m / METERS_PER_DEGREE,
            lon=self.origin.lon + x_m / self.meters_per_deg_lon,
        )

    def to_meters(self, point: GpsPoint) -> tuple[float, float]:
        """Convert a GPS point into east/north meters."""
        return (
            (point.lon - self.origin.lon) * self.meters_per_deg_lon,
            (point.lat - self.origin.lat) * METERS_PER_DEGREE,
        )


def round_point(point: GpsPoint, places: int = 6) -> GpsPoint:
    """Round a point the way trace files store it."""
    return GpsPoint(
        lat=float(f"{point.lat:.{places}f}"), lon=float(f"{point.lon:.{places}f}")
    )

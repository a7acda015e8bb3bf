"""Detect highly-dense user areas with DBSCAN over great-circle distance.

License
-------
This file is part of edgeplanner
BSD 3-Clause License
"""
import dataclasses
import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from edp.geo import GpsPoint, haversine_km, haversine_km_array
from edp.tracegen import TraceRecord

logger = logging.getLogger(__name__)

NOISE = -1
NOISE_ZONE = "NOISE"


@dataclass(frozen=True)
class DbscanParams:
    eps_km: float = 0.5
    min_pts: int = 25

    def __post_init__(self):
        if not self.eps_km > 0:
            raise ValueError(f"eps_km must be > 0, got {self.eps_km}")
        if self.min_pts < 1:
            raise ValueError(f"min_pts must be >= 1, got {self.min_pts}")


@dataclass(frozen=True)
class DenseZone:
    """One dense area: a DBSCAN cluster of UE positions.

    Centroid, radius and `member_count` cover every point density-reachable
    from the cluster, border points shared with another cluster included.
    """

    zone_id: int
    centroid: GpsPoint
    member_count: int
    radius_km: float

    @property
    def label(self) -> str:
        return f"Z{self.zone_id}"

    def to_dict(self) -> dict:
        return {
            "zone_id": self.zone_id,
            "centroid": {"lat": self.centroid.lat, "lon": self.centroid.lon},
            "member_count": self.member_count,
            "radius_km": self.radius_km,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DenseZone":
        return cls(
            int(data["zone_id"]),
            GpsPoint(float(data["centroid"]["lat"]), float(data["centroid"]["lon"])),
            int(data["member_count"]),
            float(data["radius_km"]),
        )


@dataclass
class ClusteringResult:
    """Per-point labels (`NOISE` = -1) and core flags, plus the zones."""

    labels: list[int]
    core_flags: list[bool]
    zones: list[DenseZone]

    @property
    def noise_count(self) -> int:
        return sum(1 for label in self.labels if label == NOISE)


def _coordinates(points: Sequence[GpsPoint]) -> tuple[np.ndarray, np.ndarray]:
    lats = np.array([p.lat for p in points], dtype=float)
    lons = np.array([p.lon for p in points], dtype=float)
    return lats, lons


def region_query(points: Sequence[GpsPoint], i: int, eps_km: float) -> list[int]:
    """Indices of all points (i included) within `eps_km` of point `i`."""
    lats, lons = _coordinates(points)
    distances = haversine_km_array(lats[i], lons[i], lats, lons)
    return np.flatnonzero(distances <= eps_km).tolist()


def _neighborhoods(points: Sequence[GpsPoint], eps_km: float) -> list[np.ndarray]:
    lats, lons = _coordinates(points)
    return [
        np.flatnonzero(haversine_km_array(lats[i], lons[i], lats, lons) <= eps_km)
        for i in range(len(points))
    ]


def dbscan(points: Sequence[GpsPoint], params: DbscanParams) -> ClusteringResult:
    """Cluster GPS points with DBSCAN.

    Core points have at least `min_pts` neighbours (themselves included)
    within `eps_km`. Clusters are the connected components of core points,
    numbered by their lowest core index. A non-core point with a core
    neighbour is labeled with the cluster of its lowest-index core neighbour
    but counts as a member of every cluster it is reachable from; any other
    point is noise.
    """
    n = len(points)
    if n == 0:
        return ClusteringResult([], [], [])
    neighborhoods = _neighborhoods(points, params.eps_km)
    core = [len(neighbors) >= params.min_pts for neighbors in neighborhoods]
    labels = [NOISE] * n
    cluster_id = 0
    for seed in range(n):
        if not core[seed] or labels[seed] != NOISE:
            continue
        labels[seed] = cluster_id
        queue = deque([seed])
        while queue:
            current = queue.popleft()
            for neighbor in neighborhoods[current]:
                if core[neighbor] and labels[neighbor] == NOISE:
                    labels[neighbor] = cluster_id
                    queue.append(int(neighbor))
        cluster_id += 1
    # Zone members are every point density-reachable from the cluster, so a
    # border point in reach of two clusters counts in both.
    members = [[] for _ in range(cluster_id)]
    for i in range(n):
        if core[i]:
            members[labels[i]].append(i)
            continue
        core_neighbors = [int(j) for j in neighborhoods[i] if core[j]]
        if core_neighbors:
            labels[i] = labels[min(core_neighbors)]
            for k in sorted({labels[j] for j in core_neighbors}):
                members[k].append(i)
    zones = [
        _make_zone(k, [points[i] for i in members[k]]) for k in range(cluster_id)
    ]
    logger.info(
        "dbscan: %d points, %d zones, %d noise (eps %.3g km, min_pts %d)",
        n, len(zones), labels.count(NOISE), params.eps_km, params.min_pts,
    )
    return ClusteringResult(labels, core, zones)


def _make_zone(zone_id: int, members: list[GpsPoint]) -> DenseZone:
    # Arithmetic mean of degrees; fine at city scale, wrong across the
    # antimeridian.
    centroid = GpsPoint(
        lat=math.fsum(p.lat for p in members) / len(members),
        lon=math.fsum(p.lon for p in members) / len(members),
    )
    radius = max(haversine_km(p, centroid) for p in members)
    return DenseZone(zone_id, centroid, len(members), radius)


def assign_zone(
    zones: Sequence[DenseZone], p: GpsPoint, eps_km: float
) -> Union[int, None]:
    """Zone of the nearest centroid if `p` lies within its radius + eps.

    Nearest-centroid ties go to the lowest `zone_id`.
    """
    best = None
    best_distance = math.inf
    for zone in sorted(zones, key=lambda z: z.zone_id):
        distance = haversine_km(zone.centroid, p)
        if distance < best_distance:
            best = zone
            best_distance = distance
    if best is not None and best_distance <= best.radius_km + eps_km:
        return best.zone_id
    return None


def zone_label(zone_id: Union[int, None]) -> str:
    return NOISE_ZONE if zone_id is None else f"Z{zone_id}"


def label_trace(
    records: Sequence[TraceRecord], zones: Sequence[DenseZone], eps_km: float
) -> list[TraceRecord]:
    """Copy of `records` with the zone column set to `Z<k>` or `NOISE`."""
    return [
        dataclasses.replace(
            record, zone=zone_label(assign_zone(zones, record.point, eps_km))
        )
        for record in records
    ]


def snapshot_positions(
    records: Sequence[TraceRecord], snapshot_s: Union[int, None] = None
) -> tuple[list[int], list[GpsPoint]]:
    """Latest known position of every UE at or before `snapshot_s`.

    None takes the time of the last record. UEs are ordered by id.
    """
    if snapshot_s is None:
        snapshot_s = max((record.time_s for record in records), default=0)
    latest = {}
    for record in records:
        if record.time_s > snapshot_s:
            continue
        known = latest.get(record.ue_id)
        if known is None or record.time_s >= known.time_s:
            latest[record.ue_id] = record
    ue_ids = sorted(latest)
    return ue_ids, [latest[ue_id].point for ue_id in ue_ids]

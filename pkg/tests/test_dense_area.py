import numpy as np
import pytest

from edp.dense_area import (
    NOISE, DbscanParams, DenseZone, assign_zone, dbscan, label_trace,
    region_query, snapshot_positions, zone_label,
)
from edp.geo import GpsPoint, LocalFrame, haversine_km

from conftest import ORIGIN, move

FRAME = LocalFrame(ORIGIN)


def blob(center_m, count, spread_m, rng):
    return [
        FRAME.to_gps(center_m[0] + dx, center_m[1] + dy)
        for dx, dy in rng.normal(0.0, spread_m, size=(count, 2))
    ]


def reference_dbscan(points, eps_km, min_pts):
    """Textbook DBSCAN by pairwise distances."""
    n = len(points)
    neighbors = [
        [j for j in range(n) if haversine_km(points[i], points[j]) <= eps_km]
        for i in range(n)
    ]
    core = {i for i in range(n) if len(neighbors[i]) >= min_pts}
    components = []
    seen = set()
    for i in sorted(core):
        if i in seen:
            continue
        component = set()
        stack = [i]
        while stack:
            current = stack.pop()
            if current in component:
                continue
            component.add(current)
            stack.extend(j for j in neighbors[current] if j in core)
        seen |= component
        components.append(component)
    noise = {
        i for i in range(n)
        if i not in core and not any(j in core for j in neighbors[i])
    }
    return core, components, noise, neighbors


def test_params_are_validated():
    with pytest.raises(ValueError):
        DbscanParams(eps_km=0.0)
    with pytest.raises(ValueError):
        DbscanParams(min_pts=0)


def test_region_query_includes_the_point_itself():
    points = [ORIGIN, FRAME.to_gps(100.0, 0.0), FRAME.to_gps(5000.0, 0.0)]
    assert region_query(points, 0, 0.2) == [0, 1]
    assert region_query(points, 2, 0.2) == [2]


def test_empty_input():
    result = dbscan([], DbscanParams())
    assert result.labels == [] and result.zones == []


def test_two_blobs_and_an_outlier():
    rng = np.random.default_rng(3)
    points = (
        blob((-2000.0, 0.0), 40, 50.0, rng)
        + blob((2000.0, 0.0), 30, 50.0, rng)
        + [FRAME.to_gps(0.0, 4000.0)]
    )
    result = dbscan(points, DbscanParams(eps_km=0.3, min_pts=5))
    assert len(result.zones) == 2
    assert set(result.labels[:40]) == {0}
    assert set(result.labels[40:70]) == {1}
    assert result.labels[70] == NOISE
    assert result.noise_count == 1
    assert [zone.member_count for zone in result.zones] == [40, 30]
    assert haversine_km(result.zones[0].centroid, FRAME.to_gps(-2000.0, 0.0)) < 0.05


def test_min_pts_one_makes_every_point_core():
    points = [FRAME.to_gps(5000.0 * i, 0.0) for i in range(4)]
    result = dbscan(points, DbscanParams(eps_km=0.1, min_pts=1))
    assert result.core_flags == [True] * 4
    assert result.labels == [0, 1, 2, 3]
    assert all(zone.radius_km == 0.0 for zone in result.zones)


def test_too_few_points_are_all_noise():
    points = [FRAME.to_gps(10.0 * i, 0.0) for i in range(5)]
    result = dbscan(points, DbscanParams(eps_km=1.0, min_pts=6))
    assert result.labels == [NOISE] * 5
    assert result.zones == []


def test_border_point_joins_lowest_index_core_neighbor():
    # Two dense groups with one point half way between them, in reach of
    # both but with too few neighbours to be core itself.
    right = [FRAME.to_gps(150.0 + 10 * i, 0.0) for i in range(4)]
    left = [FRAME.to_gps(-150.0 - 10 * i, 0.0) for i in range(4)]
    middle = [FRAME.to_gps(0.0, 0.0)]
    result = dbscan(right + left + middle, DbscanParams(eps_km=0.155, min_pts=4))
    assert result.core_flags == [True] * 8 + [False]
    assert result.labels[8] == result.labels[0] == 0
    assert result.labels[4] == 1


def test_shared_border_point_counts_in_both_zones():
    offsets_km = [0.0, 0.2, 0.1, -0.1, -0.05, 0.25, 0.3]
    points = [FRAME.to_gps(1000.0 * x, 0.0) for x in offsets_km]
    params = DbscanParams(eps_km=0.11, min_pts=4)
    result = dbscan(points, params)
    assert result.core_flags == [True, True] + [False] * 5
    assert result.labels == [0, 1, 0, 0, 0, 1, 1]
    assert [zone.member_count for zone in result.zones] == [4, 4]
    assert all(zone.member_count >= params.min_pts for zone in result.zones)


@pytest.mark.parametrize("seed", range(3))
def test_core_points_do_not_depend_on_input_order(seed):
    rng = np.random.default_rng(seed)
    points = (
        blob((-1000.0, 0.0), 50, 200.0, rng)
        + blob((1200.0, 300.0), 30, 250.0, rng)
        + [FRAME.to_gps(*xy) for xy in rng.uniform(-3000.0, 3000.0, size=(30, 2))]
    )
    params = DbscanParams(eps_km=0.2, min_pts=5)
    result = dbscan(points, params)
    order = rng.permutation(len(points))
    shuffled = dbscan([points[i] for i in order], params)

    assert [shuffled.core_flags[k] for k in np.argsort(order)] == result.core_flags

    def core_partition(res, index):
        groups = {}
        for k, flag in enumerate(res.core_flags):
            if flag:
                groups.setdefault(res.labels[k], set()).add(int(index[k]))
        return sorted(map(sorted, groups.values()))

    assert core_partition(shuffled, order) == core_partition(result, range(len(points)))
    assert all(zone.member_count >= params.min_pts for zone in shuffled.zones)


@pytest.mark.parametrize("seed", range(5))
def test_matches_the_pairwise_reference(seed):
    rng = np.random.default_rng(seed)
    points = (
        blob((-1500.0, 500.0), 60, 200.0, rng)
        + blob((1000.0, -800.0), 40, 300.0, rng)
        + [FRAME.to_gps(*xy) for xy in rng.uniform(-4000.0, 4000.0, size=(50, 2))]
    )
    params = DbscanParams(eps_km=0.25, min_pts=6)
    result = dbscan(points, params)
    core, components, noise, neighbors = reference_dbscan(points, 0.25, 6)

    assert {i for i, flag in enumerate(result.core_flags) if flag} == core
    assert {i for i, label in enumerate(result.labels) if label == NOISE} == noise
    found = {}
    for i in core:
        found.setdefault(result.labels[i], set()).add(i)
    assert sorted(map(sorted, found.values())) == sorted(map(sorted, components))
    for i, label in enumerate(result.labels):
        if label != NOISE and i not in core:
            assert label == result.labels[min(j for j in neighbors[i] if j in core)]


def test_is_deterministic():
    rng = np.random.default_rng(9)
    points = blob((0.0, 0.0), 80, 400.0, rng)
    params = DbscanParams(eps_km=0.2, min_pts=4)
    assert dbscan(points, params) == dbscan(points, params)


class TestAssignZone:
    zones = [
        DenseZone(0, FRAME.to_gps(-1000.0, 0.0), 10, 0.2),
        DenseZone(1, FRAME.to_gps(1000.0, 0.0), 10, 0.2),
    ]

    def test_inside_radius_plus_eps(self):
        assert assign_zone(self.zones, FRAME.to_gps(-1000.0, 600.0), 0.5) == 0
        assert assign_zone(self.zones, FRAME.to_gps(1000.0, 0.0), 0.5) == 1

    def test_too_far(self):
        assert assign_zone(self.zones, FRAME.to_gps(-1000.0, 800.0), 0.5) is None

    def test_tie_goes_to_lowest_zone(self):
        zones = [DenseZone(3, ORIGIN, 1, 1.0), DenseZone(2, ORIGIN, 1, 1.0)]
        assert assign_zone(zones, FRAME.to_gps(0.0, 100.0), 0.5) == 2

    def test_no_zones(self):
        assert assign_zone([], ORIGIN, 0.5) is None


def test_zone_labels():
    assert zone_label(4) == "Z4"
    assert zone_label(None) == "NOISE"
    assert DenseZone(4, ORIGIN, 1, 0.0).label == "Z4"


def test_label_trace(topology):
    zones = [DenseZone(0, topology.enbs[0].point, 5, 0.1)]
    records = [move(0, 0, 0, topology), move(0, 1, 5, topology)]
    labeled = label_trace(records, zones, 0.5)
    assert [r.zone for r in labeled] == ["Z0", "NOISE"]
    assert [r.zone for r in records] == ["", ""]


def test_snapshot_positions_take_latest_record(topology):
    records = [
        move(0, 1, 0, topology),
        move(0, 0, 1, topology),
        move(10, 1, 2, topology),
        move(20, 1, 3, topology),
    ]
    ue_ids, points = snapshot_positions(records, 15)
    assert ue_ids == [0, 1]
    assert points == [records[1].point, records[2].point]
    ue_ids, points = snapshot_positions(records)
    assert points[1] == records[3].point


def test_zone_round_trips_through_dict():
    zone = DenseZone(2, GpsPoint(60.1, 24.9), 12, 0.35)
    assert DenseZone.from_dict(zone.to_dict()) == zone

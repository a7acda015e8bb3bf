import dataclasses
import math

import numpy as np
import pytest

from edp.codecs import trace_to_csv
from edp.config import ServiceKind, SimConfig
from edp.geo import GpsPoint, LocalFrame, haversine_km
from edp.tracegen import (
    NO_SERVICE, Area, DroneFleet, Ue, build_topology, generate_trace,
    iot_readings, nearest_enodeb, sample_service_session, step_ue, world_rngs,
)


class FixedRng:
    """Generator stand-in returning scripted `random()` draws."""

    def __init__(self, draws):
        self.draws = list(draws)

    def random(self):
        return self.draws.pop(0)

    def exponential(self, mean):
        return mean

    def uniform(self, low, high):
        return (low + high) / 2


def make_ue(speed=1.4, waypoint=(1000.0, 0.0)):
    frame = LocalFrame(GpsPoint(60.17, 24.94))
    return Ue(0, "walking", speed, 0.0, 0.0, waypoint, frame), Area(frame, 5000.0)


class TestTopology:
    def test_reference_grouping(self):
        topology = build_topology(SimConfig(), np.random.default_rng(0))
        assert len(topology.enbs) == 30
        assert len(topology.ecs) == 10
        assert all(len(ec.enb_ids) == 3 for ec in topology.ecs)
        assert len(topology.tas) == 5
        assert all(len(members) == 6 for members in topology.tas.values())
        assert len(topology.drone_homes) == 5
        assert len(topology.iot_devices) == 30

    def test_every_enb_in_exactly_one_ec(self):
        topology = build_topology(SimConfig(), np.random.default_rng(0))
        members = sorted(enb for ec in topology.ecs for enb in ec.enb_ids)
        assert members == list(range(30))
        for enb in topology.enbs:
            assert topology.ec_of_enb(enb.enb_id) == enb.ec_id
            assert enb.enb_id in topology.ecs[enb.ec_id].enb_ids

    def test_single_enb_sits_at_the_center(self):
        cfg = SimConfig(num_ecs=1, enbs_per_ec=1)
        topology = build_topology(cfg, np.random.default_rng(0))
        assert len(topology.enbs) == 1
        assert haversine_km(topology.enbs[0].point, cfg.origin) < 1e-9

    def test_same_seed_same_topology(self):
        cfg = SimConfig()
        assert build_topology(cfg, world_rngs(cfg)["topology"]) == build_topology(
            cfg, world_rngs(cfg)["topology"]
        )


class TestNearestEnodeb:
    def test_exact_location(self):
        topology = build_topology(SimConfig(), np.random.default_rng(0))
        for enb in topology.enbs:
            assert nearest_enodeb(topology, enb.point) == enb.enb_id

    def test_tie_goes_to_lowest_id(self, make_topology):
        topology = make_topology(num_ecs=2, enbs_per_ec=1, spacing_m=2000.0)
        frame = LocalFrame(topology.origin)
        # Both eNBs lie on the x axis; this point is on their bisector.
        middle = frame.to_gps(1000.0, 0.0)
        d0 = haversine_km(topology.enbs[0].point, middle)
        d1 = haversine_km(topology.enbs[1].point, middle)
        if d0 == d1:
            assert nearest_enodeb(topology, middle) == 0
        else:
            assert nearest_enodeb(topology, middle) == (0 if d0 < d1 else 1)

    def test_matches_linear_scan(self):
        topology = build_topology(SimConfig(), np.random.default_rng(0))
        rng = np.random.default_rng(5)
        for _ in range(100):
            p = GpsPoint(
                float(rng.uniform(60.12, 60.22)), float(rng.uniform(24.85, 25.03))
            )
            distances = [haversine_km(enb.point, p) for enb in topology.enbs]
            assert nearest_enodeb(topology, p) == int(np.argmin(distances))


class TestStepUe:
    def test_walking_ten_seconds(self):
        ue, area = make_ue()
        step_ue(ue, 10, area, np.random.default_rng(0), 100.0)
        assert (ue.x_m, ue.y_m) == pytest.approx((14.0, 0.0))

    def test_record_trigger_after_update_meters(self):
        ue, area = make_ue(speed=10.0, waypoint=(4000.0, 0.0))
        rng = np.random.default_rng(0)
        fired = [step_ue(ue, 1, area, rng, 100.0)[1] for _ in range(10)]
        assert fired == [False] * 9 + [True]
        assert ue.distance_since_record == 0.0

    @pytest.mark.parametrize("speed", [1.4, 4.0, 11.0])
    def test_records_are_spaced_by_update_meters(self, speed):
        ue, area = make_ue(speed=speed, waypoint=(300.0, 200.0))
        rng = np.random.default_rng(2)
        gaps = []
        path = 0.0
        for _ in range(3000):
            before = (ue.x_m, ue.y_m)
            path += speed
            _, fired = step_ue(ue, 1, area, rng, 100.0)
            assert math.dist(before, (ue.x_m, ue.y_m)) <= speed + 1e-9
            if fired:
                gaps.append(path)
                path = 0.0
        assert len(gaps) >= 3000 * speed // 200
        assert all(100.0 <= gap <= 100.0 + speed for gap in gaps)

    def test_waypoint_reached_mid_step(self):
        ue, area = make_ue(speed=10.0, waypoint=(4.0, 0.0))
        rng = np.random.default_rng(1)
        new_waypoint = area.random_point(np.random.default_rng(1))
        step_ue(ue, 1, area, rng, 100.0)
        # 4 m to the old waypoint, then 6 m toward the new one.
        dx, dy = new_waypoint[0] - 4.0, new_waypoint[1]
        norm = math.hypot(dx, dy)
        assert ue.x_m == pytest.approx(4.0 + 6.0 * dx / norm)
        assert ue.y_m == pytest.approx(6.0 * dy / norm)
        assert ue.waypoint_m == new_waypoint


class TestSampleServiceSession:
    def test_first_bucket_is_mime(self):
        cfg = SimConfig()
        ue, _ = make_ue()
        session = sample_service_session(FixedRng([0.0, 0.1]), cfg, 5, ue)
        assert session.service == ServiceKind.MIME
        assert session.start_s == 5
        assert session.end_s == 5 + 60
        assert (session.uplink_kbps, session.downlink_kbps) == (50, 50)

    def test_no_arrival(self):
        cfg = SimConfig(p_arrival=0.0)
        ue, _ = make_ue()
        rng = np.random.default_rng(0)
        assert all(
            sample_service_session(rng, cfg, t, ue) is None for t in range(1000)
        )

    def test_frequencies_follow_the_configuration(self):
        cfg = SimConfig(p_arrival=1.0)
        ue, _ = make_ue()
        rng = np.random.default_rng(2)
        draws = 100_000
        counts = {}
        for _ in range(draws):
            service = sample_service_session(rng, cfg, 0, ue).service
            counts[service] = counts.get(service, 0) + 1
        for kind, probability in cfg.service_table():
            sigma = math.sqrt(probability * (1 - probability) / draws)
            assert counts.get(str(kind), 0) / draws == pytest.approx(
                probability, abs=5 * sigma
            )

    def test_duration_is_clamped(self):
        cfg = SimConfig()
        ue, _ = make_ue()
        rng = np.random.default_rng(4)
        for t in range(2000):
            session = sample_service_session(rng, cfg, t, ue)
            if session is None:
                continue
            mean = cfg.services[session.service].duration_mean_s
            assert 10 <= session.end_s - session.start_s <= math.ceil(2 * mean + 600)
            assert session.uplink_kbps > 0 and session.downlink_kbps > 0

    def test_drone_session_adds_flight_time(self, small_sim):
        topology = build_topology(small_sim, np.random.default_rng(0))
        fleet = DroneFleet(topology, drones_per_home=1)
        ue, _ = make_ue()
        # Cumulative shares 0.20, 0.50, 0.80, 0.85: 0.82 is DroneDelivery.
        session = sample_service_session(FixedRng([0.0, 0.82]), small_sim, 0, ue, fleet)
        assert session.service == ServiceKind.DRONE_DELIVERY
        assert session.drone_home == 0
        distance_m = 1000 * haversine_km(topology.drone_homes[0].point, ue.position)
        assert session.flight_time_s == pytest.approx(distance_m / 15.0)
        # The only drone is busy: the next drone session is degraded.
        degraded = sample_service_session(FixedRng([0.0, 0.82]), small_sim, 0, ue, fleet)
        assert degraded.drone_home is None
        assert degraded.flight_time_s == 0.0
        fleet.release(session)
        assert fleet.free[0] == 1


class TestGenerateTrace:
    def test_every_ue_has_a_first_record(self, small_sim):
        records, _, _ = generate_trace(small_sim)
        assert [r.ue_id for r in records[: small_sim.num_ues]] == list(range(small_sim.num_ues))
        assert all(r.time_s == 0 for r in records[: small_sim.num_ues])

    def test_records_follow_sessions(self, small_sim):
        records, sessions, _ = generate_trace(small_sim)
        assert sessions
        for session in sessions:
            assert session.end_s > session.start_s
        by_ue = {}
        for session in sessions:
            by_ue.setdefault(session.ue_id, []).append(session)
        for record in records:
            active = [
                s for s in by_ue.get(record.ue_id, [])
                if s.start_s <= record.time_s < s.end_s
            ]
            if active:
                assert record.service_name == active[0].service
                assert record.datarate_uplink_kbps == active[0].uplink_kbps
                assert record.datarate_downlink_kbps == active[0].downlink_kbps
            else:
                assert record.service_name == NO_SERVICE
                assert record.datarate_uplink_kbps == 0
                assert record.datarate_downlink_kbps == 0

    def test_records_are_time_ordered_and_zone_is_empty(self, small_sim):
        records, _, _ = generate_trace(small_sim)
        times = [r.time_s for r in records]
        assert times == sorted(times)
        assert all(r.zone == "" for r in records)
        assert max(times) <= small_sim.sim_duration_s

    def test_enodeb_is_the_nearest(self, small_sim):
        records, _, topology = generate_trace(small_sim)
        for record in records[:300]:
            distances = [haversine_km(enb.point, record.point) for enb in topology.enbs]
            assert record.enodeb_id == int(np.argmin(distances))

    def test_one_active_session_per_ue(self, small_sim):
        _, sessions, _ = generate_trace(small_sim)
        by_ue = {}
        for session in sessions:
            by_ue.setdefault(session.ue_id, []).append(session)
        for ue_sessions in by_ue.values():
            for earlier, later in zip(ue_sessions, ue_sessions[1:]):
                assert later.start_s >= earlier.end_s

    def test_deterministic(self, small_sim):
        first = generate_trace(small_sim)
        second = generate_trace(small_sim)
        assert trace_to_csv(first[0]) == trace_to_csv(second[0])
        assert first[1] == second[1]

    def test_service_seed_keeps_mobility(self, small_sim):
        quiet = dataclasses.replace(small_sim, p_arrival=0.0)
        other = dataclasses.replace(small_sim, p_arrival=0.0, service_seed=99)
        a, _, _ = generate_trace(quiet)
        b, _, _ = generate_trace(other)
        assert a == b

    def test_different_seeds_differ(self, small_sim):
        a, _, _ = generate_trace(small_sim)
        b, _, _ = generate_trace(dataclasses.replace(small_sim, seed=8))
        assert a != b


def test_iot_readings_cover_every_device_and_period(small_sim):
    topology = build_topology(small_sim, world_rngs(small_sim)["topology"])
    readings = iot_readings(topology, small_sim)
    periods = small_sim.sim_duration_s // small_sim.iot_reading_period_s + 1
    assert len(readings) == periods * len(topology.iot_devices)
    for reading in readings:
        if reading.kind == "parking":
            assert 0.0 <= reading.value <= 1.0
        if reading.kind == "air_pollution":
            assert reading.value >= 0.0

"""Shared fixtures: small worlds, default MEC settings and hand-built
topologies."""
import pytest

from edp.config import MecConfig, SimConfig
from edp.geo import GpsPoint, LocalFrame
from edp.tracegen import EcSite, Enb, Topology, TraceRecord

ORIGIN = GpsPoint(60.17, 24.94)


@pytest.fixture
def small_sim() -> SimConfig:
    """Ten minutes of 20 UEs in a 2 km square with 2 ECs of 2 eNBs."""
    return SimConfig(
        num_ues=20,
        num_ecs=2,
        enbs_per_ec=2,
        enbs_per_ta=2,
        range_m=1000.0,
        num_drone_homes=1,
        drones_per_home=1,
        iot_device_counts={"weather": 1, "air_pollution": 1, "parking": 1},
        sim_duration_s=600,
        p_arrival=0.01,
        seed=7,
    )


@pytest.fixture
def mec_cfg() -> MecConfig:
    return MecConfig()


def line_topology(num_ecs: int = 2, enbs_per_ec: int = 1, spacing_m: float = 2000.0):
    """ECs along a west-east line; eNB ids grouped consecutively per EC."""
    frame = LocalFrame(ORIGIN)
    enbs = []
    for enb_id in range(num_ecs * enbs_per_ec):
        enbs.append(
            Enb(enb_id, frame.to_gps(enb_id * spacing_m, 0.0), enb_id // enbs_per_ec, 0)
        )
    ecs = [
        EcSite(
            ec_id,
            enbs[ec_id * enbs_per_ec].point,
            tuple(range(ec_id * enbs_per_ec, (ec_id + 1) * enbs_per_ec)),
        )
        for ec_id in range(num_ecs)
    ]
    return Topology(enbs, ecs, [], [], ORIGIN, 10000.0)


@pytest.fixture
def topology():
    """Three ECs with two eNBs each."""
    return line_topology(num_ecs=3, enbs_per_ec=2)


@pytest.fixture
def make_topology():
    return line_topology


def move(t, ue_id, enb, topology, service="NONE", rates=(0, 0)):
    """Trace record of `ue_id` standing at eNB `enb`."""
    point = next(e.point for e in topology.enbs if e.enb_id == enb)
    return TraceRecord(
        t, ue_id, service, round(point.lat, 6), round(point.lon, 6), enb,
        rates[0], rates[1],
    )


@pytest.fixture
def make_record():
    return move

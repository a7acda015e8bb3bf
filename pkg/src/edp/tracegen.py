"""Generate the synthetic world and its mobile service-usage trace.

The world is a square of side `2 * range_m` centered at the configured
origin. eNBs sit on a regular grid and are grouped into edge clouds (ECs) and
tracking areas (TAs). UEs follow a random-waypoint itinerary with a walking,
biking or driving speed and start service sessions at random. One
`TraceRecord` is emitted each time a UE travels `update_meters`, and at every
session start and end.

License
-------
This file is part of edgeplanner
BSD 3-Clause License
"""
import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from edp.config import DRONE_SERVICES, IOT_DEVICE_KINDS, PROFILES, SimConfig
from edp.geo import GpsPoint, LocalFrame, haversine_km, round_point

logger = logging.getLogger(__name__)

NO_SERVICE = "NONE"
MIN_SESSION_S = 10.0


@dataclass(frozen=True)
class Enb:
    enb_id: int
    point: GpsPoint
    ec_id: int
    ta_id: int


@dataclass(frozen=True)
class EcSite:
    """Location of an edge cloud: centroid of its member eNBs."""

    ec_id: int
    point: GpsPoint
    enb_ids: tuple[int, ...]


@dataclass(frozen=True)
class DroneHome:
    home_id: int
    point: GpsPoint


@dataclass(frozen=True)
class IotDevice:
    device_id: int
    kind: str
    point: GpsPoint


class Topology:
    """eNBs, edge clouds, tracking areas, drone homes and IoT devices.

    Attributes
    ----------
    enbs : list[Enb]
        eNBs ordered by `enb_id`.
    ecs : list[EcSite]
        Edge clouds ordered by `ec_id`.
    tas : dict[int, tuple[int, ...]]
        Member eNBs of every tracking area.
    drone_homes : list[DroneHome]
    iot_devices : list[IotDevice]
    origin : GpsPoint
        Center of the simulation area.
    range_m : float
        Half side of the simulation area.
    """

    def __init__(self, enbs, ecs, drone_homes, iot_devices, origin, range_m):
        self.enbs = list(enbs)
        self.ecs = list(ecs)
        self.drone_homes = list(drone_homes)
        self.iot_devices = list(iot_devices)
        self.origin = origin
        self.range_m = range_m
        tas = {}
        for enb in self.enbs:
            tas.setdefault(enb.ta_id, []).append(enb.enb_id)
        self.tas = {ta: tuple(members) for ta, members in sorted(tas.items())}
        self._ec_of_enb = {enb.enb_id: enb.ec_id for enb in self.enbs}

    def ec_of_enb(self, enb_id: int) -> int:
        return self._ec_of_enb[enb_id]

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return (
            self.enbs == other.enbs
            and self.ecs == other.ecs
            and self.drone_homes == other.drone_homes
            and self.iot_devices == other.iot_devices
            and self.origin == other.origin
            and self.range_m == other.range_m
        )


@dataclass(frozen=True)
class ServiceSession:
    """One service session of one UE over [start_s, end_s)."""

    ue_id: int
    service: str
    start_s: int
    end_s: int
    uplink_kbps: int
    downlink_kbps: int
    drone_home: Union[int, None] = None
    flight_time_s: float = 0.0


@dataclass(frozen=True)
class TraceRecord:
    """One observation of one UE.

    `zone` is empty until the trace is labeled with dense zones.
    """

    time_s: int
    ue_id: int
    service_name: str
    lat: float
    lon: float
    enodeb_id: int
    datarate_uplink_kbps: int
    datarate_downlink_kbps: int
    zone: str = ""

    @property
    def point(self) -> GpsPoint:
        return GpsPoint(self.lat, self.lon)


@dataclass(frozen=True)
class IotReading:
    time_s: int
    device_id: int
    kind: str
    value: float


class Area:
    """Square simulation area used by the random-waypoint model."""

    def __init__(self, frame: LocalFrame, half_side_m: float):
        self.frame = frame
        self.half_side_m = half_side_m

    def random_point(self, rng) -> tuple[float, float]:
        """Uniform point of the square, in meters."""
        x = rng.uniform(-self.half_side_m, self.half_side_m)
        y = rng.uniform(-self.half_side_m, self.half_side_m)
        return (float(x), float(y))

    def contains(self, x_m: float, y_m: float) -> bool:
        return abs(x_m) <= self.half_side_m and abs(y_m) <= self.half_side_m


class Ue:
    """User equipment moving with the random-waypoint model.

    Positions are kept in meters of the area's local frame; `position` gives
    the GPS view.
    """

    def __init__(
        self,
        ue_id: int,
        profile: str,
        speed_mps: float,
        x_m: float,
        y_m: float,
        waypoint: tuple[float, float],
        frame: LocalFrame,
    ):
        self.ue_id = ue_id
        self.profile = profile
        self.speed_mps = speed_mps
        self.x_m = x_m
        self.y_m = y_m
        self.waypoint_m = waypoint
        self.frame = frame
        self.distance_since_record = 0.0
        self.active_session: Union[ServiceSession, None] = None

    @property
    def position(self) -> GpsPoint:
        return self.frame.to_gps(self.x_m, self.y_m)

    @property
    def waypoint(self) -> GpsPoint:
        return self.frame.to_gps(*self.waypoint_m)

    @classmethod
    def spawn(cls, ue_id: int, cfg: SimConfig, area: Area, rng) -> "Ue":
        """Draw profile, start position and first waypoint."""
        profile = PROFILES[int(rng.integers(len(PROFILES)))]
        x_m, y_m = area.random_point(rng)
        waypoint = area.random_point(rng)
        return cls(
            ue_id, profile, cfg.profile_speeds[profile], x_m, y_m, waypoint,
            area.frame,
        )


def build_topology(cfg: SimConfig, rng) -> Topology:
    """Place eNBs on a grid, group them, and scatter homes and devices.

    The grid has `ceil(sqrt(n))` columns; eNB ids run row by row from the
    south-west corner. Consecutive eNBs form ECs (`enbs_per_ec` at a time)
    and TAs (`enbs_per_ta` at a time).
    """
    frame = LocalFrame(cfg.origin)
    area = Area(frame, cfg.range_m)
    num_enbs = cfg.num_ecs * cfg.enbs_per_ec
    columns = math.ceil(math.sqrt(num_enbs))
    rows = math.ceil(num_enbs / columns)
    cell_w = 2 * cfg.range_m / columns
    cell_h = 2 * cfg.range_m / rows
    enbs = []
    for enb_id in range(num_enbs):
        row, column = divmod(enb_id, columns)
        x_m = -cfg.range_m + (column + 0.5) * cell_w
        y_m = -cfg.range_m + (row + 0.5) * cell_h
        enbs.append(
            Enb(
                enb_id=enb_id,
                point=frame.to_gps(x_m, y_m),
                ec_id=enb_id // cfg.enbs_per_ec,
                ta_id=enb_id // cfg.enbs_per_ta,
            )
        )
    ecs = []
    for ec_id in range(cfg.num_ecs):
        members = [enb for enb in enbs if enb.ec_id == ec_id]
        centroid = GpsPoint(
            lat=sum(enb.point.lat for enb in members) / len(members),
            lon=sum(enb.point.lon for enb in members) / len(members),
        )
        ecs.append(EcSite(ec_id, centroid, tuple(enb.enb_id for enb in members)))
    drone_homes = [
        DroneHome(home_id, frame.to_gps(*area.random_point(rng)))
        for home_id in range(cfg.num_drone_homes)
    ]
    iot_devices = []
    for kind in IOT_DEVICE_KINDS:
        for _ in range(cfg.iot_device_counts[kind]):
            iot_devices.append(
                IotDevice(
                    len(iot_devices), kind, frame.to_gps(*area.random_point(rng))
                )
            )
    logger.debug(
        "topology: %d eNBs on a %dx%d grid, %d ECs, %d TAs",
        num_enbs, columns, rows, len(ecs), math.ceil(num_enbs / cfg.enbs_per_ta),
    )
    return Topology(enbs, ecs, drone_homes, iot_devices, cfg.origin, cfg.range_m)


def nearest_enodeb(topo: Topology, p: GpsPoint) -> int:
    """eNB closest to `p`; ties go to the lowest `enb_id`."""
    best_id = None
    best_distance = math.inf
    for enb in topo.enbs:
        distance = haversine_km(enb.point, p)
        if distance < best_distance:
            best_id = enb.enb_id
            best_distance = distance
    return best_id


def step_ue(
    ue: Ue, dt_s: float, area: Area, rng, update_meters: float
) -> tuple[Ue, bool]:
    """Advance `ue` by `dt_s` seconds along its random-waypoint itinerary.

    When the waypoint is reached in the middle of the step, a new waypoint is
    drawn uniformly in the area and the remaining distance is travelled
    toward it.

    Returns
    -------
    (Ue, bool)
        The updated UE and whether a distance-triggered record is due.
    """
    remaining = ue.speed_mps * dt_s
    travelled = remaining
    while remaining > 0.0:
        dx = ue.waypoint_m[0] - ue.x_m
        dy = ue.waypoint_m[1] - ue.y_m
        to_waypoint = math.hypot(dx, dy)
        if to_waypoint <= remaining:
            ue.x_m, ue.y_m = ue.waypoint_m
            remaining -= to_waypoint
            ue.waypoint_m = area.random_point(rng)
        else:
            fraction = remaining / to_waypoint
            ue.x_m += dx * fraction
            ue.y_m += dy * fraction
            remaining = 0.0
    ue.distance_since_record += travelled
    if ue.distance_since_record >= update_meters:
        ue.distance_since_record = 0.0
        return ue, True
    return ue, False


class DroneFleet:
    """Drones available at each drone home."""

    def __init__(self, topology: Topology, drones_per_home: int):
        self.homes = topology.drone_homes
        self.free = {home.home_id: drones_per_home for home in self.homes}

    def acquire(self, point: GpsPoint) -> Union[tuple[int, float], None]:
        """Take a drone from the nearest home with one free.

        Returns the home id and the flight distance in meters, or None when
        every drone is busy.
        """
        candidates = sorted(
            (haversine_km(home.point, point), home.home_id) for home in self.homes
        )
        for distance_km, home_id in candidates:
            if self.free[home_id] > 0:
                self.free[home_id] -= 1
                return home_id, distance_km * 1000.0
        return None

    def release(self, session: ServiceSession) -> None:
        if session.drone_home is not None:
            self.free[session.drone_home] += 1


def sample_service_session(
    rng, cfg: SimConfig, t_s: int, ue: Ue, fleet: Union[DroneFleet, None] = None
) -> Union[ServiceSession, None]:
    """Bernoulli session arrival for an idle UE at time `t_s`.

    Draws, in order: the arrival, the service kind from the categorical
    distribution of the configuration, the duration (exponential, clamped to
    [10 s, 2 x mean + 600 s]) and the uplink/downlink datarates (uniform
    within `datarate_jitter` of the service table).
    """
    if rng.random() >= cfg.p_arrival:
        return None
    u = rng.random()
    cumulative = 0.0
    table = cfg.service_table()
    service = table[-1][0]
    for kind, probability in table:
        cumulative += probability
        if u < cumulative:
            service = kind
            break
    profile = cfg.services[service]
    drone_home = None
    flight_time_s = 0.0
    if service in DRONE_SERVICES and fleet is not None:
        drone = fleet.acquire(ue.position)
        if drone is not None:
            drone_home, flight_m = drone
            flight_time_s = flight_m / cfg.drone_speed_mps
        else:
            logger.debug("ue %d: no free drone, degraded session", ue.ue_id)
    mean = profile.duration_mean_s + flight_time_s
    duration = float(rng.exponential(mean))
    duration = min(max(duration, MIN_SESSION_S), 2 * mean + 600.0)
    uplink = _jittered_rate(rng, profile.uplink_kbps, cfg.datarate_jitter)
    downlink = _jittered_rate(rng, profile.downlink_kbps, cfg.datarate_jitter)
    return ServiceSession(
        ue_id=ue.ue_id,
        service=str(service),
        start_s=t_s,
        end_s=t_s + math.ceil(duration),
        uplink_kbps=uplink,
        downlink_kbps=downlink,
        drone_home=drone_home,
        flight_time_s=flight_time_s,
    )


def _jittered_rate(rng, rate: float, jitter: float) -> int:
    return max(1, round(rate * (1.0 + jitter * float(rng.uniform(-1.0, 1.0)))))


def make_record(t_s: int, ue: Ue, topology: Topology) -> TraceRecord:
    """Observation of `ue` at `t_s`, with coordinates rounded as stored."""
    point = round_point(ue.position)
    session = ue.active_session
    return TraceRecord(
        time_s=t_s,
        ue_id=ue.ue_id,
        service_name=session.service if session else NO_SERVICE,
        lat=point.lat,
        lon=point.lon,
        enodeb_id=nearest_enodeb(topology, point),
        datarate_uplink_kbps=session.uplink_kbps if session else 0,
        datarate_downlink_kbps=session.downlink_kbps if session else 0,
    )


def world_rngs(cfg: SimConfig) -> dict[str, np.random.Generator]:
    """Independent random streams of one run.

    Mobility and topology depend on `seed` only, so two runs that differ in
    `service_seed` share every itinerary.
    """
    return {
        "mobility": np.random.default_rng([cfg.seed, 1]),
        "service": np.random.default_rng([cfg.effective_service_seed, 2]),
        "topology": np.random.default_rng([cfg.seed, 3]),
        "iot": np.random.default_rng([cfg.seed, 4]),
    }


def generate_trace(
    cfg: SimConfig,
) -> tuple[list[TraceRecord], list[ServiceSession], Topology]:
    """Run the full trace generation sweep.

    Every UE emits a record at t = 0. Then, at each tick, every UE moves,
    its session ends if due, an idle UE may start a new session, and a single
    record is emitted if the UE crossed `update_meters` or a session started
    or ended during the tick.

    Returns
    -------
    (records, sessions, topology)
        Records ordered by time then UE; sessions ordered by start then UE.
    """
    cfg.validate()
    rngs = world_rngs(cfg)
    topology = build_topology(cfg, rngs["topology"])
    area = Area(LocalFrame(cfg.origin), cfg.range_m)
    ues = [Ue.spawn(ue_id, cfg, area, rngs["mobility"]) for ue_id in range(cfg.num_ues)]
    fleet = DroneFleet(topology, cfg.drones_per_home)
    records = [make_record(0, ue, topology) for ue in ues]
    sessions = []
    logger.info(
        "generating trace: %d UEs, %d s, seed %d, service seed %d",
        cfg.num_ues, cfg.sim_duration_s, cfg.seed, cfg.effective_service_seed,
    )
    for t_s in range(cfg.tick_s, cfg.sim_duration_s + 1, cfg.tick_s):
        for ue in ues:
            _, triggered = step_ue(
                ue, cfg.tick_s, area, rngs["mobility"], cfg.update_meters
            )
            changed = False
            session = ue.active_session
            if session is not None and session.end_s <= t_s:
                fleet.release(session)
                ue.active_session = None
                changed = True
            if ue.active_session is None:
                new_session = sample_service_session(
                    rngs["service"], cfg, t_s, ue, fleet
                )
                if new_session is not None:
                    ue.active_session = new_session
                    sessions.append(new_session)
                    changed = True
            if triggered or changed:
                records.append(make_record(t_s, ue, topology))
    logger.info("trace: %d records, %d sessions", len(records), len(sessions))
    return records, sessions, topology


def iot_readings(topology: Topology, cfg: SimConfig) -> list[IotReading]:
    """Periodic synthetic readings of every IoT device.

    Weather devices report a temperature in degrees Celsius with a daily
    cycle, air-pollution devices an air-quality index and parking devices an
    occupancy fraction.
    """
    rng = world_rngs(cfg)["iot"]
    readings = []
    for t_s in range(0, cfg.sim_duration_s + 1, cfg.iot_reading_period_s):
        day_phase = 2 * math.pi * (t_s % 86400) / 86400
        for device in topology.iot_devices:
            if device.kind == "weather":
                value = 12.0 - 6.0 * math.cos(day_phase) + rng.normal(0.0, 0.5)
            elif device.kind == "air_pollution":
                value = max(0.0, 40.0 + 15.0 * math.sin(day_phase) + rng.normal(0.0, 5.0))
            else:
                value = min(1.0, max(0.0, 0.5 - 0.3 * math.cos(day_phase) + rng.normal(0.0, 0.1)))
            readings.append(IotReading(t_s, device.device_id, device.kind, round(float(value), 3)))
    return readings

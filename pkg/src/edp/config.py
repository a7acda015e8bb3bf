"""Simulation and MEC configuration.

Defaults reproduce the simulation parameters (500 UEs, 30 eNBs grouped in 10
edge clouds, 12 h) and the MEC parameters (First Fit, 2 VMs per edge cloud,
8 GB/8 cores/500 GB VMs, 1 GB/2 cores/2 GB applications) of the reference
set-up. Configuration files are TOML with a `[simulation]` and a `[mec]`
table.

License
-------
This file is part of edgeplanner
BSD 3-Clause License
"""
import dataclasses
import math
import tomllib
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path
from typing import Any, Union

from edp.errors import ArtifactIOError, ConfigError
from edp.geo import GpsPoint


class ServiceKind(StrEnum):
    """Session types. Declaration order is the canonical label order."""

    MIME = "MIME"
    VIDEO_STREAMING = "VideoStreaming"
    SOCIAL_NETWORK = "SocialNetwork"
    DRONE_DELIVERY = "DroneDelivery"
    DRONE_TRANSPORTATION = "DroneTransportation"
    IOT_WEATHER = "IotWeather"
    IOT_AIR_POLLUTION = "IotAirPollution"
    IOT_PARKING = "IotParking"


DRONE_SERVICES = (ServiceKind.DRONE_DELIVERY, ServiceKind.DRONE_TRANSPORTATION)
IOT_SERVICES = (
    ServiceKind.IOT_WEATHER,
    ServiceKind.IOT_AIR_POLLUTION,
    ServiceKind.IOT_PARKING,
)
# Probability rows of the configuration; `IoT` is split evenly over
# IOT_SERVICES.
PROBABILITY_ROWS = (
    "MIME",
    "VideoStreaming",
    "SocialNetwork",
    "DroneDelivery",
    "DroneTransportation",
    "IoT",
)
IOT_DEVICE_KINDS = ("weather", "air_pollution", "parking")
PROFILES = ("walking", "biking", "driving")
POLICIES = ("FirstFit", "BestFit", "Random")


@dataclass(frozen=True)
class Resources:
    """RAM, cores and storage of a host, VM or application."""

    ram_gb: float
    cores: float
    storage_gb: float

    def __add__(self, other: "Resources") -> "Resources":
        return Resources(
            self.ram_gb + other.ram_gb,
            self.cores + other.cores,
            self.storage_gb + other.storage_gb,
        )

    def __sub__(self, other: "Resources") -> "Resources":
        return Resources(
            self.ram_gb - other.ram_gb,
            self.cores - other.cores,
            self.storage_gb - other.storage_gb,
        )

    def scaled(self, factor: float) -> "Resources":
        return Resources(
            self.ram_gb * factor, self.cores * factor, self.storage_gb * factor
        )

    def fits_in(self, other: "Resources") -> bool:
        """True if every dimension is lower than or equal to `other`."""
        return (
            self.ram_gb <= other.ram_gb
            and self.cores <= other.cores
            and self.storage_gb <= other.storage_gb
        )

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.ram_gb, self.cores, self.storage_gb)


ZERO_RESOURCES = Resources(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class ServiceProfile:
    """Mean duration and datarates of one service kind.

    For drone services `duration_mean_s` is added to the flight time.
    """

    duration_mean_s: float
    uplink_kbps: float
    downlink_kbps: float


def _default_probabilities() -> dict[str, float]:
    return {
        "MIME": 0.20,
        "VideoStreaming": 0.30,
        "SocialNetwork": 0.30,
        "DroneDelivery": 0.05,
        "DroneTransportation": 0.05,
        "IoT": 0.10,
    }


def _default_services() -> dict[str, ServiceProfile]:
    return {
        ServiceKind.MIME: ServiceProfile(60.0, 50.0, 50.0),
        ServiceKind.VIDEO_STREAMING: ServiceProfile(300.0, 100.0, 5000.0),
        ServiceKind.SOCIAL_NETWORK: ServiceProfile(180.0, 200.0, 1500.0),
        ServiceKind.DRONE_DELIVERY: ServiceProfile(120.0, 200.0, 500.0),
        ServiceKind.DRONE_TRANSPORTATION: ServiceProfile(120.0, 200.0, 500.0),
        ServiceKind.IOT_WEATHER: ServiceProfile(30.0, 20.0, 20.0),
        ServiceKind.IOT_AIR_POLLUTION: ServiceProfile(30.0, 20.0, 20.0),
        ServiceKind.IOT_PARKING: ServiceProfile(30.0, 20.0, 20.0),
    }


@dataclass(frozen=True)
class SimConfig:
    """Parameters of the synthetic world and of the trace generator.

    Attributes
    ----------
    num_ues : int
        Number of simulated user equipments.
    update_meters : float
        Distance a UE travels between two distance-triggered records.
    enbs_per_ec, enbs_per_ta, num_ecs : int
        eNB grouping into edge clouds and tracking areas.
    num_drone_homes, drones_per_home : int
        Drone fleet.
    range_m : float
        Half side of the square simulation area, centered at `origin`.
    iot_device_counts : dict
        Devices per kind (`weather`, `air_pollution`, `parking`).
    service_probabilities : dict
        Probability of each configuration row (`IoT` covers the three IoT
        kinds).
    sim_duration_s : int
        Simulated time in seconds.
    seed : int
        Seed of topology and mobility.
    service_seed : int or None
        Seed of the session stream. None means `seed`.
    """

    num_ues: int = 500
    update_meters: float = 100.0
    enbs_per_ec: int = 3
    enbs_per_ta: int = 6
    num_ecs: int = 10
    num_drone_homes: int = 5
    drones_per_home: int = 2
    range_m: float = 5000.0
    iot_device_counts: dict = field(
        default_factory=lambda: {kind: 10 for kind in IOT_DEVICE_KINDS}
    )
    service_probabilities: dict = field(default_factory=_default_probabilities)
    sim_duration_s: int = 12 * 3600
    seed: int = 1
    origin: GpsPoint = GpsPoint(60.17, 24.94)
    service_seed: Union[int, None] = None
    p_arrival: float = 1.0 / 600.0
    tick_s: int = 1
    profile_speeds: dict = field(
        default_factory=lambda: {"walking": 1.4, "biking": 4.0, "driving": 11.0}
    )
    services: dict = field(default_factory=_default_services)
    drone_speed_mps: float = 15.0
    iot_reading_period_s: int = 600
    datarate_jitter: float = 0.10

    @property
    def effective_service_seed(self) -> int:
        return self.seed if self.service_seed is None else self.service_seed

    def service_table(self) -> list[tuple[ServiceKind, float]]:
        """Categorical distribution over service kinds, canonical order."""
        table = []
        for kind in ServiceKind:
            if kind in IOT_SERVICES:
                share = self.service_probabilities["IoT"] / len(IOT_SERVICES)
            else:
                share = self.service_probabilities[kind.value]
            table.append((kind, share))
        return table

    def validate(self) -> "SimConfig":
        """Check ranges and cross-field invariants; return self."""
        for key in (
            "num_ues", "enbs_per_ec", "enbs_per_ta", "num_ecs",
            "num_drone_homes", "drones_per_home",
        ):
            _check_count(f"simulation.{key}", getattr(self, key))
        for kind in IOT_DEVICE_KINDS:
            if kind not in self.iot_device_counts:
                raise ConfigError(
                    f"simulation.iot_device_counts.{kind}", "missing device kind"
                )
            _check_count(
                f"simulation.iot_device_counts.{kind}",
                self.iot_device_counts[kind],
            )
        _check_positive("simulation.range_m", self.range_m)
        _check_positive("simulation.update_meters", self.update_meters)
        _check_count("simulation.sim_duration_s", self.sim_duration_s)
        _check_count("simulation.tick_s", self.tick_s)
        _check_positive("simulation.drone_speed_mps", self.drone_speed_mps)
        _check_count("simulation.iot_reading_period_s", self.iot_reading_period_s)
        for key in ("seed", "service_seed"):
            value = getattr(self, key)
            if value is None and key == "service_seed":
                continue
            if (
                not isinstance(value, int)
                or isinstance(value, bool)
                or not 0 <= value < 2**64
            ):
                raise ConfigError(
                    f"simulation.{key}", "must be an integer in [0, 2**64)"
                )
        _check_fraction("simulation.p_arrival", self.p_arrival)
        _check_fraction("simulation.datarate_jitter", self.datarate_jitter, closed=False)
        for row in PROBABILITY_ROWS:
            if row not in self.service_probabilities:
                raise ConfigError(
                    f"simulation.service_probabilities.{row}", "missing row"
                )
            _check_fraction(
                f"simulation.service_probabilities.{row}",
                self.service_probabilities[row],
            )
        total = math.fsum(self.service_probabilities.values())
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(
                "simulation.service_probabilities",
                f"probabilities sum to {total:.6g}, expected 1.0",
            )
        for profile in PROFILES:
            if profile not in self.profile_speeds:
                raise ConfigError(
                    f"simulation.profile_speeds.{profile}", "missing profile"
                )
            _check_positive(
                f"simulation.profile_speeds.{profile}",
                self.profile_speeds[profile],
            )
        for kind in ServiceKind:
            if kind not in self.services:
                raise ConfigError(f"simulation.services.{kind}", "missing service")
            profile = self.services[kind]
            _check_positive(
                f"simulation.services.{kind}.duration_mean_s",
                profile.duration_mean_s,
            )
            _check_positive(
                f"simulation.services.{kind}.uplink_kbps", profile.uplink_kbps
            )
            _check_positive(
                f"simulation.services.{kind}.downlink_kbps", profile.downlink_kbps
            )
        return self


@dataclass(frozen=True)
class MecConfig:
    """Parameters of the MEC infrastructure model."""

    bandwidth_gbps: float = 1.0
    policy: str = "FirstFit"
    vms_per_ec: int = 2
    host_resources: Resources = Resources(16.0, 16.0, 1000.0)
    vm_resources: Resources = Resources(8.0, 8.0, 500.0)
    app_resources: Resources = Resources(1.0, 2.0, 2.0)

    @property
    def migration_duration_s(self) -> float:
        """Transfer time of one application image."""
        return self.app_resources.storage_gb / self.bandwidth_gbps

    def validate(self) -> "MecConfig":
        """Check ranges and resource nesting; return self."""
        _check_positive("mec.bandwidth_gbps", self.bandwidth_gbps)
        if self.policy not in POLICIES:
            raise ConfigError(
                "mec.policy",
                f"unknown policy `{self.policy}`; valid: {', '.join(POLICIES)}",
            )
        _check_count("mec.vms_per_ec", self.vms_per_ec)
        for key in ("host_resources", "vm_resources", "app_resources"):
            for name, value in zip(
                ("ram_gb", "cores", "storage_gb"), getattr(self, key).as_tuple()
            ):
                _check_positive(f"mec.{key}.{name}", value)
        if not self.vm_resources.scaled(self.vms_per_ec).fits_in(
            self.host_resources
        ):
            raise ConfigError(
                "mec.vm_resources",
                "vms_per_ec x vm_resources exceeds host_resources",
            )
        if not self.app_resources.fits_in(self.vm_resources):
            raise ConfigError(
                "mec.app_resources", "application does not fit in one VM"
            )
        return self


def _check_count(key: str, value: Any) -> None:
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ConfigError(key, f"must be an integer >= 1, got {value!r}")


def _check_positive(key: str, value: Any) -> None:
    if (
        not isinstance(value, (int, float))
        or isinstance(value, bool)
        or not math.isfinite(value)
        or value <= 0
    ):
        raise ConfigError(key, f"must be a number > 0, got {value!r}")


def _check_fraction(key: str, value: Any, closed: bool = True) -> None:
    """Number in [0, 1], or [0, 1) when not `closed`."""
    if (
        not isinstance(value, (int, float))
        or isinstance(value, bool)
        or not 0.0 <= value <= 1.0
        or (not closed and value == 1.0)
    ):
        bounds = "[0, 1]" if closed else "[0, 1)"
        raise ConfigError(key, f"must be a number in {bounds}, got {value!r}")


def _check_keys(prefix: str, table: dict, allowed) -> None:
    if not isinstance(table, dict):
        raise ConfigError(prefix, "must be a table")
    for key in table:
        if key not in allowed:
            raise ConfigError(f"{prefix}.{key}", "unknown key")


def _resources_from(key: str, table: dict) -> Resources:
    _check_keys(key, table, ("ram_gb", "cores", "storage_gb"))
    for name in ("ram_gb", "cores", "storage_gb"):
        if name not in table:
            raise ConfigError(f"{key}.{name}", "missing value")
        _check_positive(f"{key}.{name}", table[name])
    return Resources(
        float(table["ram_gb"]), float(table["cores"]), float(table["storage_gb"])
    )


def sim_config_from_mapping(table: dict, base: SimConfig = None) -> SimConfig:
    """Build a SimConfig from a `[simulation]` table merged over `base`."""
    base = base or SimConfig()
    fields = {f.name for f in dataclasses.fields(SimConfig)}
    _check_keys("simulation", table, fields)
    changes = {}
    for key, value in table.items():
        prefix = f"simulation.{key}"
        if key == "origin":
            _check_keys(prefix, value, ("lat", "lon"))
            try:
                changes[key] = GpsPoint(float(value["lat"]), float(value["lon"]))
            except (KeyError, TypeError, ValueError) as error:
                raise ConfigError(prefix, f"invalid GPS point: {error}") from None
        elif key == "iot_device_counts":
            _check_keys(prefix, value, IOT_DEVICE_KINDS)
            changes[key] = {**base.iot_device_counts, **value}
        elif key == "service_probabilities":
            _check_keys(prefix, value, PROBABILITY_ROWS)
            changes[key] = {**base.service_probabilities, **value}
        elif key == "profile_speeds":
            _check_keys(prefix, value, PROFILES)
            changes[key] = {**base.profile_speeds, **value}
        elif key == "services":
            _check_keys(prefix, value, [kind.value for kind in ServiceKind])
            services = dict(base.services)
            for kind_name, profile in value.items():
                kind = ServiceKind(kind_name)
                _check_keys(
                    f"{prefix}.{kind_name}",
                    profile,
                    ("duration_mean_s", "uplink_kbps", "downlink_kbps"),
                )
                services[kind] = dataclasses.replace(services[kind], **profile)
            changes[key] = services
        else:
            changes[key] = value
    return dataclasses.replace(base, **changes)


def mec_config_from_mapping(table: dict, base: MecConfig = None) -> MecConfig:
    """Build a MecConfig from a `[mec]` table merged over `base`."""
    base = base or MecConfig()
    fields = {f.name for f in dataclasses.fields(MecConfig)}
    _check_keys("mec", table, fields)
    changes = {}
    for key, value in table.items():
        if key.endswith("_resources"):
            changes[key] = _resources_from(f"mec.{key}", value)
        else:
            changes[key] = value
    return dataclasses.replace(base, **changes)


def parse_config(
    path: Union[Path, None] = None,
    sim_overrides: Union[dict, None] = None,
    mec_overrides: Union[dict, None] = None,
) -> tuple[SimConfig, MecConfig]:
    """Read, merge and validate a configuration file.

    Parameters
    ----------
    path : Path or None
        TOML file with optional `[simulation]` and `[mec]` tables. None (or
        an empty file) gives the full default configuration.
    sim_overrides, mec_overrides : dict or None
        Values taken from command line flags; they win over the file.

    Returns
    -------
    (SimConfig, MecConfig)
        Validated configurations.
    """
    document = {}
    if path is not None:
        path = Path(path)
        try:
            with open(path, "rb") as handle:
                document = tomllib.load(handle)
        except FileNotFoundError:
            raise ArtifactIOError(f"config file `{path}` does not exist") from None
        except tomllib.TOMLDecodeError as error:
            raise ConfigError(str(path), f"invalid TOML: {error}") from None
    _check_keys("config", document, ("simulation", "mec"))
    sim = sim_config_from_mapping(document.get("simulation", {}))
    mec = mec_config_from_mapping(document.get("mec", {}))
    if sim_overrides:
        sim = sim_config_from_mapping(
            {k: v for k, v in sim_overrides.items() if v is not None}, sim
        )
    if mec_overrides:
        mec = mec_config_from_mapping(
            {k: v for k, v in mec_overrides.items() if v is not None}, mec
        )
    return sim.validate(), mec.validate()


def config_to_dict(config) -> dict:
    """Plain-data view of a configuration for manifests and reports."""
    data = dataclasses.asdict(config)
    if isinstance(config, SimConfig):
        data["services"] = {
            str(kind): dataclasses.asdict(profile)
            for kind, profile in config.services.items()
        }
    return data

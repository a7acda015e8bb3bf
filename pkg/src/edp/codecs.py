"""File formats of the pipeline artifacts.

All writers go through `atomic_write_text`: the content is written to a
temporary file in the destination directory and moved into place with
`os.replace`, so readers never see a partial artifact.

License
-------
This file is part of edgeplanner
BSD 3-Clause License
"""
import csv
import hashlib
import io
import json
import logging
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

from edp.dense_area import DbscanParams, DenseZone
from edp.errors import ArtifactIOError, TraceFormatError
from edp.geo import GpsPoint
from edp.mec import MecEvent
from edp.tracegen import (
    DroneHome, EcSite, Enb, IotDevice, IotReading, ServiceSession, Topology,
    TraceRecord,
)

logger = logging.getLogger(__name__)

TRACE_HEADER = (
    "time", "ue_id", "service_name", "latitude", "longitude", "enodeb_id",
    "datarate_uplink", "datarate_downlink", "zone",
)
SESSIONS_HEADER = ("ue_id", "service_name", "start", "end", "uplink", "downlink")
IOT_HEADER = ("time", "device_id", "kind", "value")


def atomic_write_text(path: Union[str, Path], text: str) -> Path:
    """Write `text` to `path` through a temporary file and a rename."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        handle = tempfile.NamedTemporaryFile(
            "w", encoding="utf-8", newline="", dir=path.parent,
            prefix=f".{path.name}.", suffix=".tmp", delete=False,
        )
        with handle:
            handle.write(text)
        os.replace(handle.name, path)
    except OSError as error:
        raise ArtifactIOError(f"cannot write `{path}`: {error}") from None
    logger.debug("wrote %s", path)
    return path


def read_text(path: Union[str, Path]) -> str:
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise ArtifactIOError(f"`{path}` does not exist") from None
    except OSError as error:
        raise ArtifactIOError(f"cannot read `{path}`: {error}") from None
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as error:
        line = data.count(b"\n", 0, error.start) + 1
        raise TraceFormatError(
            path, line, f"invalid UTF-8 at byte offset {error.start}"
        ) from None


def sha256_file(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    try:
        with open(path, "rb") as handle:
            for chunk in iter(lambda: handle.read(1 << 16), b""):
                digest.update(chunk)
    except OSError as error:
        raise ArtifactIOError(f"cannot read `{path}`: {error}") from None
    return digest.hexdigest()


def dumps_json(data) -> str:
    return json.dumps(data, indent=2, allow_nan=False) + "\n"


def write_json(path: Union[str, Path], data) -> Path:
    return atomic_write_text(path, dumps_json(data))


def read_json(path: Union[str, Path]):
    text = read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as error:
        raise TraceFormatError(path, error.lineno, f"invalid JSON: {error.msg}") from None


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _csv_rows(path, header: Sequence[str]):
    """Yield (line number, row) of a CSV file after checking its header.

    Both LF and CRLF line endings are accepted.
    """
    reader = csv.reader(io.StringIO(read_text(path), newline=""))
    try:
        found = next(reader)
    except StopIteration:
        raise TraceFormatError(path, 1, "empty file, expected a header") from None
    if tuple(found) != tuple(header):
        raise TraceFormatError(
            path, 1, f"header mismatch: expected `{','.join(header)}`, "
            f"got `{','.join(found)}`",
        )
    for row in reader:
        if not row:
            continue
        if len(row) != len(header):
            raise TraceFormatError(
                path, reader.line_num,
                f"expected {len(header)} fields, got {len(row)}",
            )
        yield reader.line_num, row


def _parse(path, line: int, column: str, convert, value: str):
    try:
        return convert(value)
    except ValueError:
        raise TraceFormatError(
            path, line, f"cannot parse {column} `{value}`"
        ) from None


# -- trace ------------------------------------------------------------------


def trace_to_csv(records: Iterable[TraceRecord]) -> str:
    return csv_text(
        TRACE_HEADER,
        (
            (
                r.time_s, r.ue_id, r.service_name, f"{r.lat:.6f}", f"{r.lon:.6f}",
                r.enodeb_id, r.datarate_uplink_kbps, r.datarate_downlink_kbps,
                r.zone,
            )
            for r in records
        ),
    )


def write_trace(path, records: Iterable[TraceRecord]) -> Path:
    return atomic_write_text(path, trace_to_csv(records))


def read_trace(path) -> list[TraceRecord]:
    """Read a trace CSV; malformed rows raise TraceFormatError."""
    records = []
    for line, row in _csv_rows(path, TRACE_HEADER):
        time_s, ue_id, service, lat, lon, enb, uplink, downlink, zone = row
        try:
            lat_value = _parse(path, line, "latitude", float, lat)
            lon_value = _parse(path, line, "longitude", float, lon)
            GpsPoint(lat_value, lon_value)
        except ValueError as error:
            raise TraceFormatError(path, line, str(error)) from None
        records.append(
            TraceRecord(
                time_s=_parse(path, line, "time", int, time_s),
                ue_id=_parse(path, line, "ue_id", int, ue_id),
                service_name=service,
                lat=lat_value,
                lon=lon_value,
                enodeb_id=_parse(path, line, "enodeb_id", int, enb),
                datarate_uplink_kbps=_parse(path, line, "datarate_uplink", int, uplink),
                datarate_downlink_kbps=_parse(path, line, "datarate_downlink", int, downlink),
                zone=zone,
            )
        )
    logger.info("read %d trace records from %s", len(records), path)
    return records


# -- sessions ---------------------------------------------------------------


def write_sessions(path, sessions: Iterable[ServiceSession]) -> Path:
    return atomic_write_text(
        path,
        csv_text(
            SESSIONS_HEADER,
            (
                (s.ue_id, s.service, s.start_s, s.end_s, s.uplink_kbps, s.downlink_kbps)
                for s in sessions
            ),
        ),
    )


def read_sessions(path) -> list[ServiceSession]:
    sessions = []
    for line, row in _csv_rows(path, SESSIONS_HEADER):
        ue_id, service, start, end, uplink, downlink = row
        session = ServiceSession(
            ue_id=_parse(path, line, "ue_id", int, ue_id),
            service=service,
            start_s=_parse(path, line, "start", int, start),
            end_s=_parse(path, line, "end", int, end),
            uplink_kbps=_parse(path, line, "uplink", int, uplink),
            downlink_kbps=_parse(path, line, "downlink", int, downlink),
        )
        if session.end_s <= session.start_s:
            raise TraceFormatError(path, line, "session ends before it starts")
        sessions.append(session)
    return sessions


# -- IoT readings -----------------------------------------------------------


def write_iot_readings(path, readings: Iterable[IotReading]) -> Path:
    return atomic_write_text(
        path,
        csv_text(
            IOT_HEADER,
            ((r.time_s, r.device_id, r.kind, f"{r.value:.3f}") for r in readings),
        ),
    )


def read_iot_readings(path) -> list[IotReading]:
    return [
        IotReading(
            _parse(path, line, "time", int, row[0]),
            _parse(path, line, "device_id", int, row[1]),
            row[2],
            _parse(path, line, "value", float, row[3]),
        )
        for line, row in _csv_rows(path, IOT_HEADER)
    ]


# -- topology ---------------------------------------------------------------


def _point(point: GpsPoint) -> dict:
    return {"lat": point.lat, "lon": point.lon}


def topology_to_dict(topology: Topology) -> dict:
    return {
        "origin": _point(topology.origin),
        "range_m": topology.range_m,
        "enbs": [
            {"enb_id": e.enb_id, **_point(e.point), "ec_id": e.ec_id, "ta_id": e.ta_id}
            for e in topology.enbs
        ],
        "ecs": [
            {"ec_id": ec.ec_id, **_point(ec.point), "enb_ids": list(ec.enb_ids)}
            for ec in topology.ecs
        ],
        "tas": {str(ta): list(members) for ta, members in topology.tas.items()},
        "drone_homes": [
            {"home_id": h.home_id, **_point(h.point)} for h in topology.drone_homes
        ],
        "iot_devices": [
            {"device_id": d.device_id, "kind": d.kind, **_point(d.point)}
            for d in topology.iot_devices
        ],
    }


def topology_from_dict(data: dict, path="<topology>") -> Topology:
    try:
        return Topology(
            enbs=[
                Enb(e["enb_id"], GpsPoint(e["lat"], e["lon"]), e["ec_id"], e["ta_id"])
                for e in data["enbs"]
            ],
            ecs=[
                EcSite(ec["ec_id"], GpsPoint(ec["lat"], ec["lon"]), tuple(ec["enb_ids"]))
                for ec in data["ecs"]
            ],
            drone_homes=[
                DroneHome(h["home_id"], GpsPoint(h["lat"], h["lon"]))
                for h in data["drone_homes"]
            ],
            iot_devices=[
                IotDevice(d["device_id"], d["kind"], GpsPoint(d["lat"], d["lon"]))
                for d in data["iot_devices"]
            ],
            origin=GpsPoint(data["origin"]["lat"], data["origin"]["lon"]),
            range_m=data["range_m"],
        )
    except (KeyError, TypeError, ValueError) as error:
        raise TraceFormatError(path, 0, f"invalid topology: {error!r}") from None


def write_topology(path, topology: Topology) -> Path:
    return write_json(path, topology_to_dict(topology))


def read_topology(path) -> Topology:
    return topology_from_dict(read_json(path), path)


# -- zones ------------------------------------------------------------------


def zones_to_dict(
    zones: Sequence[DenseZone], params: DbscanParams, snapshot_s=None
) -> dict:
    return {
        "eps_km": params.eps_km,
        "min_pts": params.min_pts,
        "snapshot_s": snapshot_s,
        "zones": [zone.to_dict() for zone in zones],
    }


def write_zones(path, zones, params: DbscanParams, snapshot_s=None) -> Path:
    return write_json(path, zones_to_dict(zones, params, snapshot_s))


def read_zones(path) -> tuple[list[DenseZone], DbscanParams, Union[int, None]]:
    data = read_json(path)
    try:
        zones = [DenseZone.from_dict(zone) for zone in data["zones"]]
        params = DbscanParams(float(data["eps_km"]), int(data["min_pts"]))
    except (KeyError, TypeError, ValueError) as error:
        raise TraceFormatError(path, 0, f"invalid zones file: {error!r}") from None
    return zones, params, data.get("snapshot_s")


# -- events -----------------------------------------------------------------


def events_to_jsonl(events: Iterable[MecEvent]) -> str:
    return "".join(json.dumps(event.to_dict()) + "\n" for event in events)


def write_events(path, events: Iterable[MecEvent]) -> Path:
    return atomic_write_text(path, events_to_jsonl(events))


def read_events(path) -> list[MecEvent]:
    events = []
    for line, text in enumerate(read_text(path).splitlines(), start=1):
        if not text.strip():
            continue
        try:
            events.append(MecEvent.from_dict(json.loads(text)))
        except (json.JSONDecodeError, KeyError, ValueError) as error:
            raise TraceFormatError(path, line, f"invalid event: {error}") from None
    return events


# -- manifest ---------------------------------------------------------------


@dataclass
class RunManifest:
    """Everything needed to reproduce one command.

    Attributes
    ----------
    command : str
    version : str
    argv : list[str]
    config : dict
        Resolved configuration, including defaults.
    seeds : dict
    inputs, outputs : dict[str, str]
        sha256 of every file read and written.
    wall_time_s : float
    """

    command: str
    version: str
    argv: list
    config: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    wall_time_s: float = 0.0
    started: float = field(default_factory=time.perf_counter, repr=False)

    def add_input(self, path) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def add_output(self, path) -> None:
        self.outputs[str(path)] = sha256_file(path)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "version": self.version,
            "argv": list(self.argv),
            "config": self.config,
            "seeds": self.seeds,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "wall_time_s": self.wall_time_s,
        }

    def write(self, out_dir) -> Path:
        self.wall_time_s = round(time.perf_counter() - self.started, 6)
        path = Path(out_dir) / f"manifest_{self.command}.json"
        return write_json(path, self.to_dict())


def read_manifest(path) -> dict:
    data = read_json(path)
    for key in ("command", "argv"):
        if key not in data:
            raise TraceFormatError(path, 0, f"manifest has no `{key}`")
    return data

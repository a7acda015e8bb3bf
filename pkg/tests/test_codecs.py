import json

import pytest

from edp.codecs import (
    RunManifest, atomic_write_text, csv_text, read_events, read_iot_readings,
    read_json, read_manifest, read_sessions, read_topology, read_trace,
    read_zones, sha256_file, trace_to_csv, write_events, write_iot_readings,
    write_sessions, write_topology, write_trace, write_zones,
)
from edp.dense_area import DbscanParams, DenseZone
from edp.errors import ArtifactIOError, TraceFormatError
from edp.geo import GpsPoint
from edp.mec import EventKind, MecEvent
from edp.tracegen import (
    IotReading, ServiceSession, TraceRecord, build_topology, world_rngs,
)

HEADER = (
    "time,ue_id,service_name,latitude,longitude,enodeb_id,datarate_uplink,"
    "datarate_downlink,zone\n"
)


def test_atomic_write_creates_parents_and_leaves_no_temporaries(tmp_path):
    path = atomic_write_text(tmp_path / "a" / "b" / "out.txt", "hello\n")
    assert path.read_text() == "hello\n"
    assert [p.name for p in path.parent.iterdir()] == ["out.txt"]


def test_atomic_write_replaces_existing_content(tmp_path):
    path = tmp_path / "out.txt"
    atomic_write_text(path, "old")
    atomic_write_text(path, "new")
    assert path.read_text() == "new"


def test_unwritable_destination(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ArtifactIOError):
        atomic_write_text(blocker / "out.txt", "text")


def test_csv_uses_lf():
    assert csv_text(("a", "b"), [(1, "x,y")]) == 'a,b\n1,"x,y"\n'


class TestTrace:
    records = [
        TraceRecord(0, 0, "NONE", 60.17, 24.94, 0, 0, 0),
        TraceRecord(5, 1, "MIME", 60.1234567, 24.9, 3, 50, 48, "Z2"),
    ]

    def test_format(self):
        text = trace_to_csv(self.records)
        assert text.startswith(HEADER)
        assert text.splitlines()[2] == "5,1,MIME,60.123457,24.900000,3,50,48,Z2"

    def test_round_trip(self, tmp_path):
        path = write_trace(tmp_path / "trace.csv", self.records)
        restored = read_trace(path)
        assert restored[0] == self.records[0]
        assert restored[1].lat == 60.123457
        assert restored[1].zone == "Z2"

    def test_crlf_line_endings(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_bytes((HEADER + "0,0,NONE,60.17,24.94,0,0,0,\n").replace("\n", "\r\n").encode())
        assert len(read_trace(path)) == 1

    def test_wrong_header(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("time,ue\n0,0\n")
        with pytest.raises(TraceFormatError) as excinfo:
            read_trace(path)
        assert excinfo.value.line == 1

    @pytest.mark.parametrize(
        "row",
        [
            "0,0,NONE,60.17,24.94,0,0\n",
            "x,0,NONE,60.17,24.94,0,0,0,\n",
            "0,0,NONE,91.0,24.94,0,0,0,\n",
            "0,0,NONE,60.17,east,0,0,0,\n",
        ],
    )
    def test_malformed_rows_name_their_line(self, tmp_path, row):
        path = tmp_path / "trace.csv"
        path.write_text(HEADER + "0,0,NONE,60.17,24.94,0,0,0,\n" + row)
        with pytest.raises(TraceFormatError) as excinfo:
            read_trace(path)
        assert excinfo.value.line == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(ArtifactIOError):
            read_trace(tmp_path / "nope.csv")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("")
        with pytest.raises(TraceFormatError):
            read_trace(path)

    def test_invalid_utf8_names_line_and_offset(self, tmp_path):
        path = tmp_path / "trace.csv"
        head = (HEADER + "0,0,NONE,60.17,24.94,0,0,0,\n").encode()
        path.write_bytes(head + b"\xff\xfe,0,NONE,60.17,24.94,0,0,0,\n")
        with pytest.raises(TraceFormatError) as excinfo:
            read_trace(path)
        assert excinfo.value.line == 3
        assert f"byte offset {len(head)}" in str(excinfo.value)


def test_sessions_round_trip(tmp_path):
    sessions = [ServiceSession(3, "VideoStreaming", 10, 250, 101, 4900)]
    assert read_sessions(write_sessions(tmp_path / "s.csv", sessions)) == sessions


def test_session_must_end_after_it_starts(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("ue_id,service_name,start,end,uplink,downlink\n0,MIME,10,10,1,1\n")
    with pytest.raises(TraceFormatError):
        read_sessions(path)


def test_iot_readings_round_trip(tmp_path):
    readings = [IotReading(0, 1, "parking", 0.25), IotReading(600, 0, "weather", 11.875)]
    assert read_iot_readings(write_iot_readings(tmp_path / "iot.csv", readings)) == readings


def test_topology_round_trip(tmp_path, small_sim):
    topology = build_topology(small_sim, world_rngs(small_sim)["topology"])
    restored = read_topology(write_topology(tmp_path / "topology.json", topology))
    assert restored == topology
    assert restored.tas == topology.tas


def test_invalid_topology(tmp_path):
    path = tmp_path / "topology.json"
    path.write_text(json.dumps({"enbs": []}))
    with pytest.raises(TraceFormatError):
        read_topology(path)


def test_zones_round_trip(tmp_path):
    zones = [DenseZone(0, GpsPoint(60.1, 24.9), 30, 0.4)]
    params = DbscanParams(0.75, 12)
    restored = read_zones(write_zones(tmp_path / "zones.json", zones, params, 3600))
    assert restored == (zones, params, 3600)


def test_events_round_trip(tmp_path):
    events = [
        MecEvent(5.0, EventKind.OFFLOADING_REQUEST, 1, "MIME", 0, cause="session-start"),
        MecEvent(7.0, EventKind.MIGRATION, 1, "MIME", 0, 2, "handover"),
    ]
    path = write_events(tmp_path / "events.jsonl", events)
    assert len(path.read_text().splitlines()) == 2
    assert read_events(path) == events


def test_invalid_event_line(tmp_path):
    path = tmp_path / "events.jsonl"
    path.write_text('{"t": 1}\nnot json\n')
    with pytest.raises(TraceFormatError) as excinfo:
        read_events(path)
    assert excinfo.value.line == 1


def test_invalid_json(tmp_path):
    path = tmp_path / "x.json"
    path.write_text("{\n  nope")
    with pytest.raises(TraceFormatError):
        read_json(path)


class TestRunManifest:
    def test_records_hashes_of_inputs_and_outputs(self, tmp_path):
        source = atomic_write_text(tmp_path / "in.txt", "in")
        output = atomic_write_text(tmp_path / "out.txt", "out")
        manifest = RunManifest("simulate", "1.0.0", ["simulate", "--until", "5"])
        manifest.seeds = {"seed": 3}
        manifest.add_input(source)
        manifest.add_output(output)
        path = manifest.write(tmp_path)
        assert path.name == "manifest_simulate.json"
        data = read_manifest(path)
        assert data["inputs"] == {str(source): sha256_file(source)}
        assert data["outputs"] == {str(output): sha256_file(output)}
        assert data["seeds"] == {"seed": 3}
        assert data["wall_time_s"] >= 0.0

    def test_incomplete_manifest(self, tmp_path):
        path = tmp_path / "manifest_x.json"
        path.write_text(json.dumps({"command": "x"}))
        with pytest.raises(TraceFormatError):
            read_manifest(path)

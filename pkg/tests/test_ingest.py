import io
import json
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shipcrbm.errors import ValidationError
from shipcrbm.ingest import (
    AisRecord,
    DuplicateImoWarning,
    assemble_traces,
    flatten_traces,
    parse_ais_csv,
    parse_meta_csv,
    resolve_id,
)

HEADER = "mmsi,imo,name,timestamp,lat,lon,sog,cog,rot,heading,navstatus,typeofshipandcargo\n"


def csv_bytes(*rows: str, header: str = HEADER) -> io.BytesIO:
    return io.BytesIO((header + "".join(r + "\n" for r in rows)).encode())


def rec(sid=224000001, ts=0, sog=1.0, imo=None, lat=41.0, lon=2.0):
    return AisRecord(mmsi=sid, imo=imo, timestamp=datetime.fromtimestamp(ts, tz=timezone.utc),
                     lat=lat, lon=lon, sog=sog, navstatus=0, typeofshipandcargo=70)


def test_parse_dataset_sample_row():
    records, report = parse_ais_csv(csv_bytes(
        "224000001,9000001,,2014-04-13 23:59:32,40.91,2.47,5.50,317,127,326,0,70"))
    assert report.accepted == 1 and report.rejected == 0
    r = records[0]
    assert r.timestamp == datetime(2014, 4, 13, 23, 59, 32, tzinfo=timezone.utc)
    assert (r.lat, r.lon, r.sog, r.navstatus, r.typeofshipandcargo) == (40.91, 2.47, 5.5, 0, 70)
    assert r.imo == 9000001 and r.name is None


def test_heading_not_available_marker_and_rot_sentinel():
    records, _ = parse_ais_csv(csv_bytes(
        "224000003,,,2014-04-13 23:59:33,41.30,2.19,10.00,220,-128,511,7,30"))
    assert records[0].heading is None
    assert records[0].rot == -128


def test_lat_out_of_range_rejected():
    records, report = parse_ais_csv(csv_bytes(
        "224000001,,,2014-04-13 23:59:32,95.0,2.47,5.50,317,127,326,0,70"))
    assert records == []
    assert report.rejected == 1
    assert report.reasons == {"lat out of range": 1}


def test_header_only_file():
    records, report = parse_ais_csv(csv_bytes())
    assert records == []
    assert (report.accepted, report.rejected) == (0, 0)


@pytest.mark.parametrize("row, reason", [
    ("224000001,,,not-a-date,40.9,2.4,5.5,317,0,0,0,70", "bad timestamp"),
    ("224000001,,,2014-04-13 23:59:32,40.9,200,5.5,317,0,0,0,70", "lon out of range"),
    ("224000001,,,2014-04-13 23:59:32,40.9,2.4,-1,317,0,0,0,70", "sog out of range"),
    (",,,2014-04-13 23:59:32,40.9,2.4,5.5,317,0,0,0,70", "no identity"),
    ("224000001,,,2014-04-13 23:59:32,40.9,2.4,5.5,317,0,0,0,120", "typeofshipandcargo out of range"),
    ("224000001,,,2014-04-13 23:59:32,40.9", "malformed row"),
])
def test_reject_reasons(row, reason):
    _, report = parse_ais_csv(csv_bytes(row))
    assert report.reasons == {reason: 1}


def test_navstatus_outside_range_clamped_to_undefined():
    records, report = parse_ais_csv(csv_bytes(
        "224000001,,,2014-04-13 23:59:32,40.9,2.4,5.5,317,0,0,42,70"))
    assert report.accepted == 1 and records[0].navstatus == 15


def test_reject_report_json_shape():
    _, report = parse_ais_csv(csv_bytes(
        "224000001,,,2014-04-13 23:59:32,95,2.4,5.5,317,0,0,0,70",
        "224000001,,,2014-04-13 23:59:33,40,2.4,5.5,317,0,0,0,70"))
    assert json.loads(report.to_json()) == {
        "accepted": 1, "rejected": 1, "reasons": {"lat out of range": 1}}


def test_custom_schema_maps_headers():
    header = "MMSI,IMO,Name,Time,Latitude,Longitude,SOG,COG,ROT,Heading,Status,Type\n"
    schema = {"mmsi": "MMSI", "imo": "IMO", "name": "Name", "timestamp": "Time", "lat": "Latitude",
              "lon": "Longitude", "sog": "SOG", "cog": "COG", "rot": "ROT", "heading": "Heading",
              "navstatus": "Status", "typeofshipandcargo": "Type"}
    records, report = parse_ais_csv(
        csv_bytes("1,,,2014-04-13 00:00:00,40,2,3,10,0,0,5,70", header=header), schema)
    assert report.accepted == 1 and records[0].navstatus == 5


def test_non_utf8_stream_is_fatal():
    with pytest.raises(ValidationError):
        parse_ais_csv(io.BytesIO(HEADER.encode() + b"\xff\xfe\xfa,broken\n"))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from([
    "1,,,2014-04-13 00:00:00,40,2,3,10,0,0,5,70",
    "1,,,2014-04-13 00:00:00,99,2,3,10,0,0,5,70",
    "1,,,garbage,40,2,3,10,0,0,5,70",
    "1,,,2014-04-13 00:00:00,40",
    ",,,2014-04-13 00:00:00,40,2,3,10,0,0,5,70",
]), max_size=20))
def test_parse_is_lossless_modulo_rejects(rows):
    records, report = parse_ais_csv(csv_bytes(*rows))
    assert report.accepted + report.rejected == len(rows)
    assert len(records) == report.accepted


def test_resolve_id_prefers_imo():
    assert resolve_id(rec(imo=9000001)) == 9000001
    assert resolve_id(rec(imo=None)) == 224000001
    with pytest.raises(ValidationError):
        resolve_id(rec(sid=None, imo=None))


def test_assemble_sorts_and_dedups_last_wins():
    traces = assemble_traces([rec(ts=20), rec(ts=0), rec(ts=10, sog=1.0), rec(ts=10, sog=7.0)])
    (trace,) = traces.values()
    assert [r.epoch for r in trace.records] == [0, 10, 20]
    assert trace.records[1].sog == 7.0


def test_assemble_two_ships():
    traces = assemble_traces([rec(sid=1), rec(sid=2), rec(sid=1, ts=5)])
    assert sorted(traces) == [1, 2]
    assert len(traces[1]) == 2


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 4), st.integers(0, 50), st.floats(0, 20)), max_size=40))
def test_assemble_idempotent(rows):
    records = [rec(sid=s, ts=t, sog=v) for s, t, v in rows]
    once = assemble_traces(records)
    assert assemble_traces(flatten_traces(once)) == once
    for trace in once.values():
        epochs = [r.epoch for r in trace.records]
        assert all(a < b for a, b in zip(epochs, epochs[1:]))


def test_meta_parse_filters_and_dedups():
    src = io.BytesIO(b"imo,ship_type,main_engine_kw,design_speed\n"
                     b"9000001,7,5000,15\n9000002,7,-1,15\n9000001,3,800,10\n9000003,3,900,\n")
    with pytest.warns(DuplicateImoWarning) as caught:
        meta = parse_meta_csv(src)
    assert len(caught) == 1
    assert sorted(meta) == [9000001, 9000003]
    assert meta[9000001].main_engine_kw == 5000 and meta[9000001].ship_type == 7
    assert meta[9000003].design_speed is None

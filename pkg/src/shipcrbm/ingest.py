"""AIS and ship-characteristics CSV parsing, identity resolution and trace assembly."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import BinaryIO, Iterable, Mapping

from .errors import ValidationError

logger = logging.getLogger(__name__)

NAVSTATUS_UNDEFINED = 15

# AisRecord field -> CSV header. Defaults are the dataset's own header names.
DEFAULT_SCHEMA: dict[str, str] = {
    name: name
    for name in (
        "mmsi", "imo", "name", "timestamp", "lat", "lon", "sog", "cog", "rot",
        "heading", "navstatus", "typeofshipandcargo", "size_a", "size_b",
        "size_c", "size_d", "length", "beam", "draught",
    )
}

_MISSING = {"", "na", "nan", "null", "none"}


class DuplicateImoWarning(UserWarning):
    pass


@dataclass(frozen=True, slots=True)
class AisRecord:
    mmsi: int | None
    imo: int | None
    timestamp: datetime
    lat: float
    lon: float
    sog: float
    navstatus: int
    typeofshipandcargo: int
    cog: float | None = None
    rot: int | None = None
    heading: float | None = None
    name: str | None = None
    size_a: float | None = None
    size_b: float | None = None
    size_c: float | None = None
    size_d: float | None = None
    length: float | None = None
    beam: float | None = None
    draught: float | None = None

    @property
    def epoch(self) -> int:
        return int(self.timestamp.timestamp())


@dataclass(frozen=True, slots=True)
class ShipMeta:
    imo: int
    ship_type: int
    main_engine_kw: float
    design_speed: float | None = None


@dataclass(frozen=True)
class RawTrace:
    ship_id: int
    records: tuple[AisRecord, ...]

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class RejectReport:
    accepted: int = 0
    rejected: int = 0
    reasons: Counter = field(default_factory=Counter)

    def reject(self, reason: str) -> None:
        self.rejected += 1
        self.reasons[reason] += 1

    def merge(self, other: "RejectReport") -> "RejectReport":
        return RejectReport(
            self.accepted + other.accepted,
            self.rejected + other.rejected,
            self.reasons + other.reasons,
        )

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "rejected": self.rejected,
            "reasons": dict(sorted(self.reasons.items())),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


class _RowReject(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def _text_stream(source: BinaryIO) -> io.TextIOWrapper:
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def _is_missing(value: str | None) -> bool:
    return value is None or value.strip().lower() in _MISSING


def _opt_float(value: str | None, what: str) -> float | None:
    if _is_missing(value):
        return None
    try:
        out = float(value)
    except ValueError:
        raise _RowReject(f"bad {what}") from None
    if not math.isfinite(out):
        raise _RowReject(f"bad {what}")
    return out


def _req_float(value: str | None, what: str) -> float:
    out = _opt_float(value, what)
    if out is None:
        raise _RowReject(f"missing {what}")
    return out


def _opt_int(value: str | None, what: str) -> int | None:
    out = _opt_float(value, what)
    if out is None:
        return None
    if out != int(out):
        raise _RowReject(f"bad {what}")
    return int(out)


def parse_timestamp(value: str) -> datetime:
    """Parse ``YYYY-MM-DD HH:MM:SS`` (ISO variants accepted); naive means UTC."""
    ts = datetime.fromisoformat(value.strip())
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def _record_from_row(row: Mapping[str, str | None], schema: Mapping[str, str]) -> AisRecord:
    def get(name: str) -> str | None:
        header = schema.get(name)
        return None if header is None else row.get(header)

    raw_ts = get("timestamp")
    if _is_missing(raw_ts):
        raise _RowReject("missing timestamp")
    try:
        ts = parse_timestamp(raw_ts)
    except ValueError:
        raise _RowReject("bad timestamp") from None

    lat = _req_float(get("lat"), "lat")
    if not -90.0 <= lat <= 90.0:
        raise _RowReject("lat out of range")
    lon = _req_float(get("lon"), "lon")
    if not -180.0 <= lon <= 180.0:
        raise _RowReject("lon out of range")
    sog = _req_float(get("sog"), "sog")
    if sog < 0:
        raise _RowReject("sog out of range")

    cog = _opt_float(get("cog"), "cog")
    if cog is not None:
        if cog == 360.0:  # AIS "not available"
            cog = None
        elif not 0.0 <= cog < 360.0:
            raise _RowReject("cog out of range")
    heading = _opt_float(get("heading"), "heading")
    if heading is not None and not 0.0 <= heading < 360.0:
        heading = None  # 511 is the AIS "not available" marker

    navstatus = _opt_int(get("navstatus"), "navstatus")
    if navstatus is None or not 0 <= navstatus <= 15:
        navstatus = NAVSTATUS_UNDEFINED
    shiptype = _opt_int(get("typeofshipandcargo"), "typeofshipandcargo")
    if shiptype is None:
        raise _RowReject("missing typeofshipandcargo")
    if not 0 <= shiptype <= 99:
        raise _RowReject("typeofshipandcargo out of range")

    mmsi = _opt_int(get("mmsi"), "mmsi")
    imo = _opt_int(get("imo"), "imo")
    if mmsi is None and imo is None:
        raise _RowReject("no identity")

    name = get("name")
    return AisRecord(
        mmsi=mmsi,
        imo=imo,
        timestamp=ts,
        lat=lat,
        lon=lon,
        sog=sog,
        navstatus=navstatus,
        typeofshipandcargo=shiptype,
        cog=cog,
        rot=_opt_int(get("rot"), "rot"),
        heading=heading,
        name=None if _is_missing(name) else name.strip(),
        size_a=_opt_float(get("size_a"), "size_a"),
        size_b=_opt_float(get("size_b"), "size_b"),
        size_c=_opt_float(get("size_c"), "size_c"),
        size_d=_opt_float(get("size_d"), "size_d"),
        length=_opt_float(get("length"), "length"),
        beam=_opt_float(get("beam"), "beam"),
        draught=_opt_float(get("draught"), "draught"),
    )


def parse_ais_csv(
    source: BinaryIO, schema: Mapping[str, str] | None = None
) -> tuple[list[AisRecord], RejectReport]:
    """Parse an AIS CSV export.

    Malformed rows are counted in the report and skipped; only an unreadable
    stream (bad encoding, no header) raises.
    """
    schema = {**DEFAULT_SCHEMA, **(schema or {})}
    report = RejectReport()
    records: list[AisRecord] = []
    try:
        reader = csv.DictReader(_text_stream(source))
        if reader.fieldnames is None:
            raise ValidationError("AIS CSV has no header row")
        for row in reader:
            if None in row or any(v is None for v in row.values()):
                report.reject("malformed row")
                continue
            try:
                records.append(_record_from_row(row, schema))
            except _RowReject as exc:
                report.reject(exc.reason)
            else:
                report.accepted += 1
    except UnicodeDecodeError as exc:
        raise ValidationError(f"AIS CSV is not valid UTF-8: {exc}") from exc
    except csv.Error as exc:
        raise ValidationError(f"unreadable AIS CSV: {exc}") from exc
    return records, report


def resolve_id(record: AisRecord) -> int:
    """IMO number when known, MMSI otherwise."""
    if record.imo is not None:
        return record.imo
    if record.mmsi is not None:
        return record.mmsi
    raise ValidationError("record has neither IMO nor MMSI")


def assemble_traces(records: Iterable[AisRecord]) -> dict[int, RawTrace]:
    """Group records per ship, sort by time, keep the last record per timestamp."""
    by_ship: dict[int, dict[datetime, AisRecord]] = {}
    for rec in records:
        # later duplicates overwrite earlier ones (retransmissions supersede)
        by_ship.setdefault(resolve_id(rec), {})[rec.timestamp] = rec
    return {
        sid: RawTrace(sid, tuple(recs[t] for t in sorted(recs)))
        for sid, recs in sorted(by_ship.items())
    }


def flatten_traces(traces: Mapping[int, RawTrace]) -> list[AisRecord]:
    return [rec for sid in sorted(traces) for rec in traces[sid].records]


def parse_meta_csv(source: BinaryIO) -> dict[int, ShipMeta]:
    """Parse the ship-characteristics table (``imo,ship_type,main_engine_kw,design_speed``).

    Rows with non-positive power or speed are dropped. A repeated IMO keeps
    the first row and emits :class:`DuplicateImoWarning`.
    """
    out: dict[int, ShipMeta] = {}
    try:
        reader = csv.DictReader(_text_stream(source))
        if reader.fieldnames is None:
            raise ValidationError("meta CSV has no header row")
        missing = {"imo", "ship_type", "main_engine_kw"} - set(reader.fieldnames)
        if missing:
            raise ValidationError(f"meta CSV lacks columns: {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                imo = _opt_int(row.get("imo"), "imo")
                ship_type = _opt_int(row.get("ship_type"), "ship_type")
                power = _opt_float(row.get("main_engine_kw"), "main_engine_kw")
                speed = _opt_float(row.get("design_speed"), "design_speed")
            except _RowReject as exc:
                logger.info("meta line %d rejected: %s", lineno, exc.reason)
                continue
            if imo is None or ship_type is None or power is None or power <= 0:
                logger.info("meta line %d rejected: invalid imo/type/power", lineno)
                continue
            if speed is not None and speed <= 0:
                logger.info("meta line %d rejected: non-positive design speed", lineno)
                continue
            if imo in out:
                warnings.warn(f"duplicate IMO {imo} in meta table; keeping first", DuplicateImoWarning)
                continue
            out[imo] = ShipMeta(imo, ship_type, power, speed)
    except UnicodeDecodeError as exc:
        raise ValidationError(f"meta CSV is not valid UTF-8: {exc}") from exc
    return out


def write_meta_csv(meta: Mapping[int, ShipMeta], fh: io.TextIOBase) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["imo", "ship_type", "main_engine_kw", "design_speed"])
    for imo in sorted(meta):
        m = meta[imo]
        speed = "" if m.design_speed is None else f"{m.design_speed:.6f}"
        w.writerow([m.imo, m.ship_type, f"{m.main_engine_kw:.6f}", speed])

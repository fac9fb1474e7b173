"""Time regularization of raw traces and derived movement features."""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import IntEnum
from pathlib import Path
from typing import Iterator, TextIO

import numpy as np

from .errors import ValidationError
from .ingest import RawTrace

logger = logging.getLogger(__name__)

MAX_GAP_SECONDS = 72 * 3600
STILL_EPS_DEG = 1e-7
COAST_MAX_DEPTH = 50.0
FISHING_MAX_DEPTH = 1000.0

TIME_FORMAT = "%Y-%m-%d %H:%M:%S"
TRACE_COLUMNS = [
    "ship_id", "timestamp", "lat", "lon", "dlat", "dlon", "sog",
    "gps_rotation", "bathy_zone", "navstatus", "ship_type",
]


class BathyZone(IntEnum):
    COAST = 0
    FISHING = 1
    HIGH_SEA = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, text: str) -> "BathyZone":
        return cls[text.strip().upper()]


def to_epoch(ts: datetime) -> int:
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return int(ts.timestamp())


def from_epoch(sec: int) -> datetime:
    return datetime.fromtimestamp(int(sec), tz=timezone.utc)


def format_epoch(sec: int) -> str:
    return from_epoch(sec).strftime(TIME_FORMAT)


def grid_epochs(start: int, end: int, step: int) -> np.ndarray:
    if step <= 0:
        raise ValidationError("step must be positive")
    first = -(-start // step) * step  # ceil to the epoch-aligned grid
    if first > end:
        return np.empty(0, dtype=np.int64)
    return np.arange(first, end + 1, step, dtype=np.int64)


def make_timegrid(t_start: datetime, t_end: datetime, step: int) -> list[datetime]:
    """Epoch-aligned instants ``t_start <= t <= t_end`` spaced ``step`` seconds apart."""
    return [from_epoch(s) for s in grid_epochs(to_epoch(t_start), to_epoch(t_end), step)]


@dataclass
class ShipTrace:
    """Regularized per-ship series stored column-wise.

    ``segment_starts`` lists the sample index where each contiguous run begins;
    runs are separated wherever the raw data had a gap of ``MAX_GAP_SECONDS`` or more.
    Movement columns stay ``None`` until :func:`derive_features` fills them.
    """

    ship_id: int
    step_seconds: int
    t: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    sog: np.ndarray
    navstatus: np.ndarray
    ship_type: np.ndarray
    segment_starts: tuple[int, ...] = ()
    dlat: np.ndarray | None = None
    dlon: np.ndarray | None = None
    gps_rotation: np.ndarray | None = None
    bathy_zone: np.ndarray | None = None
    flags: Counter = field(default_factory=Counter)

    def __len__(self) -> int:
        return len(self.t)

    def segments(self) -> Iterator[slice]:
        bounds = list(self.segment_starts) + [len(self)]
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            yield slice(lo, hi)


def _split_raw(epochs: np.ndarray, max_gap: int) -> list[slice]:
    cuts = np.flatnonzero(np.diff(epochs) >= max_gap) + 1
    bounds = [0, *cuts.tolist(), len(epochs)]
    return [slice(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]


def interpolate_trace(raw: RawTrace, step: int, max_gap: int = MAX_GAP_SECONDS) -> ShipTrace:
    """Linearly interpolate lat/lon/sog onto the epoch grid.

    Raw neighbours ``max_gap`` seconds or more apart are never bridged; they
    start a new segment. Categorical codes are carried forward.
    """
    recs = raw.records
    empty = np.empty(0)
    if len(recs) < 2:
        logger.warning("ship %s has %d record(s); nothing to interpolate", raw.ship_id, len(recs))
        return ShipTrace(raw.ship_id, step, np.empty(0, dtype=np.int64), empty, empty, empty,
                         np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), (0,))

    epochs = np.array([r.epoch for r in recs], dtype=np.int64)
    if np.any(np.diff(epochs) <= 0):
        raise ValidationError(f"ship {raw.ship_id}: raw timestamps not strictly increasing")
    lat = np.array([r.lat for r in recs])
    lon = np.array([r.lon for r in recs])
    sog = np.array([r.sog for r in recs])
    nav = np.array([r.navstatus for r in recs], dtype=np.int64)
    stype = np.array([r.typeofshipandcargo // 10 for r in recs], dtype=np.int64)

    parts: dict[str, list[np.ndarray]] = {k: [] for k in ("t", "lat", "lon", "sog", "nav", "type")}
    starts: list[int] = []
    n = 0
    for seg in _split_raw(epochs, max_gap):
        if seg.stop - seg.start < 2:  # a lone report has no pair to interpolate between
            continue
        te = epochs[seg]
        grid = grid_epochs(int(te[0]), int(te[-1]), step)
        if grid.size == 0:
            continue
        last = np.searchsorted(te, grid, side="right") - 1
        starts.append(n)
        n += grid.size
        parts["t"].append(grid)
        parts["lat"].append(np.interp(grid, te, lat[seg]))
        parts["lon"].append(np.interp(grid, te, lon[seg]))
        parts["sog"].append(np.maximum(np.interp(grid, te, sog[seg]), 0.0))
        parts["nav"].append(nav[seg][last])
        parts["type"].append(stype[seg][last])

    def cat(key: str, dtype=float) -> np.ndarray:
        return np.concatenate(parts[key]) if parts[key] else np.empty(0, dtype=dtype)

    return ShipTrace(
        ship_id=raw.ship_id,
        step_seconds=step,
        t=cat("t", np.int64),
        lat=cat("lat"),
        lon=cat("lon"),
        sog=cat("sog"),
        navstatus=cat("nav", np.int64),
        ship_type=cat("type", np.int64),
        segment_starts=tuple(starts) if starts else (0,),
    )


def _bearing_arrays(lat1, lon1, lat2, lon2) -> np.ndarray:
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dl = np.radians(np.asarray(lon2) - np.asarray(lon1))
    y = np.sin(dl) * np.cos(p2)
    x = np.cos(p1) * np.sin(p2) - np.sin(p1) * np.cos(p2) * np.cos(dl)
    return np.mod(np.degrees(np.arctan2(y, x)), 360.0)


def bearing(p1: tuple[float, float], p2: tuple[float, float]) -> float:
    """Great-circle initial bearing from ``p1`` to ``p2`` as (lat, lon); 0 = north, 90 = east."""
    if abs(p1[0] - p2[0]) < STILL_EPS_DEG and abs(p1[1] - p2[1]) < STILL_EPS_DEG:
        raise ValidationError("degenerate pair: bearing undefined for coincident points")
    out = float(_bearing_arrays(p1[0], p1[1], p2[0], p2[1]))
    return 0.0 if out >= 360.0 else out


def relative_rotation(bearing_prev: float, bearing_cur: float) -> float:
    """Signed turn from ``bearing_prev`` to ``bearing_cur``, in (-180, 180]."""
    d = math.fmod(bearing_cur - bearing_prev, 360.0)
    if d <= -180.0:
        d += 360.0
    elif d > 180.0:
        d -= 360.0
    return d


def bathy_zone(depth_m: float) -> BathyZone:
    if depth_m < COAST_MAX_DEPTH:
        return BathyZone.COAST
    if depth_m <= FISHING_MAX_DEPTH:
        return BathyZone.FISHING
    return BathyZone.HIGH_SEA


def zones_for_depths(depths: np.ndarray) -> np.ndarray:
    depths = np.asarray(depths, dtype=float)
    out = np.full(depths.shape, BathyZone.HIGH_SEA, dtype=np.int64)
    out[depths <= FISHING_MAX_DEPTH] = BathyZone.FISHING
    out[depths < COAST_MAX_DEPTH] = BathyZone.COAST
    return out


@dataclass(frozen=True)
class BathyGrid:
    """Regular depth raster, row 0 northernmost; depth positive below sea level."""

    depths: np.ndarray
    xllcorner: float
    yllcorner: float
    cellsize: float

    @property
    def nrows(self) -> int:
        return self.depths.shape[0]

    @property
    def ncols(self) -> int:
        return self.depths.shape[1]

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        """(lon_min, lat_min, lon_max, lat_max)"""
        return (self.xllcorner, self.yllcorner,
                self.xllcorner + self.ncols * self.cellsize,
                self.yllcorner + self.nrows * self.cellsize)

    def lookup(self, lat, lon) -> np.ndarray:
        """Nearest-cell depth; NaN outside the bounding box."""
        lat = np.atleast_1d(np.asarray(lat, dtype=float))
        lon = np.atleast_1d(np.asarray(lon, dtype=float))
        x0, y0, x1, y1 = self.bbox
        inside = (lon >= x0) & (lon <= x1) & (lat >= y0) & (lat <= y1)
        col = np.clip(np.floor((lon - x0) / self.cellsize).astype(np.int64), 0, self.ncols - 1)
        row_up = np.clip(np.floor((lat - y0) / self.cellsize).astype(np.int64), 0, self.nrows - 1)
        row = self.nrows - 1 - row_up
        out = np.full(lat.shape, np.nan)
        out[inside] = self.depths[row[inside], col[inside]]
        return out

    @classmethod
    def read(cls, path: str | Path) -> "BathyGrid":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh)

    @classmethod
    def parse(cls, fh: TextIO) -> "BathyGrid":
        header: dict[str, float] = {}
        rows: list[list[float]] = []
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0][0].isalpha():
                header[parts[0].lower()] = float(parts[1])
            else:
                rows.append([float(p) for p in parts])
        try:
            ncols, nrows, cell = int(header["ncols"]), int(header["nrows"]), header["cellsize"]
        except KeyError as exc:
            raise ValidationError(f"ESRI grid header lacks {exc}") from None
        if "xllcorner" in header:
            x0, y0 = header["xllcorner"], header["yllcorner"]
        else:
            x0, y0 = header["xllcenter"] - cell / 2, header["yllcenter"] - cell / 2
        data = np.array(rows, dtype=float)
        if data.shape != (nrows, ncols):
            raise ValidationError(f"ESRI grid body is {data.shape}, header says {(nrows, ncols)}")
        nodata = header.get("nodata_value")
        if nodata is not None:
            data[data == nodata] = -1.0  # no sounding: treat as land
        if not np.all(np.isfinite(data)):
            raise ValidationError("ESRI grid contains non-finite depths")
        return cls(data, x0, y0, cell)

    def write(self, fh: TextIO, precision: int = 2) -> None:
        fh.write(f"ncols {self.ncols}\nnrows {self.nrows}\n")
        fh.write(f"xllcorner {self.xllcorner:.6f}\nyllcorner {self.yllcorner:.6f}\n")
        fh.write(f"cellsize {self.cellsize:.6f}\nNODATA_value -9999\n")
        for row in self.depths:
            fh.write(" ".join(f"{v:.{precision}f}" for v in row) + "\n")


def derive_features(trace: ShipTrace, grid: BathyGrid) -> ShipTrace:
    """Fill dlat/dlon, GPS-derived relative rotation and bathymetry zone."""
    n = len(trace)
    dlat, dlon, rot = np.zeros(n), np.zeros(n), np.zeros(n)
    for seg in trace.segments():
        lat, lon = trace.lat[seg], trace.lon[seg]
        if lat.size < 2:
            continue
        dlat[seg][1:] = np.diff(lat)
        dlon[seg][1:] = np.diff(lon)
        raw_b = _bearing_arrays(lat[:-1], lon[:-1], lat[1:], lon[1:])
        still = np.maximum(np.abs(dlat[seg][1:]), np.abs(dlon[seg][1:])) < STILL_EPS_DEG
        seg_rot = rot[seg]
        prev: float | None = None
        for i, (b, s) in enumerate(zip(raw_b, still), start=1):
            if s:
                continue  # no displacement: heading kept, rotation 0
            if prev is not None:
                seg_rot[i] = relative_rotation(prev, float(b))
            prev = float(b)

    flags = Counter(trace.flags)
    depths = grid.lookup(trace.lat, trace.lon)
    outside = np.isnan(depths)
    land = depths < 0
    zones = zones_for_depths(np.where(outside, np.inf, depths))
    flags["outside grid"] += int(outside.sum())
    flags["land"] += int(land.sum())
    return replace(trace, dlat=dlat, dlon=dlon, gps_rotation=rot, bathy_zone=zones, flags=flags)


def write_trace_csv(trace: ShipTrace, fh: TextIO) -> None:
    if trace.bathy_zone is None:
        raise ValidationError("derive_features must run before writing a trace")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for i in range(len(trace)):
        w.writerow([
            trace.ship_id,
            format_epoch(trace.t[i]),
            f"{trace.lat[i]:.6f}",
            f"{trace.lon[i]:.6f}",
            f"{trace.dlat[i]:.6f}",
            f"{trace.dlon[i]:.6f}",
            f"{trace.sog[i]:.6f}",
            f"{trace.gps_rotation[i]:.6f}",
            BathyZone(trace.bathy_zone[i]).label,
            int(trace.navstatus[i]),
            int(trace.ship_type[i]),
        ])


def read_trace_csv(fh: TextIO, step_seconds: int) -> ShipTrace:
    """Inverse of :func:`write_trace_csv`; segments re-derived from timestamp gaps."""
    rows = list(csv.DictReader(fh))
    if not rows:
        raise ValidationError("empty trace file")
    t = np.array([to_epoch(datetime.strptime(r["timestamp"], TIME_FORMAT)) for r in rows], dtype=np.int64)
    breaks = np.flatnonzero(np.diff(t) != step_seconds) + 1

    def col(name: str) -> np.ndarray:
        return np.array([float(r[name]) for r in rows])

    return ShipTrace(
        ship_id=int(rows[0]["ship_id"]),
        step_seconds=step_seconds,
        t=t,
        lat=col("lat"),
        lon=col("lon"),
        sog=col("sog"),
        navstatus=np.array([int(r["navstatus"]) for r in rows], dtype=np.int64),
        ship_type=np.array([int(r["ship_type"]) for r in rows], dtype=np.int64),
        segment_starts=(0, *breaks.tolist()),
        dlat=col("dlat"),
        dlon=col("dlon"),
        gps_rotation=col("gps_rotation"),
        bathy_zone=np.array([BathyZone.from_label(r["bathy_zone"]) for r in rows], dtype=np.int64),
    )

"""Synthetic AIS fleet with ground-truth behaviour for desk-scale validation.

Each ship follows an archetype-specific plan of moored, maneuver, transit and
trawl phases. Installed main-engine power is a noisy cubic function of the
ship's cruise speed. Design speed depends on the archetype only and faster ships
spend less time moored, so power is both recoverable from behaviour and
positively correlated with emitted energy.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields
from datetime import datetime
from pathlib import Path
from typing import Iterator, TextIO

import numpy as np

from .errors import ValidationError
from .ingest import ShipMeta, write_meta_csv
from .regularize import TIME_FORMAT, BathyGrid, format_epoch, to_epoch

ARCHETYPES = ("trawler", "ferry", "cargo", "moored")
TYPE_CODES = {"trawler": 30, "ferry": 60, "cargo": 70, "moored": 80}
MODES = ("moored", "maneuver", "transit", "trawl")

# (reference power kW, reference cruise speed kn, cruise speed range kn)
POWER_LAW = {
    "trawler": (1500.0, 9.5, (8.0, 11.0)),
    "ferry": (8000.0, 18.0, (14.0, 22.0)),
    "cargo": (6000.0, 14.0, (10.0, 18.0)),
    "moored": (3000.0, None, None),
}

DESIGN_MARGIN = 1.2  # design speed over the archetype's reference cruise speed

PORT = (41.35, 2.05)
HARBOUR_MOUTH = (41.35, 2.12)
DEPTH_PROFILE = ((2.0, 0.0), (2.2, 50.0), (2.7, 1000.0), (4.0, 2500.0))  # (lon, depth m)
GRID_ORIGIN = (40.0, 1.8)  # lat, lon of lower-left corner
GRID_SHAPE = (250, 220)
GRID_CELL = 0.01
T_START = 1397347200  # 2014-04-13 00:00:00 UTC

AIS_HEADER = ["mmsi", "imo", "name", "timestamp", "lat", "lon", "sog", "cog", "rot", "heading",
              "navstatus", "typeofshipandcargo"]


@dataclass(frozen=True)
class SynthFleetSpec:
    trawler: int = 60
    ferry: int = 40
    cargo: int = 70
    moored: int = 30
    hours: float = 8.0
    report_interval: tuple[float, float] = (20.0, 90.0)  # seconds between raw reports
    sog_noise: float = 0.2  # kn, while under way
    position_noise: float = 2e-5  # deg, while under way
    power_noise: float = 0.1  # lognormal sigma on installed power
    undefined_status_rate: float = 0.1  # share of ships that never set navstatus
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.trawler, self.ferry, self.cargo, self.moored) < 0:
            raise ValidationError("ship counts must be non-negative")
        if self.hours <= 0 or not 0 < self.report_interval[0] <= self.report_interval[1]:
            raise ValidationError("need positive duration and a valid report interval")

    @property
    def counts(self) -> dict[str, int]:
        return {a: getattr(self, a) for a in ARCHETYPES}

    @classmethod
    def from_mapping(cls, values: dict) -> "SynthFleetSpec":
        known = {f.name: f.type for f in fields(cls)}
        out = {}
        for key, raw in values.items():
            if key not in known:
                raise ValidationError(f"unknown synth option {key!r}")
            if key == "report_interval":
                lo, hi = (float(x) for x in str(raw).split(","))
                out[key] = (lo, hi)
            elif key in ("trawler", "ferry", "cargo", "moored", "seed"):
                out[key] = int(raw)
            else:
                out[key] = float(raw)
        return cls(**out)


@dataclass
class ShipTruth:
    ship_id: int
    archetype: str
    cruise_speed: float
    design_speed: float
    main_engine_kw: float


@dataclass
class SynthFleet:
    ais_rows: list[list[str]] = field(default_factory=list)
    meta: dict[int, ShipMeta] = field(default_factory=dict)
    truth_rows: list[tuple[int, int, str]] = field(default_factory=list)  # (ship, epoch, mode)
    ships: list[ShipTruth] = field(default_factory=list)


def depth_at_lon(lon) -> np.ndarray:
    xs, ds = zip(*DEPTH_PROFILE)
    return np.interp(lon, xs, ds)


def synth_bathymetry() -> BathyGrid:
    """Depth grows eastward from a north-south coastline; land west of it has no sounding."""
    nrows, ncols = GRID_SHAPE
    lon = GRID_ORIGIN[1] + (np.arange(ncols) + 0.5) * GRID_CELL
    row = np.where(lon < DEPTH_PROFILE[0][0], -9999.0, np.round(depth_at_lon(lon), 2))
    return BathyGrid(np.tile(row, (nrows, 1)), GRID_ORIGIN[1], GRID_ORIGIN[0], GRID_CELL)


class _Track:
    """Advances one ship through its phases and emits raw reports."""

    def __init__(self, rng: np.random.Generator, spec: SynthFleetSpec, start: int, pos: tuple[float, float]):
        self.rng = rng
        self.spec = spec
        self.t = float(start)
        self.t_end = start + spec.hours * 3600.0
        self.lat, self.lon = pos
        self.heading = 0.0
        self.reports: list[tuple[int, float, float, float, float | None, str]] = []

    @property
    def done(self) -> bool:
        return self.t >= self.t_end

    def _report(self, speed: float, mode: str) -> None:
        rng, spec = self.rng, self.spec
        if speed > 0:
            sog = max(0.0, speed + rng.normal(0, spec.sog_noise))
            lat = self.lat + rng.normal(0, spec.position_noise)
            lon = self.lon + rng.normal(0, spec.position_noise)
            cog = self.heading % 360.0
        else:
            sog, lat, lon, cog = abs(rng.normal(0, 0.03)), self.lat, self.lon, None
        self.reports.append((int(self.t), lat, lon, sog, cog, mode))

    def _advance(self, speed: float, heading: float, dt: float) -> None:
        dist = speed * dt / 3600.0 / 60.0  # degrees of arc
        h = math.radians(heading)
        self.lat += dist * math.cos(h)
        self.lon += dist * math.sin(h) / math.cos(math.radians(self.lat))
        self.heading = heading

    def _dt(self) -> float:
        return float(self.rng.uniform(*self.spec.report_interval))

    def moor(self, seconds: float) -> None:
        until = self.t + seconds
        while not self.done and self.t < until:
            self._report(0.0, "moored")
            self.t += self._dt()

    def goto(self, target: tuple[float, float], speed: float, mode: str) -> None:
        while not self.done:
            dy = target[0] - self.lat
            dx = (target[1] - self.lon) * math.cos(math.radians(self.lat))
            remaining = math.hypot(dx, dy)
            heading = math.degrees(math.atan2(dx, dy)) % 360.0
            self.heading = heading
            self._report(speed, mode)
            dt = self._dt()
            step = speed * dt / 3600.0 / 60.0
            self.t += dt
            if step >= remaining:
                self.lat, self.lon = target
                return
            self._advance(speed, heading, dt)

    def trawl(self, seconds: float, speed: float) -> None:
        """North-south zigzag legs of 15 to 25 minutes, reversing every third leg."""
        until = self.t + seconds
        base, side, leg = float(self.rng.choice([0.0, 180.0])), 1.0, 0
        while not self.done and self.t < until:
            leg_end = self.t + self.rng.uniform(900, 1500)
            heading = (base + side * 30.0) % 360.0
            while not self.done and self.t < min(leg_end, until):
                self.heading = heading
                self._report(speed, "trawl")
                dt = self._dt()
                self._advance(speed, heading, dt)
                self.t += dt
            side, leg = -side, leg + 1
            if leg % 3 == 0:
                base = (base + 180.0) % 360.0


def _berth(rng: np.random.Generator) -> tuple[float, float]:
    return (PORT[0] + rng.uniform(-0.03, 0.03), PORT[1] + rng.uniform(-0.02, 0.02))


def _maneuver_speed(rng: np.random.Generator) -> float:
    return float(rng.uniform(4.0, 6.0))


def _run_trawler(tr: _Track, rng: np.random.Generator, v_c: float) -> None:
    v_trawl = 2.5 + 0.3 * (v_c - 8.0) + rng.normal(0, 0.1)
    berth = _berth(rng)
    tr.lat, tr.lon = berth
    tr.moor(rng.uniform(20, 40) * 60)
    tr.goto(HARBOUR_MOUTH, _maneuver_speed(rng), "maneuver")
    tr.goto((rng.uniform(41.2, 41.6), rng.uniform(2.3, 2.6)), v_c, "transit")
    tr.trawl(rng.uniform(3.0, 4.0) * 3600, v_trawl)
    tr.goto(HARBOUR_MOUTH, v_c, "transit")
    tr.goto(berth, _maneuver_speed(rng), "maneuver")
    tr.moor(math.inf)


def _run_ferry(tr: _Track, rng: np.random.Generator, v_c: float) -> None:
    home = _berth(rng)
    away = (rng.uniform(40.9, 41.8), rng.uniform(3.2, 3.6))
    dwell = (45.0 - 30.0 * (v_c - 14.0) / 8.0) * 60
    tr.lat, tr.lon = home
    while not tr.done:
        tr.moor(dwell * rng.uniform(0.85, 1.15))
        tr.goto(HARBOUR_MOUTH, _maneuver_speed(rng), "maneuver")
        tr.goto(away, v_c, "transit")
        tr.moor(dwell * rng.uniform(0.85, 1.15))
        tr.goto(HARBOUR_MOUTH, v_c, "transit")
        tr.goto(home, _maneuver_speed(rng), "maneuver")


def _run_cargo(tr: _Track, rng: np.random.Generator, v_c: float) -> None:
    moored_share = 0.45 - 0.35 * (v_c - 10.0) / 8.0 + rng.uniform(-0.05, 0.05)
    tr.lat, tr.lon = _berth(rng)
    tr.moor(moored_share * tr.spec.hours * 3600)
    tr.goto(HARBOUR_MOUTH, _maneuver_speed(rng), "maneuver")
    while not tr.done:
        tr.goto((rng.uniform(40.3, 42.3), rng.uniform(2.9, 3.9)), v_c, "transit")


def _run_moored(tr: _Track, rng: np.random.Generator, v_c: float) -> None:
    tr.lat, tr.lon = _berth(rng)
    tr.moor(math.inf)


_RUNNERS = {"trawler": _run_trawler, "ferry": _run_ferry, "cargo": _run_cargo, "moored": _run_moored}
_STATUS = {"moored": 5, "maneuver": 0, "transit": 0, "trawl": 7}


def _archetype_sequence(spec: SynthFleetSpec) -> Iterator[str]:
    for arch in ARCHETYPES:
        yield from [arch] * spec.counts[arch]


def generate_fleet(spec: SynthFleetSpec) -> SynthFleet:
    """Deterministic fleet for a given spec; ship ``i`` draws from its own seeded stream."""
    fleet = SynthFleet()
    for i, arch in enumerate(_archetype_sequence(spec)):
        rng = np.random.default_rng([spec.seed, i])
        imo, mmsi = 9_000_000 + i, 224_000_000 + i
        ref_kw, ref_v, v_range = POWER_LAW[arch]
        if v_range is None:
            v_c = 0.0
            power = ref_kw * math.exp(rng.normal(0, spec.power_noise))
            design = float(rng.uniform(12.0, 15.0))
        else:
            v_c = float(rng.uniform(*v_range))
            power = ref_kw * (v_c / ref_v) ** 3 * math.exp(rng.normal(0, spec.power_noise))
            # design speed is set by hull type, so stronger engines run nearer their design point
            design = DESIGN_MARGIN * ref_v * float(rng.uniform(0.97, 1.03))
        undefined = rng.random() < spec.undefined_status_rate
        tr = _Track(rng, spec, T_START + int(rng.integers(0, 1800)), PORT)
        _RUNNERS[arch](tr, rng, v_c)

        type_code = TYPE_CODES[arch]
        for t, lat, lon, sog, cog, mode in tr.reports:
            if undefined:
                nav = 15
            elif arch == "trawler":
                nav = 7
            else:
                nav = _STATUS[mode]
            fleet.ais_rows.append([
                str(mmsi), str(imo), "", format_epoch(t), f"{lat:.6f}", f"{lon:.6f}", f"{sog:.1f}",
                "360.0" if cog is None else f"{cog:.1f}", "0" if cog is not None else "-128",
                "511" if cog is None else str(int(cog) % 360), str(nav), str(type_code),
            ])
            fleet.truth_rows.append((imo, t, mode))
        fleet.meta[imo] = ShipMeta(imo, type_code // 10, round(power, 3), round(design, 3))
        fleet.ships.append(ShipTruth(imo, arch, round(v_c, 6), round(design, 3), round(power, 3)))
    order = sorted(range(len(fleet.ais_rows)), key=lambda k: (fleet.ais_rows[k][3], fleet.ais_rows[k][0]))
    fleet.ais_rows = [fleet.ais_rows[k] for k in order]
    return fleet


def write_ais_csv(rows: list[list[str]], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(AIS_HEADER)
    w.writerows(rows)


def write_truth_csv(rows: list[tuple[int, int, str]], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["ship_id", "timestamp", "mode"])
    for sid, t, mode in sorted(rows):
        w.writerow([sid, format_epoch(t), mode])


def write_ships_csv(ships: list[ShipTruth], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["ship_id", "archetype", "cruise_speed", "design_speed", "main_engine_kw"])
    for s in ships:
        w.writerow([s.ship_id, s.archetype, f"{s.cruise_speed:.6f}", f"{s.design_speed:.6f}",
                    f"{s.main_engine_kw:.6f}"])


def write_fleet(fleet: SynthFleet, out_dir: str | Path) -> dict[str, Path]:
    """Write ais.csv, meta.csv, bathy.asc, truth.csv and ships.csv into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / name for name in ("ais.csv", "meta.csv", "bathy.asc", "truth.csv", "ships.csv")}
    with open(paths["ais.csv"], "w", newline="") as fh:
        write_ais_csv(fleet.ais_rows, fh)
    with open(paths["meta.csv"], "w", newline="") as fh:
        write_meta_csv(fleet.meta, fh)
    with open(paths["bathy.asc"], "w") as fh:
        synth_bathymetry().write(fh)
    with open(paths["truth.csv"], "w", newline="") as fh:
        write_truth_csv(fleet.truth_rows, fh)
    with open(paths["ships.csv"], "w", newline="") as fh:
        write_ships_csv(fleet.ships, fh)
    return paths


def read_truth_csv(fh: TextIO) -> dict[int, tuple[np.ndarray, list[str]]]:
    """Per ship: raw report epochs and their ground-truth modes."""
    by_ship: dict[int, tuple[list[int], list[str]]] = {}
    for row in csv.DictReader(fh):
        ts, modes = by_ship.setdefault(int(row["ship_id"]), ([], []))
        ts.append(to_epoch(datetime.strptime(row["timestamp"], TIME_FORMAT)))
        modes.append(row["mode"])
    return {sid: (np.array(ts, dtype=np.int64), modes) for sid, (ts, modes) in by_ship.items()}


def modes_at(report_epochs: np.ndarray, report_modes: list[str], grid_t: np.ndarray) -> list[str]:
    """Ground-truth mode of each grid instant: the mode of the latest report at or before it."""
    idx = np.searchsorted(report_epochs, grid_t, side="right") - 1
    return [report_modes[max(i, 0)] for i in idx]

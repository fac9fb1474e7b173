"""Speed-based engine power and exhaust emission estimation for ship traces.

Main engine load follows the cubic propeller law against design speed; the
auxiliary engine draws a fixed power per operational mode and ship type.
Grams are held internally as integer micrograms so that totals are exact and
independent of summation order.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, TextIO

import numpy as np

from .errors import ValidationError
from .ingest import ShipMeta
from .regularize import ShipTrace, format_epoch

MAIN, AUX = "main", "aux"
POLLUTANTS = ("SOx", "NOx", "CO2", "PM")
UG_PER_GRAM = 1_000_000
UG_PER_TONNE = 10**12


class OperationalMode(Enum):
    HOTELING = "hoteling"
    MANEUVERING = "maneuvering"
    CRUISING = "cruising"


@dataclass(frozen=True)
class PowerParams:
    v_safety: float = 0.5  # knots
    epsilon_p: float = 0.8
    hotel_threshold: float = 1.0  # knots; below -> hoteling
    cruise_threshold: float = 5.0  # knots; at or above -> cruising

    def __post_init__(self) -> None:
        if self.v_safety < 0 or not 0 < self.epsilon_p <= 1:
            raise ValidationError("need v_safety >= 0 and 0 < epsilon_p <= 1")
        if not 0 <= self.hotel_threshold <= self.cruise_threshold:
            raise ValidationError("need 0 <= hotel_threshold <= cruise_threshold")


@dataclass
class AuxPowerTable:
    """Auxiliary power (kW) as (cruise, maneuver, hotel) per ship type.

    ``constant`` types draw the same power in every mode.
    """

    rows: dict[int, tuple[float, float, float]] = field(default_factory=dict)
    default: tuple[float, float, float] | None = (750.0, 1250.0, 1000.0)
    constant: dict[int, float] = field(default_factory=lambda: {6: 4000.0})

    def __post_init__(self) -> None:
        values = [v for row in self.rows.values() for v in row] + list(self.constant.values())
        if self.default is not None:
            values += list(self.default)
        if any(v < 0 for v in values):
            raise ValidationError("auxiliary power must be non-negative")


@dataclass
class EmissionFactors:
    factors: dict[tuple[str, str], float]

    def __post_init__(self) -> None:
        if any(v < 0 for v in self.factors.values()):
            raise ValidationError("emission factors must be non-negative")

    @property
    def pollutants(self) -> list[str]:
        seen = {p for _, p in self.factors}
        return [p for p in POLLUTANTS if p in seen] + sorted(seen - set(POLLUTANTS))

    def get(self, engine: str, pollutant: str) -> float:
        return self.factors.get((engine, pollutant), 0.0)

    @classmethod
    def placeholder(cls) -> "EmissionFactors":
        """Illustrative g/kWh values for marine-gasoil engines; replace with a vetted table."""
        return cls({
            (MAIN, "SOx"): 0.41, (MAIN, "NOx"): 14.5, (MAIN, "CO2"): 650.0, (MAIN, "PM"): 0.17,
            (AUX, "SOx"): 0.43, (AUX, "NOx"): 13.0, (AUX, "CO2"): 690.0, (AUX, "PM"): 0.18,
        })


@dataclass(frozen=True, slots=True)
class EmissionRecord:
    ship_id: int
    timestamp: int  # epoch seconds
    lat: float
    lon: float
    engine: str
    pollutant: str
    micrograms: int

    @property
    def grams(self) -> float:
        return self.micrograms / UG_PER_GRAM


def mode_from_speed(sog: float, params: PowerParams = PowerParams()) -> OperationalMode:
    if sog < params.hotel_threshold:
        return OperationalMode.HOTELING
    if sog < params.cruise_threshold:
        return OperationalMode.MANEUVERING
    return OperationalMode.CRUISING


def transient_main_power(sog, design_speed: float, installed_kw: float,
                         params: PowerParams = PowerParams()):
    """``sog^3 / (design_speed + v_safety)^3 * epsilon_p * installed_kw``, clamped to [0, installed]."""
    if not design_speed > 0 or not installed_kw > 0:
        raise ValidationError("design speed and installed power must be positive; impute them first")
    ratio = np.asarray(sog, dtype=float) / (design_speed + params.v_safety)
    power = np.clip(ratio ** 3 * params.epsilon_p * installed_kw, 0.0, installed_kw)
    return float(power) if power.ndim == 0 else power


def aux_power(ship_type: int, mode: OperationalMode, table: AuxPowerTable) -> float:
    if ship_type in table.constant:
        return table.constant[ship_type]
    row = table.rows.get(ship_type, table.default)
    if row is None:
        raise ValidationError(f"no auxiliary power row for ship type {ship_type} and no default")
    cruise, maneuver, hotel = row
    return {OperationalMode.CRUISING: cruise, OperationalMode.MANEUVERING: maneuver,
            OperationalMode.HOTELING: hotel}[mode]


def step_emission(power_kw, ef_g_per_kwh: float, dt_hours: float):
    return power_kw * ef_g_per_kwh * dt_hours


@dataclass(frozen=True)
class DesignSpeedMap:
    """Power law ``design_speed = exp(a) * kW^b`` fitted in log-log space."""

    log_coef: float
    exponent: float

    def __call__(self, installed_kw: float) -> float:
        return float(math.exp(self.log_coef) * installed_kw ** self.exponent)

    @classmethod
    def fit(cls, meta: Iterable[ShipMeta]) -> "DesignSpeedMap":
        pairs = [(m.main_engine_kw, m.design_speed) for m in meta if m.design_speed]
        if len(pairs) < 2:
            raise ValidationError("need at least two ships with design speed to fit the speed map")
        p, v = np.log(np.array(pairs)).T
        b, a = np.polyfit(p, v, 1)
        return cls(float(a), float(b))


def estimate_trace(trace: ShipTrace, meta: ShipMeta | None, efs: EmissionFactors,
                   aux_table: AuxPowerTable, params: PowerParams = PowerParams(),
                   speed_map: DesignSpeedMap | None = None) -> list[EmissionRecord]:
    """Per-sample, per-engine, per-pollutant emissions over a regularized trace."""
    if meta is None or not meta.main_engine_kw or meta.main_engine_kw <= 0:
        raise ValidationError(f"ship {trace.ship_id}: no main engine power; impute it first")
    design = meta.design_speed
    if design is None:
        if speed_map is None:
            raise ValidationError(f"ship {trace.ship_id}: no design speed and no speed map")
        design = speed_map(meta.main_engine_kw)
    dt = trace.step_seconds / 3600.0
    main_kw = np.atleast_1d(transient_main_power(trace.sog, design, meta.main_engine_kw, params))
    aux_kw = [aux_power(meta.ship_type, mode_from_speed(s, params), aux_table) for s in trace.sog]
    pollutants = efs.pollutants
    records: list[EmissionRecord] = []
    for i in range(len(trace)):
        t, lat, lon = int(trace.t[i]), float(trace.lat[i]), float(trace.lon[i])
        for engine, kw in ((MAIN, float(main_kw[i])), (AUX, aux_kw[i])):
            for pol in pollutants:
                grams = step_emission(kw, efs.get(engine, pol), dt)
                records.append(EmissionRecord(trace.ship_id, t, lat, lon, engine, pol,
                                              round(grams * UG_PER_GRAM)))
    return records


def aggregate(records: Iterable[EmissionRecord], group_by: str = "pollutant",
              cell_size: float = 0.1, engine: str | None = None) -> dict:
    """Totals in tonnes per pollutant, per ship or per (lat, lon) grid cell index."""
    keyf = {
        "pollutant": lambda r: r.pollutant,
        "ship": lambda r: r.ship_id,
        "grid_cell": lambda r: (math.floor(r.lat / cell_size), math.floor(r.lon / cell_size)),
    }.get(group_by)
    if keyf is None:
        raise ValidationError(f"unknown grouping {group_by!r}")
    sums: dict = defaultdict(int)
    for r in records:
        if engine is None or r.engine == engine:
            sums[keyf(r)] += r.micrograms
    return {k: v / UG_PER_TONNE for k, v in sorted(sums.items(), key=lambda kv: str(kv[0]))}


@dataclass(frozen=True)
class CoverageRow:
    scenario: str
    pollutant: str
    tonnes: float
    coverage_pct: float | None  # None when the real total is zero
    gap_tonnes: float


def _pollutant_order(p: str) -> tuple[int, str]:
    return (POLLUTANTS.index(p), "") if p in POLLUTANTS else (len(POLLUTANTS), p)


def compare_scenarios(real_totals: Mapping[str, float],
                      scenario_totals: Mapping[str, Mapping[str, float]]) -> list[CoverageRow]:
    """Express each scenario's per-pollutant tonnes as a percentage of the real totals."""
    rows = []
    for name, totals in [("real", real_totals), *scenario_totals.items()]:
        if set(totals) != set(real_totals):
            raise ValidationError(f"scenario {name!r} pollutants differ from the real totals")
        for pol in sorted(real_totals, key=_pollutant_order):
            real = real_totals[pol]
            cov = None if real == 0 else 100.0 * totals[pol] / real
            rows.append(CoverageRow(name, pol, totals[pol], cov, real - totals[pol]))
    return rows


def write_emissions_csv(records: Iterable[EmissionRecord], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["ship_id", "timestamp", "lat", "lon", "engine", "pollutant", "grams"])
    for r in records:
        w.writerow([r.ship_id, format_epoch(r.timestamp), f"{r.lat:.6f}", f"{r.lon:.6f}",
                    r.engine, r.pollutant, f"{r.micrograms // UG_PER_GRAM}.{r.micrograms % UG_PER_GRAM:06d}"])


def write_scenario_csv(rows: Iterable[CoverageRow], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["scenario", "pollutant", "tonnes", "coverage_pct"])
    for r in rows:
        w.writerow([r.scenario, r.pollutant, f"{r.tonnes:.6f}",
                    "undefined" if r.coverage_pct is None else f"{r.coverage_pct:.6f}"])


def read_scenario_csv(fh: TextIO) -> dict[str, dict[str, float]]:
    out: dict[str, dict[str, float]] = defaultdict(dict)
    for row in csv.DictReader(fh):
        out[row["scenario"].strip()][row["pollutant"].strip()] = float(row["tonnes"])
    if "real" not in out:
        raise ValidationError("scenario file has no 'real' scenario")
    return dict(out)

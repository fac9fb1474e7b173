"""Pipeline configuration from an INI-style sectioned key/value file.

Example::

    [general]
    seed = 0

    [ingest]
    step_seconds = 60

    [schema]
    timestamp = BaseDateTime

    [window]
    n = 20

    [crbm]
    hidden = 10
    epochs = 100

    [aux_power]
    7 = 750, 1250, 1000
    default = 750, 1250, 1000
    constant.6 = 4000

    [emission_factors]
    main.CO2 = 650

    [navstatus]
    3 = restricted maneuv.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .crbm import TrainConfig
from .emissions import AUX, MAIN, AuxPowerTable, EmissionFactors, PowerParams
from .errors import ValidationError
from .ingest import DEFAULT_SCHEMA


@dataclass
class LearnerConfig:
    n_trees: int = 200
    n_stages: int = 100
    boost_learning_rate: float = 0.1
    boost_max_depth: int = 3
    lasso_lambda: float = 10.0
    logistic_epochs: int = 500
    logistic_lr: float = 0.5
    train_stride: int = 20  # keep every k-th training window; adjacent windows overlap heavily
    include_type: bool = False  # append the AIS ship type digit to power-regression features


@dataclass
class PipelineConfig:
    step_seconds: int = 60
    max_gap_seconds: int = 72 * 3600
    schema: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_SCHEMA))
    n: int = 20
    n_hidden: int = 10
    train: TrainConfig = field(default_factory=TrainConfig)
    test_fraction: float = 0.34
    split_seed: int = 0
    k: int = 4
    n_init: int = 10  # k-means restarts
    navstatus_names: dict[int, str] = field(default_factory=dict)  # extra or regional status codes
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    power: PowerParams = field(default_factory=PowerParams)
    aux_table: AuxPowerTable = field(default_factory=AuxPowerTable)
    factors: EmissionFactors = field(default_factory=EmissionFactors.placeholder)
    cell_size: float = 0.1
    seed: int = 0  # clustering and learners
    jobs: int = 1
    synth: dict[str, str] = field(default_factory=dict)

    def with_seed(self, seed: int) -> "PipelineConfig":
        """Apply one global seed to every seeded stage."""
        return replace(self, seed=seed, train=replace(self.train, seed=seed), split_seed=seed)


def _coerce(value: str, like):
    if isinstance(like, bool):
        low = value.strip().lower()
        if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
            raise ValidationError(f"not a boolean: {value!r}")
        return low in ("1", "true", "yes", "on")
    try:
        return type(like)(value.strip())
    except ValueError as exc:
        raise ValidationError(f"bad config value {value!r}: {exc}") from exc


def _update(obj, items: dict[str, str], where: str):
    names = {f.name for f in fields(obj)}
    changes = {}
    for key, value in items.items():
        if key not in names:
            raise ValidationError(f"unknown key {key!r} in [{where}]")
        changes[key] = _coerce(value, getattr(obj, key))
    return replace(obj, **changes)


def _triple(text: str) -> tuple[float, float, float]:
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    if len(parts) != 3:
        raise ValidationError(f"aux power row needs cruise, maneuver, hotel kW: {text!r}")
    return tuple(float(p) for p in parts)  # type: ignore[return-value]


def load_config(path: str | Path | None) -> PipelineConfig:
    """Read a config file; missing sections keep their defaults."""
    cfg = PipelineConfig()
    if path is None:
        return cfg
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep key case for schema headers and pollutants
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ValidationError(f"cannot parse config {path}: {exc}") from exc

    known = {"general", "synth", "ingest", "schema", "window", "crbm", "split", "cluster", "learner", "emissions",
             "aux_power", "emission_factors", "navstatus"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ValidationError(f"unknown config sections: {sorted(unknown)}")

    if parser.has_section("general"):
        sec = parser["general"]
        if "seed" in sec:
            cfg = cfg.with_seed(int(sec["seed"]))
        cfg.jobs = int(sec.get("jobs", cfg.jobs))
    if parser.has_section("synth"):
        cfg.synth = dict(parser["synth"].items())
    if parser.has_section("ingest"):
        sec = parser["ingest"]
        cfg.step_seconds = int(sec.get("step_seconds", cfg.step_seconds))
        cfg.max_gap_seconds = int(sec.get("max_gap_seconds", cfg.max_gap_seconds))
    if parser.has_section("schema"):
        for key, header in parser["schema"].items():
            if key not in DEFAULT_SCHEMA:
                raise ValidationError(f"unknown schema field {key!r}")
            cfg.schema[key] = header.strip()
    if parser.has_section("window"):
        cfg.n = int(parser["window"].get("n", cfg.n))
    if parser.has_section("crbm"):
        sec = dict(parser["crbm"].items())
        cfg.n_hidden = int(sec.pop("hidden", cfg.n_hidden))
        cfg.train = _update(cfg.train, sec, "crbm")
    if parser.has_section("split"):
        sec = parser["split"]
        cfg.test_fraction = float(sec.get("test_fraction", cfg.test_fraction))
        cfg.split_seed = int(sec.get("seed", cfg.split_seed))
    if parser.has_section("cluster"):
        cfg.k = int(parser["cluster"].get("k", cfg.k))
        cfg.n_init = int(parser["cluster"].get("n_init", cfg.n_init))
    if parser.has_section("navstatus"):
        try:
            cfg.navstatus_names = {int(code): name.strip() for code, name in parser["navstatus"].items()}
        except ValueError as exc:
            raise ValidationError(f"[navstatus] keys must be integer codes: {exc}") from exc
    if parser.has_section("learner"):
        cfg.learner = _update(cfg.learner, dict(parser["learner"].items()), "learner")
    if parser.has_section("emissions"):
        sec = dict(parser["emissions"].items())
        cfg.cell_size = float(sec.pop("cell_size", cfg.cell_size))
        cfg.power = _update(cfg.power, sec, "emissions")
    if parser.has_section("aux_power"):
        rows, constant, default = {}, {}, cfg.aux_table.default
        for key, value in parser["aux_power"].items():
            if key == "default":
                default = None if value.strip().lower() == "none" else _triple(value)
            elif key.startswith("constant."):
                constant[int(key.split(".", 1)[1])] = float(value)
            else:
                rows[int(key)] = _triple(value)
        cfg.aux_table = AuxPowerTable(rows, default, constant or cfg.aux_table.constant)
    if parser.has_section("emission_factors"):
        factors = {}
        for key, value in parser["emission_factors"].items():
            engine, _, pollutant = key.partition(".")
            if engine not in (MAIN, AUX) or not pollutant:
                raise ValidationError(f"emission factor key must be main.<pollutant> or aux.<pollutant>: {key!r}")
            factors[(engine, pollutant)] = float(value)
        cfg.factors = EmissionFactors(factors)
    return cfg

"""Command line entry point: file-based pipeline stages over one work directory.

Typical run::

    shipcrbm synth --out data
    shipcrbm ingest --ais data/ais.csv --meta data/meta.csv --bathy data/bathy.asc --workdir run
    shipcrbm train-crbm --workdir run
    shipcrbm encode --workdir run
    shipcrbm cluster --workdir run
    shipcrbm train-learner --workdir run --task power --model forest --features act
    shipcrbm predict --workdir run --task power --model forest --features act --vote median
    shipcrbm estimate --workdir run --scenario real
    shipcrbm compare --workdir run
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Iterator, TextIO

import numpy as np
from filelock import FileLock, Timeout

from . import __version__
from .config import PipelineConfig, load_config
from .crbm import CrbmModel, encode, read_activations_csv, train, write_activations_csv, write_loss_curve
from .emissions import (
    DesignSpeedMap,
    aggregate,
    compare_scenarios,
    estimate_trace,
    read_scenario_csv,
    write_emissions_csv,
    write_scenario_csv,
)
from .errors import MissingArtifactError, ShipCrbmError, ValidationError
from .ingest import ShipMeta, assemble_traces, parse_ais_csv, parse_meta_csv, write_meta_csv
from .learners import (
    BURN_LABEL,
    LinearModel,
    PredictionTable,
    TreeEnsembleModel,
    TypeAverageModel,
    accuracy,
    aggregate_votes,
    baseline_global_avg,
    baseline_type_avg,
    crosstab_navstatus,
    forest_fit,
    gradient_boost_fit,
    kmeans_fit,
    kmeans_labels,
    lasso_fit,
    logistic_fit,
    mae,
)
from .regularize import (
    BathyGrid,
    ShipTrace,
    derive_features,
    format_epoch,
    interpolate_trace,
    read_trace_csv,
    write_trace_csv,
)
from .synth import SynthFleetSpec, generate_fleet, write_fleet
from .window import WindowSet, build_windows, fit_norm, split_by_ship, trace_frames, write_windows_csv

logger = logging.getLogger("shipcrbm")

LOCK_NAME = ".shipcrbm.lock"
TASK_MODELS = {
    "power": ("forest", "gb", "lasso", "type_avg", "global_avg"),
    "type": ("forest", "logistic"),
}
BASELINES = ("type_avg", "global_avg")
FEATURE_SETS = ("act", "hist", "frame")


# ---------------------------------------------------------------- file helpers

@contextlib.contextmanager
def _atomic_text(path: Path) -> Iterator[TextIO]:
    """Write to a sibling temp file and move it into place on success."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        yield fh
    os.replace(tmp, path)


def _write_json(path: Path, obj) -> None:
    with _atomic_text(path) as fh:
        fh.write(json.dumps(obj) + "\n")


def _need(path: Path, hint: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(f"{path} not found; run `shipcrbm {hint}` first")
    return path


@contextlib.contextmanager
def _locked(workdir: Path) -> Iterator[None]:
    workdir.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(workdir / LOCK_NAME))
    try:
        lock.acquire(timeout=0)
    except Timeout as exc:
        raise ShipCrbmError(f"{workdir} is locked by another shipcrbm process") from exc
    try:
        yield
    finally:
        lock.release()


def _read_json(path: Path, hint: str):
    return json.loads(_need(path, hint).read_text(encoding="utf-8"))


def _load_meta(workdir: Path) -> dict[int, ShipMeta]:
    with open(_need(workdir / "meta.csv", "ingest"), "rb") as fh:
        return parse_meta_csv(fh)


def _load_traces(workdir: Path) -> dict[int, ShipTrace]:
    summary = _read_json(workdir / "ingest_summary.json", "ingest")
    tdir = _need(workdir / "traces", "ingest")
    out = {}
    for path in sorted(tdir.glob("*.csv"), key=lambda p: int(p.stem)):
        with open(path, newline="", encoding="utf-8") as fh:
            out[int(path.stem)] = read_trace_csv(fh, int(summary["step_seconds"]))
    if not out:
        raise MissingArtifactError(f"no trace files in {tdir}; run `shipcrbm ingest` first")
    return out


def _load_split(workdir: Path) -> tuple[list[int], list[int]]:
    d = _read_json(workdir / "split.json", "train-crbm")
    return [int(x) for x in d["train"]], [int(x) for x in d["test"]]


def _load_crbm(workdir: Path) -> CrbmModel:
    return CrbmModel.from_dict(_read_json(workdir / "crbm_model.json", "train-crbm"))


def _all_windows(traces: dict[int, ShipTrace], model: CrbmModel, meta: dict[int, ShipMeta]) -> WindowSet:
    if model.norm_stats is None:
        raise ValidationError("CRBM model carries no normalization statistics")
    parts = []
    for sid in sorted(traces):
        power = meta[sid].main_engine_kw if sid in meta else None
        parts.append(build_windows(traces[sid], model.n, model.norm_stats, power))
    return WindowSet.concat(parts, model.n)


# ---------------------------------------------------------------- subcommands

def cmd_synth(args, cfg: PipelineConfig) -> int:
    values = dict(cfg.synth)
    for name in ("trawler", "ferry", "cargo", "moored", "hours"):
        if getattr(args, name) is not None:
            values[name] = getattr(args, name)
    values.setdefault("seed", cfg.seed)
    spec = SynthFleetSpec.from_mapping(values)
    out = Path(args.out)
    with _locked(out):
        paths = write_fleet(generate_fleet(spec), out)
    logger.info("synthetic fleet written: %s", ", ".join(str(p) for p in paths.values()))
    return 0


def cmd_ingest(args, cfg: PipelineConfig) -> int:
    workdir = Path(args.workdir)
    for label, path in (("AIS", args.ais), ("meta", args.meta), ("bathymetry", args.bathy)):
        if not Path(path).is_file():
            raise MissingArtifactError(f"{label} file not found: {path}")
    step = args.step or cfg.step_seconds
    with _locked(workdir):
        grid = BathyGrid.read(args.bathy)
        with open(args.ais, "rb") as fh:
            records, report = parse_ais_csv(fh, cfg.schema)
        with open(args.meta, "rb") as fh:
            meta = parse_meta_csv(fh)
        raw = assemble_traces(records)
        tdir = workdir / "traces"
        tdir.mkdir(parents=True, exist_ok=True)
        for stale in tdir.glob("*.csv"):
            stale.unlink()
        flags: dict[str, int] = {}
        written = 0
        for sid, rt in raw.items():
            trace = interpolate_trace(rt, step, cfg.max_gap_seconds)
            if len(trace) == 0:
                continue
            trace = derive_features(trace, grid)
            for key, count in trace.flags.items():
                flags[key] = flags.get(key, 0) + count
            with _atomic_text(tdir / f"{sid}.csv") as fh:
                write_trace_csv(trace, fh)
            written += 1
        with _atomic_text(workdir / "reject_report.json") as fh:
            fh.write(report.to_json())
        with _atomic_text(workdir / "meta.csv") as fh:
            write_meta_csv(meta, fh)
        _write_json(workdir / "ingest_summary.json", {
            "step_seconds": step, "ships": len(raw), "traces": written,
            "flags": dict(sorted(flags.items())),
        })
    logger.info("ingest: %d accepted, %d rejected, %d traces", report.accepted, report.rejected, written)
    return 0


def cmd_train_crbm(args, cfg: PipelineConfig) -> int:
    workdir = Path(args.workdir)
    n = args.n or cfg.n
    n_h = args.hidden or cfg.n_hidden
    tc = cfg.train
    if args.epochs is not None:
        tc = replace(tc, epochs=args.epochs)
    with _locked(workdir):
        traces = _load_traces(workdir)
        train_ids, test_ids = split_by_ship(traces, cfg.test_fraction, cfg.split_seed)
        _write_json(workdir / "split.json", {"seed": cfg.split_seed, "test_fraction": cfg.test_fraction,
                                             "train": train_ids, "test": test_ids})
        stats = fit_norm(np.vstack([trace_frames(traces[s]) for s in train_ids]))
        data = WindowSet.concat([build_windows(traces[s], n, stats) for s in train_ids], n)
        if len(data) == 0:
            raise ValidationError(f"no training windows: every training segment is shorter than n+1={n + 1}")
        model = CrbmModel.initialize(len(stats.mean), n_h, n, seed=tc.seed)
        model.norm_stats = stats
        model, curve = train(model, data, tc)
        model.norm_stats = stats
        _write_json(workdir / "crbm_model.json", model.to_dict())
        with _atomic_text(workdir / "loss_curve.csv") as fh:
            write_loss_curve(curve, fh)
    logger.info("train-crbm: %d windows, n_h=%d, n=%d, final mse %s", len(data), n_h, n,
                f"{curve[-1]:.6f}" if curve else "n/a")
    return 0


def cmd_encode(args, cfg: PipelineConfig) -> int:
    workdir = Path(args.workdir)
    with _locked(workdir):
        model = _load_crbm(workdir)
        ws = _all_windows(_load_traces(workdir), model, _load_meta(workdir))
        with _atomic_text(workdir / "activations.csv") as fh:
            write_activations_csv(ws, encode(model, ws), fh)
        if args.windows:
            with _atomic_text(workdir / "windows.csv") as fh:
                write_windows_csv(ws, fh)
    logger.info("encode: %d windows", len(ws))
    return 0


def cmd_cluster(args, cfg: PipelineConfig) -> int:
    workdir = Path(args.workdir)
    k = args.k or cfg.k
    with _locked(workdir):
        with open(_need(workdir / "activations.csv", "encode"), newline="", encoding="utf-8") as fh:
            table = read_activations_csv(fh)
        traces = _load_traces(workdir)
        km = kmeans_fit(table.activations, k, seed=cfg.seed, n_init=cfg.n_init)
        window_labels = kmeans_labels(km, table.activations)
        lookup = {(int(s), int(t)): int(c) for s, t, c in zip(table.ship_id, table.t_index, window_labels)}
        labels, statuses = [], []
        with _atomic_text(workdir / "clusters.csv") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["ship_id", "t_index", "timestamp", "navstatus", "cluster"])
            for sid in sorted(traces):
                tr = traces[sid]
                for i in range(len(tr)):
                    label = lookup.get((sid, i), BURN_LABEL)
                    labels.append(label)
                    statuses.append(int(tr.navstatus[i]))
                    w.writerow([sid, i, format_epoch(tr.t[i]), int(tr.navstatus[i]), label])
        _write_json(workdir / "kmeans_model.json", km.to_dict())
        with _atomic_text(workdir / "crosstab_navstatus.csv") as fh:
            crosstab_navstatus(labels, statuses, k, names=cfg.navstatus_names).write_csv(fh)
    logger.info("cluster: k=%d, inertia %.6f", k, km.inertia)
    return 0


def _features(workdir: Path, feature_set: str) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(X, ship_id, t_index, label_type, label_power) over every encoded window."""
    if feature_set == "act":
        with open(_need(workdir / "activations.csv", "encode"), newline="", encoding="utf-8") as fh:
            t = read_activations_csv(fh)
        return t.activations, t.ship_id, t.t_index, t.label_type, t.label_power
    ws = _all_windows(_load_traces(workdir), _load_crbm(workdir), _load_meta(workdir))
    X = ws.frames if feature_set == "frame" else np.hstack([ws.history, ws.frames])
    return X, ws.ship_id, ws.t_index, ws.label_type, ws.label_power


def _model_name(task: str, model: str, features: str) -> str:
    return f"{task}-{model}-{'none' if model in BASELINES else features}"


def _ship_types(ship_id: np.ndarray, label_type: np.ndarray) -> dict[int, int]:
    """AIS-reported type digit per ship (first window)."""
    out: dict[int, int] = {}
    for s, t in zip(ship_id, label_type):
        out.setdefault(int(s), int(t))
    return out


def _check_task_model(task: str, model: str) -> None:
    if model not in TASK_MODELS[task]:
        raise ValidationError(f"model {model!r} does not apply to task {task!r}; "
                              f"choose from {', '.join(TASK_MODELS[task])}")


def cmd_train_learner(args, cfg: PipelineConfig) -> int:
    workdir = Path(args.workdir)
    task, model_kind, features = args.task, args.model, args.features
    _check_task_model(task, model_kind)
    lc = cfg.learner
    if args.trees is not None:
        lc = replace(lc, n_trees=args.trees)
    if args.train_stride is not None:
        lc = replace(lc, train_stride=args.train_stride)
    with _locked(workdir):
        train_ids, _ = _load_split(workdir)
        X, sid, _, ltype, lpower = _features(workdir, features)
        include_type = task == "power" and lc.include_type
        if include_type:
            X = np.column_stack([X, ltype])
        target = lpower if task == "power" else ltype.astype(float)
        rows = np.flatnonzero(np.isin(sid, train_ids) & np.isfinite(target))[::max(lc.train_stride, 1)]
        if rows.size == 0:
            raise ValidationError("no labelled training windows")
        Xtr, ytr = X[rows], target[rows]
        header = {"version": 1, "task": task, "model": model_kind, "features": features,
                  "include_type": include_type, "n_features": int(X.shape[1])}
        if model_kind in BASELINES:
            per_ship = {}
            for s, t, p in zip(sid[rows], ltype[rows], ytr):
                per_ship.setdefault(int(s), (int(t), float(p)))
            pairs = [per_ship[s] for s in sorted(per_ship)]
            body = (baseline_type_avg(pairs) if model_kind == "type_avg"
                    else TypeAverageModel({}, baseline_global_avg(pairs)))
            inner = json.loads(body.to_json())
        elif model_kind == "forest":
            inner = forest_fit(Xtr, ytr, n_trees=lc.n_trees, seed=cfg.seed,
                               task="regression" if task == "power" else "classification",
                               n_jobs=cfg.jobs).to_dict()
        elif model_kind == "gb":
            inner = gradient_boost_fit(Xtr, ytr, n_stages=lc.n_stages, learning_rate=lc.boost_learning_rate,
                                       max_depth=lc.boost_max_depth, seed=cfg.seed).to_dict()
        elif model_kind == "lasso":
            inner = lasso_fit(Xtr, ytr, lam=lc.lasso_lambda, standardize=True).to_dict()
        else:
            inner = logistic_fit(Xtr, ytr, epochs=lc.logistic_epochs, lr=lc.logistic_lr,
                                 standardize=True).to_dict()
        name = _model_name(task, model_kind, features)
        _write_json(workdir / "models" / f"{name}.json", {**header, "model": inner})
    logger.info("train-learner: %s on %d windows", name, rows.size)
    return 0


def _load_learner(path: Path):
    doc = json.loads(path.read_text(encoding="utf-8"))
    kind = path.stem.split("-")[1]
    body = doc["model"]
    if kind in BASELINES:
        return doc, TypeAverageModel.from_dict(body)
    if kind in ("forest", "gb"):
        return doc, TreeEnsembleModel.from_dict(body)
    return doc, LinearModel.from_dict(body)


def cmd_predict(args, cfg: PipelineConfig) -> int:
    workdir = Path(args.workdir)
    task, model_kind, features = args.task, args.model, args.features
    _check_task_model(task, model_kind)
    vote = args.vote or ("median" if task == "power" else "majority")
    name = _model_name(task, model_kind, features)
    with _locked(workdir):
        doc, model = _load_learner(_need(workdir / "models" / f"{name}.json",
                                         f"train-learner --task {task} --model {model_kind}"))
        train_ids, test_ids = _load_split(workdir)
        wanted = test_ids if args.ships == "test" else sorted(set(train_ids) | set(test_ids))
        X, sid, tix, ltype, _ = _features(workdir, doc["features"])
        if doc["include_type"]:
            X = np.column_stack([X, ltype])
        mask = np.isin(sid, wanted)
        if model_kind in BASELINES:
            types = _ship_types(sid[mask], ltype[mask])
            votes = {s: float(model.predict_one(types[s])) for s in sorted(types)}
            vote = "none"
        else:
            table = PredictionTable(sid[mask], tix[mask], model.predict(X[mask]))
            votes = aggregate_votes(table, vote)
        with _atomic_text(workdir / "predictions" / f"{name}-{vote}.csv") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["ship_id", "value"])
            w.writerows([s, f"{v:.6f}"] for s, v in sorted(votes.items()))
    logger.info("predict: %s vote=%s for %d ships", name, vote, len(votes))
    return 0


def _read_predictions(path: Path) -> dict[int, float]:
    with open(path, newline="", encoding="utf-8") as fh:
        return {int(r["ship_id"]): float(r["value"]) for r in csv.DictReader(fh)}


def cmd_estimate(args, cfg: PipelineConfig) -> int:
    workdir = Path(args.workdir)
    scenario = args.scenario
    if scenario != "real" and not args.predictions:
        raise ValidationError("a non-real scenario needs --predictions with per-ship main engine kW")
    with _locked(workdir):
        meta = _load_meta(workdir)
        traces = _load_traces(workdir)
        if args.predictions:
            power = _read_predictions(_need(Path(args.predictions), "predict"))
            ships = sorted(power)
        else:
            train_ids, test_ids = _load_split(workdir)
            ships = test_ids if args.ships == "test" else sorted(set(train_ids) | set(test_ids))
            power = {s: meta[s].main_engine_kw for s in ships if s in meta}
        speed_map = None
        if any(m.design_speed is None for m in meta.values()):
            speed_map = DesignSpeedMap.fit(meta.values())
        records = []
        for sid in ships:
            if sid not in traces or sid not in meta:
                raise ValidationError(f"ship {sid} lacks a trace or meta row")
            m = meta[sid]
            records.extend(estimate_trace(traces[sid], ShipMeta(sid, m.ship_type, power[sid], m.design_speed),
                                          cfg.factors, cfg.aux_table, cfg.power, speed_map))
        out = workdir / "emissions"
        with _atomic_text(out / f"{scenario}.csv") as fh:
            write_emissions_csv(records, fh)
        totals = aggregate(records)
        with _atomic_text(out / f"{scenario}_totals.csv") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["pollutant", "tonnes"])
            for pol in cfg.factors.pollutants:
                w.writerow([pol, f"{totals.get(pol, 0.0):.6f}"])
        cells = aggregate(records, group_by="grid_cell", cell_size=cfg.cell_size)
        with _atomic_text(out / f"{scenario}_grid.csv") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lat_cell", "lon_cell", "tonnes"])
            w.writerows([i, j, f"{v:.6f}"] for (i, j), v in sorted(cells.items()))
    logger.info("estimate: scenario %s over %d ships", scenario, len(ships))
    return 0


def _read_totals(path: Path) -> dict[str, float]:
    with open(path, newline="", encoding="utf-8") as fh:
        return {r["pollutant"]: float(r["tonnes"]) for r in csv.DictReader(fh)}


def _coverage(totals: dict[str, dict[str, float]]) -> list:
    real = totals["real"]
    others = {k: v for k, v in totals.items() if k != "real"}
    return compare_scenarios(real, others)


def _print_coverage(rows, out: TextIO) -> None:
    buf = io.StringIO()
    write_scenario_csv(rows, buf)
    out.write(buf.getvalue())


def cmd_compare(args, cfg: PipelineConfig) -> int:
    if args.scenarios:
        with open(_need(Path(args.scenarios), "estimate"), newline="", encoding="utf-8") as fh:
            rows = _coverage(read_scenario_csv(fh))
        if args.out:
            with _atomic_text(Path(args.out)) as fh:
                write_scenario_csv(rows, fh)
        _print_coverage(rows, sys.stdout)
        return 0
    if not args.workdir:
        raise ValidationError("compare needs --workdir or --scenarios")
    workdir = Path(args.workdir)
    with _locked(workdir):
        meta = _load_meta(workdir)
        reports = workdir / "reports"
        mae_rows, acc_rows = [], []
        for path in sorted((workdir / "predictions").glob("*.csv")):
            task, model, features, vote = path.stem.split("-")
            votes = _read_predictions(path)
            ids = sorted(s for s in votes if s in meta)
            if not ids:
                continue
            if task == "power":
                value = mae([votes[s] for s in ids], [meta[s].main_engine_kw for s in ids])
                mae_rows.append([model, features, vote, "test", "mae", f"{value:.6f}"])
            else:
                value = accuracy([int(votes[s]) for s in ids], [meta[s].ship_type for s in ids])
                acc_rows.append([model, features, vote, "test", "accuracy", f"{value:.6f}"])
        for name, rows in (("mae_report.csv", mae_rows), ("accuracy_report.csv", acc_rows)):
            with _atomic_text(reports / name) as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["model", "feature_set", "vote", "split", "metric", "value"])
                w.writerows(rows)
        crosstab = workdir / "crosstab_navstatus.csv"
        if crosstab.exists():
            with _atomic_text(reports / "crosstab_navstatus.csv") as fh:
                fh.write(crosstab.read_text(encoding="utf-8"))
        totals = {p.name[:-len("_totals.csv")]: _read_totals(p)
                  for p in sorted((workdir / "emissions").glob("*_totals.csv"))}
        if "real" in totals:
            rows = _coverage(totals)
            with _atomic_text(reports / "coverage.csv") as fh:
                write_scenario_csv(rows, fh)
            _print_coverage(rows, sys.stdout)
        elif totals:
            logger.warning("no 'real' emission scenario; coverage table skipped")
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shipcrbm", description="AIS trace encoding, imputation and emission pipeline")
    p.add_argument("--config", help="sectioned key/value config file")
    p.add_argument("--seed", type=int, help="seed for every stochastic stage")
    p.add_argument("--jobs", type=int, default=None, help="worker processes for tree fitting")
    p.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic fleet")
    s.add_argument("--out", required=True)
    for name in ("trawler", "ferry", "cargo", "moored"):
        s.add_argument(f"--{name}", type=int)
    s.add_argument("--hours", type=float)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("ingest", help="parse, regularize and derive features")
    s.add_argument("--ais", required=True)
    s.add_argument("--meta", required=True)
    s.add_argument("--bathy", required=True)
    s.add_argument("--workdir", required=True)
    s.add_argument("--step", type=int, help="grid step in seconds")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("train-crbm", help="train the CRBM on the training ships")
    s.add_argument("--workdir", required=True)
    s.add_argument("--n", type=int, help="history length")
    s.add_argument("--hidden", type=int, help="hidden units")
    s.add_argument("--epochs", type=int)
    s.set_defaults(func=cmd_train_crbm)

    s = sub.add_parser("encode", help="activations for every window")
    s.add_argument("--workdir", required=True)
    s.add_argument("--windows", action="store_true", help="also write the normalized windows")
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("cluster", help="k-means over activations")
    s.add_argument("--workdir", required=True)
    s.add_argument("--k", type=int)
    s.set_defaults(func=cmd_cluster)

    for cmd, func in (("train-learner", cmd_train_learner), ("predict", cmd_predict)):
        s = sub.add_parser(cmd)
        s.add_argument("--workdir", required=True)
        s.add_argument("--task", choices=sorted(TASK_MODELS), default="power")
        s.add_argument("--model", choices=sorted({m for ms in TASK_MODELS.values() for m in ms}), default="forest")
        s.add_argument("--features", choices=FEATURE_SETS, default="act")
        if cmd == "train-learner":
            s.add_argument("--trees", type=int)
            s.add_argument("--train-stride", type=int)
        else:
            s.add_argument("--vote", choices=["majority", "mean", "median"])
            s.add_argument("--ships", choices=["test", "all"], default="test")
        s.set_defaults(func=func)

    s = sub.add_parser("estimate", help="emissions for one power scenario")
    s.add_argument("--workdir", required=True)
    s.add_argument("--scenario", default="real")
    s.add_argument("--predictions", help="per-ship power CSV replacing the real main engine kW")
    s.add_argument("--ships", choices=["test", "all"], default="test")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("compare", help="MAE, accuracy and coverage reports")
    s.add_argument("--workdir")
    s.add_argument("--scenarios", help="canned scenario CSV (scenario,pollutant,tonnes)")
    s.add_argument("--out", help="where to write the coverage table in --scenarios mode")
    s.set_defaults(func=cmd_compare)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.jobs is not None:
            cfg.jobs = args.jobs
        return args.func(args, cfg)
    except ShipCrbmError as exc:
        logger.error("%s", exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())

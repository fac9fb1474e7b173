"""Normalized (frame, history) instances for the CRBM and ship-level splitting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ValidationError
from .regularize import ShipTrace

FEATURES = ("sog", "gps_rotation", "bathy_zone")
N_VISIBLE = len(FEATURES)


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray
    std: np.ndarray

    def to_dict(self) -> dict:
        return {"features": list(FEATURES), "mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float))


def trace_frames(trace: ShipTrace) -> np.ndarray:
    """Unnormalized per-sample frames ``[sog, gps_rotation, bathy ordinal]``."""
    if trace.gps_rotation is None:
        raise ValidationError(f"trace {trace.ship_id} has no derived features")
    return np.column_stack([trace.sog, trace.gps_rotation, trace.bathy_zone.astype(float)])


def fit_norm(frames) -> NormStats:
    frames = np.asarray(frames, dtype=float)
    if frames.ndim != 2 or frames.shape[0] < 2:
        raise ValidationError("fit_norm needs at least two frames")
    mean = frames.mean(axis=0)
    std = frames.std(axis=0)
    for name, s in zip(FEATURES, std):
        if not s > 1e-12:
            raise ValidationError(f"degenerate feature: {name} is constant over the training frames")
    return NormStats(mean, std)


def apply_norm(frame, stats: NormStats) -> np.ndarray:
    return (np.asarray(frame, dtype=float) - stats.mean) / stats.std


def invert_norm(frame, stats: NormStats) -> np.ndarray:
    return np.asarray(frame, dtype=float) * stats.std + stats.mean


@dataclass(frozen=True)
class WindowedInstance:
    ship_id: int
    t_index: int
    frame: np.ndarray
    history: np.ndarray  # (n, n_v), oldest row first
    label_type: int | None = None
    label_power: float | None = None
    navstatus: int | None = None


@dataclass
class WindowSet:
    """Column-wise batch of windowed instances; ``history`` is flattened oldest-first."""

    n: int
    ship_id: np.ndarray
    t_index: np.ndarray
    frames: np.ndarray
    history: np.ndarray
    label_type: np.ndarray
    label_power: np.ndarray
    navstatus: np.ndarray

    def __len__(self) -> int:
        return len(self.ship_id)

    def __getitem__(self, i: int) -> WindowedInstance:
        power = float(self.label_power[i])
        return WindowedInstance(
            int(self.ship_id[i]), int(self.t_index[i]), self.frames[i],
            self.history[i].reshape(self.n, -1), int(self.label_type[i]),
            None if math.isnan(power) else power, int(self.navstatus[i]),
        )

    def subset(self, mask) -> "WindowSet":
        return WindowSet(self.n, self.ship_id[mask], self.t_index[mask], self.frames[mask],
                         self.history[mask], self.label_type[mask], self.label_power[mask],
                         self.navstatus[mask])

    def for_ships(self, ids: Iterable[int]) -> "WindowSet":
        return self.subset(np.isin(self.ship_id, np.fromiter(ids, dtype=np.int64)))

    @classmethod
    def empty(cls, n: int) -> "WindowSet":
        return cls(n, np.empty(0, np.int64), np.empty(0, np.int64), np.empty((0, N_VISIBLE)),
                   np.empty((0, n * N_VISIBLE)), np.empty(0, np.int64), np.empty(0),
                   np.empty(0, np.int64))

    @classmethod
    def concat(cls, parts: Sequence["WindowSet"], n: int) -> "WindowSet":
        if not parts:
            return cls.empty(n)
        return cls(n, *(np.concatenate([getattr(p, f) for p in parts]) for f in
                        ("ship_id", "t_index", "frames", "history", "label_type",
                         "label_power", "navstatus")))


def burned_indices(trace: ShipTrace, n: int) -> np.ndarray:
    """Sample indices consumed as initial history (never encoded)."""
    out = [np.arange(s.start, min(s.start + n, s.stop)) for s in trace.segments()]
    return np.concatenate(out) if out else np.empty(0, dtype=np.int64)


def build_windows(trace: ShipTrace, n: int, stats: NormStats,
                  power_kw: float | None = None) -> WindowSet:
    """Slide an ``n``-step history over each segment; the first ``n`` samples are burned."""
    if n < 1:
        raise ValidationError("window length n must be >= 1")
    frames = apply_norm(trace_frames(trace), stats)
    parts = []
    for seg in trace.segments():
        length = seg.stop - seg.start
        if length <= n:
            continue
        w = sliding_window_view(frames[seg], (n + 1, N_VISIBLE))[:, 0]  # (L-n, n+1, n_v)
        idx = np.arange(seg.start + n, seg.stop)
        k = len(idx)
        parts.append(WindowSet(
            n=n,
            ship_id=np.full(k, trace.ship_id, dtype=np.int64),
            t_index=idx.astype(np.int64),
            frames=np.ascontiguousarray(w[:, n, :]),
            history=np.ascontiguousarray(w[:, :n, :]).reshape(k, n * N_VISIBLE),
            label_type=trace.ship_type[idx].astype(np.int64),
            label_power=np.full(k, np.nan if power_kw is None else float(power_kw)),
            navstatus=trace.navstatus[idx].astype(np.int64),
        ))
    return WindowSet.concat(parts, n)


def split_by_ship(ship_ids: Iterable[int], test_fraction: float, seed: int) -> tuple[list[int], list[int]]:
    """Seeded random ship-level split; no time step is shared between the halves."""
    ids = sorted(set(ship_ids))
    if not 0 < test_fraction < 1:
        raise ValidationError("test_fraction must lie strictly between 0 and 1")
    if len(ids) < 2:
        raise ValidationError("need at least two ships to split")
    n_test = int(math.floor(len(ids) * test_fraction + 0.5))
    n_test = min(max(n_test, 1), len(ids) - 1)
    perm = np.random.default_rng(seed).permutation(len(ids))
    test = sorted(ids[i] for i in perm[:n_test])
    train = sorted(ids[i] for i in perm[n_test:])
    return train, test


def _fmt_optional(value: float) -> str:
    return "" if math.isnan(value) else f"{value:.6f}"


def write_windows_csv(ws: WindowSet, fh: TextIO) -> None:
    width = (ws.n + 1) * N_VISIBLE
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["ship_id", "t_index", "label_type", "label_power", "navstatus",
                *(f"f{i}" for i in range(width))])
    flat = np.hstack([ws.history, ws.frames])
    for i in range(len(ws)):
        w.writerow([int(ws.ship_id[i]), int(ws.t_index[i]), int(ws.label_type[i]),
                    _fmt_optional(ws.label_power[i]), int(ws.navstatus[i]),
                    *(f"{v:.6f}" for v in flat[i])])


def read_windows_csv(fh: TextIO) -> WindowSet:
    reader = csv.reader(fh)
    header = next(reader)
    width = len(header) - 5
    n = width // N_VISIBLE - 1
    rows = list(reader)
    if not rows:
        return WindowSet.empty(n)
    flat = np.array([[float(v) for v in r[5:]] for r in rows])
    return WindowSet(
        n=n,
        ship_id=np.array([int(r[0]) for r in rows], dtype=np.int64),
        t_index=np.array([int(r[1]) for r in rows], dtype=np.int64),
        frames=flat[:, n * N_VISIBLE:],
        history=flat[:, :n * N_VISIBLE],
        label_type=np.array([int(r[2]) for r in rows], dtype=np.int64),
        label_power=np.array([float(r[3]) if r[3] else np.nan for r in rows]),
        navstatus=np.array([int(r[4]) for r in rows], dtype=np.int64),
    )

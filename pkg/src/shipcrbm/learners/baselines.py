"""Average-based engine power baselines, vote aggregation and evaluation metrics."""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..errors import ValidationError


@dataclass
class TypeAverageModel:
    """Per-type mean installed power with the global mean as fallback."""

    by_type: dict[int, float]
    global_mean: float

    def predict_one(self, ship_type: int) -> float:
        return self.by_type.get(int(ship_type), self.global_mean)

    def predict(self, ship_types) -> np.ndarray:
        return np.array([self.predict_one(t) for t in np.atleast_1d(ship_types)])

    def to_json(self) -> str:
        return json.dumps({"version": 1, "by_type": {str(k): v for k, v in sorted(self.by_type.items())},
                           "global_mean": self.global_mean}) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "TypeAverageModel":
        return cls({int(k): float(v) for k, v in d["by_type"].items()}, float(d["global_mean"]))


def baseline_global_avg(train: Iterable[tuple[int, float]]) -> float:
    powers = [p for _, p in train]
    if not powers:
        raise ValidationError("baseline needs at least one training ship")
    return float(np.mean(powers))


def baseline_type_avg(train: Iterable[tuple[int, float]]) -> TypeAverageModel:
    train = list(train)
    groups: dict[int, list[float]] = defaultdict(list)
    for ship_type, power in train:
        groups[int(ship_type)].append(float(power))
    return TypeAverageModel({t: float(np.mean(v)) for t, v in sorted(groups.items())},
                            baseline_global_avg(train))


@dataclass
class PredictionTable:
    ship_id: np.ndarray
    t_index: np.ndarray
    value: np.ndarray
    votes: dict = field(default_factory=dict)


def _vote(values: np.ndarray, method: str) -> float:
    if method == "mean":
        return float(values.mean())
    if method == "median":
        return float(np.sort(values)[(len(values) - 1) // 2])  # lower middle: always an observed value
    if method == "majority":
        counts = Counter(values.tolist())
        top = max(counts.values())
        return min(v for v, c in counts.items() if c == top)
    raise ValidationError(f"unknown vote method {method!r}")


def aggregate_votes(per_step: PredictionTable, method: str) -> dict[int, float]:
    """Reduce per-step predictions to one value per ship (majority, mean or median)."""
    ids = np.asarray(per_step.ship_id)
    values = np.asarray(per_step.value, dtype=float)
    out: dict[int, float] = {}
    order = np.argsort(ids, kind="stable")
    ids, values = ids[order], values[order]
    starts = np.flatnonzero(np.r_[True, ids[1:] != ids[:-1]])
    for lo, hi in zip(starts, np.r_[starts[1:], len(ids)]):
        out[int(ids[lo])] = _vote(values[lo:hi], method)
    return out


def _paired(pred: Sequence, truth: Sequence) -> tuple[np.ndarray, np.ndarray]:
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValidationError("prediction and truth differ in length")
    if pred.size == 0:
        raise ValidationError("metric of empty input")
    return pred, truth


def mae(pred: Sequence[float], truth: Sequence[float]) -> float:
    pred, truth = _paired(pred, truth)
    return float(np.mean(np.abs(pred.astype(float) - truth.astype(float))))


def accuracy(pred: Sequence, truth: Sequence) -> float:
    pred, truth = _paired(pred, truth)
    return float(np.mean(pred == truth))


def ship_type_of(typeofshipandcargo: int) -> int:
    """Ship type is the first digit of the two-digit AIS type-and-cargo code."""
    if not 0 <= int(typeofshipandcargo) <= 99:
        raise ValidationError(f"typeofshipandcargo {typeofshipandcargo} outside 0..99")
    return int(typeofshipandcargo) // 10


def per_ship_metric(votes: Mapping[int, float], truth: Mapping[int, float], metric) -> float:
    ids = sorted(votes)
    return metric([votes[i] for i in ids], [truth[i] for i in ids])

"""k-means with k-means++ seeding, cluster labelling and row-normalized cross-tabs."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from ..errors import ValidationError

BURN_LABEL = 1
LABEL_OFFSET = 2

NAVSTATUS_NAMES = {
    0: "under way using engine",
    1: "at anchor",
    2: "not under command",
    3: "restricted maneuverability",
    4: "constrained by draught",
    5: "moored",
    6: "aground",
    7: "engaged in fishing",
    8: "under way sailing",
    15: "undefined",
}


@dataclass
class KMeansModel:
    k: int
    centroids: np.ndarray
    inertia: float
    n_iter: int = 0
    inertia_trace: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"version": 1, "k": self.k, "centroids": self.centroids.tolist(),
                "inertia": self.inertia, "n_iter": self.n_iter}

    @classmethod
    def from_dict(cls, d: dict) -> "KMeansModel":
        return cls(int(d["k"]), np.asarray(d["centroids"], dtype=float), float(d["inertia"]),
                   int(d.get("n_iter", 0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict()) + "\n"


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def _chunked_assign(X: np.ndarray, C: np.ndarray, chunk: int = 8192) -> tuple[np.ndarray, np.ndarray]:
    labels = np.empty(len(X), dtype=np.int64)
    best = np.empty(len(X))
    for lo in range(0, len(X), chunk):
        d = _sq_dists(X[lo:lo + chunk], C)
        labels[lo:lo + chunk] = d.argmin(axis=1)  # first minimum: lowest index wins ties
        best[lo:lo + chunk] = d[np.arange(len(d)), labels[lo:lo + chunk]]
    return labels, best


def _pick(weights: np.ndarray, rng: np.random.Generator) -> int:
    cum = np.cumsum(weights)
    return int(min(np.searchsorted(cum, rng.random() * cum[-1], side="right"), len(cum) - 1))


def _seed_centers(pts: np.ndarray, w: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [pts[_pick(w, rng)]]
    closest = _sq_dists(pts, np.array(centers))[:, 0]
    while len(centers) < k:
        score = w * closest
        idx = _pick(score, rng) if score.sum() > 0 else _pick(w, rng)
        centers.append(pts[idx])
        closest = np.minimum(closest, _sq_dists(pts, pts[idx][None, :])[:, 0])
    return np.array(centers)


def _lloyd(pts: np.ndarray, w: np.ndarray, C: np.ndarray, max_iter: int, tol: float) -> KMeansModel:
    k = len(C)
    trace: list[float] = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        labels, d = _chunked_assign(pts, C)
        trace.append(float(np.dot(w, d)))
        newC = C.copy()
        for j in range(k):
            m = labels == j
            if m.any():  # empty cluster keeps its centroid
                newC[j] = (w[m, None] * pts[m]).sum(axis=0) / w[m].sum()
        shift = float(np.max(np.abs(newC - C)))
        C = newC
        if shift < tol:
            break
    _, d = _chunked_assign(pts, C)
    inertia = float(np.dot(w, d))
    trace.append(inertia)
    return KMeansModel(k, C, inertia, n_iter, trace)


def kmeans_fit(X, k: int, seed: int = 0, max_iter: int = 300, tol: float = 1e-6, n_init: int = 10) -> KMeansModel:
    """Lloyd iterations from k-means++ seeding, best of ``n_init`` restarts by inertia.

    Works on the distinct rows of ``X`` weighted by multiplicity, so row order
    and exact duplication do not change the result. Restarts draw from one
    generator in sequence; the earliest restart wins inertia ties.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) < k or k < 1:
        raise ValidationError(f"kmeans needs at least k={k} points, got {len(X)}")
    if n_init < 1:
        raise ValidationError("n_init must be >= 1")
    pts, counts = np.unique(X, axis=0, return_counts=True)
    w = counts.astype(float)
    rng = np.random.default_rng(seed)
    best: KMeansModel | None = None
    for _ in range(n_init):
        model = _lloyd(pts, w, _seed_centers(pts, w, k, rng), max_iter, tol)
        if best is None or model.inertia < best.inertia:
            best = model
    return best


def kmeans_labels(model: KMeansModel, X) -> np.ndarray:
    labels, _ = _chunked_assign(np.atleast_2d(np.asarray(X, dtype=float)), model.centroids)
    return labels + LABEL_OFFSET


def kmeans_assign(model: KMeansModel, x) -> int:
    """Nearest-centroid label in ``2..k+1``; label 1 is reserved for burned samples."""
    return int(kmeans_labels(model, x)[0])


@dataclass
class CrossTab:
    rows: list
    columns: list
    values: np.ndarray  # row-normalized

    def row(self, label) -> dict:
        return dict(zip(self.columns, self.values[self.rows.index(label)]))

    def write_csv(self, fh: TextIO, row_name: str = "cluster") -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([row_name, *self.columns])
        for label, vals in zip(self.rows, self.values):
            w.writerow([label, *(f"{v:.6f}" for v in vals)])


def crosstab(labels: Sequence, categories: Sequence, rows: Sequence, columns: Sequence | None = None) -> CrossTab:
    """Counts of (label, category) normalized per row; empty rows stay all-zero."""
    labels = list(labels)
    categories = list(categories)
    if len(labels) != len(categories):
        raise ValidationError("labels and categories differ in length")
    if columns is None:
        columns = sorted(set(categories), key=str)
    rows = list(rows)
    columns = list(columns)
    r_idx = {r: i for i, r in enumerate(rows)}
    c_idx = {c: i for i, c in enumerate(columns)}
    counts = np.zeros((len(rows), len(columns)))
    for lab, cat in zip(labels, categories):
        if lab in r_idx and cat in c_idx:
            counts[r_idx[lab], c_idx[cat]] += 1
    totals = counts.sum(axis=1, keepdims=True)
    values = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
    return CrossTab(rows, columns, values)


def navstatus_name(code) -> str:
    if isinstance(code, str):
        return code
    return NAVSTATUS_NAMES.get(int(code), f"status {int(code)}")


def crosstab_navstatus(labels: Sequence[int], statuses: Sequence, k: int,
                       names: dict[int, str] | None = None) -> CrossTab:
    """Cluster (1..k+1) by navigational status, normalized per cluster."""
    table = {**NAVSTATUS_NAMES, **(names or {})}
    named = [s if isinstance(s, str) else table.get(int(s), f"status {int(s)}") for s in statuses]
    return crosstab(labels, named, rows=range(BURN_LABEL, k + LABEL_OFFSET), columns=sorted(set(named)))

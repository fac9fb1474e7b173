"""Random forests and least-squares gradient boosting over axis-aligned trees.

Single trees are grown with scikit-learn's CART builder and immediately
converted to a plain node table, which is what gets persisted and evaluated.
The ensembles themselves (bootstrap, seeding, voting, boosting stages) live
here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from sklearn.tree import DecisionTreeClassifier, DecisionTreeRegressor

from ..errors import ValidationError

LEAF = -1


@dataclass
class Tree:
    """Flat node table; a row goes left when ``x[feature] <= threshold``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @classmethod
    def from_sklearn(cls, est) -> "Tree":
        t = est.tree_
        leaf = t.children_left == -1
        feature = np.where(leaf, LEAF, t.feature).astype(np.int64)
        if hasattr(est, "classes_"):
            value = np.asarray(est.classes_, dtype=float)[t.value[:, 0, :].argmax(axis=1)]
        else:
            value = t.value[:, 0, 0].astype(float)
        return cls(feature, np.where(leaf, 0.0, t.threshold), t.children_left.astype(np.int64),
                   t.children_right.astype(np.int64), value)

    def predict(self, X) -> np.ndarray:
        # the builder compares float32 copies of the inputs against its thresholds
        X = np.asarray(X, dtype=np.float32).astype(float)
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            n = node[active]
            go_left = X[active, self.feature[n]] <= self.threshold[n]
            node[active] = np.where(go_left, self.left[n], self.right[n])
            active = active[self.feature[node[active]] != LEAF]
        return self.value[node]

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(np.asarray(d["feature"], dtype=np.int64), np.asarray(d["threshold"], dtype=float),
                   np.asarray(d["left"], dtype=np.int64), np.asarray(d["right"], dtype=np.int64),
                   np.asarray(d["value"], dtype=float))


@dataclass
class TreeEnsembleModel:
    kind: str  # "forest" | "boosting"
    task: str  # "regression" | "classification"
    trees: list[Tree]
    seed: int = 0
    bootstrap: bool = True
    max_features: int | float | None = None
    init: float = 0.0
    learning_rate: float = 1.0
    train_loss: list[float] = field(default_factory=list)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "boosting":
            out = np.full(len(X), self.init)
            for tree in self.trees:
                out += self.learning_rate * tree.predict(X)
            return out
        votes = np.stack([t.predict(X) for t in self.trees])
        if self.task == "regression":
            return votes.mean(axis=0)
        return _majority(votes)

    def to_dict(self) -> dict:
        return {"version": 1, "kind": self.kind, "task": self.task, "seed": self.seed,
                "bootstrap": self.bootstrap, "max_features": self.max_features,
                "init": self.init, "learning_rate": self.learning_rate,
                "trees": [t.to_dict() for t in self.trees]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict()) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "TreeEnsembleModel":
        return cls(d["kind"], d["task"], [Tree.from_dict(t) for t in d["trees"]], d["seed"],
                   d["bootstrap"], d["max_features"], d["init"], d["learning_rate"])


def _majority(votes: np.ndarray) -> np.ndarray:
    """Column-wise mode of ``votes`` (trees x rows); ties go to the lowest class."""
    classes = np.unique(votes)
    counts = np.stack([(votes == c).sum(axis=0) for c in classes])
    return classes[counts.argmax(axis=0)]


def _canonical(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort(np.column_stack([X, y]).T[::-1])
    return X[order], y[order]


def _grow(X, y, task, seed, bootstrap, max_features, max_depth=None) -> Tree:
    if bootstrap:
        idx = np.random.default_rng(seed).integers(0, len(X), len(X))
        X, y = X[idx], y[idx]
    if task == "regression":
        est = DecisionTreeRegressor(max_depth=max_depth, max_features=max_features, random_state=seed)
        return Tree.from_sklearn(est.fit(X, y))
    est = DecisionTreeClassifier(max_depth=max_depth, max_features=max_features, random_state=seed)
    return Tree.from_sklearn(est.fit(X, y))


def forest_fit(X, y, n_trees: int = 200, seed: int = 0, task: str = "regression",
               bootstrap: bool = True, max_features: int | float | None = None,
               n_jobs: int = 1) -> TreeEnsembleModel:
    """Bagged, fully grown trees; tree ``i`` is seeded with ``seed + i``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(X) < 2:
        raise ValidationError("forest needs at least two training rows")
    if task not in ("regression", "classification"):
        raise ValidationError(f"unknown task {task!r}")
    X, y = _canonical(X, y)
    if n_jobs == 1:
        trees = [_grow(X, y, task, seed + i, bootstrap, max_features) for i in range(n_trees)]
    else:
        trees = Parallel(n_jobs=n_jobs)(
            delayed(_grow)(X, y, task, seed + i, bootstrap, max_features) for i in range(n_trees))
    return TreeEnsembleModel("forest", task, list(trees), seed, bootstrap, max_features)


def forest_predict(model: TreeEnsembleModel, x) -> np.ndarray:
    return model.predict(x)


def gradient_boost_fit(X, y, n_stages: int = 100, learning_rate: float = 0.1,
                       max_depth: int | None = 3, seed: int = 0) -> TreeEnsembleModel:
    """Stage-wise least-squares boosting: each tree fits the current residuals."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(X) == 0:
        raise ValidationError("boosting needs training rows")
    X, y = _canonical(X, y)
    init = float(y.mean())
    pred = np.full(len(y), init)
    model = TreeEnsembleModel("boosting", "regression", [], seed, False, None, init, learning_rate)
    model.train_loss.append(float(np.mean((y - pred) ** 2)))
    for stage in range(n_stages):
        tree = _grow(X, y - pred, "regression", seed + stage, False, None, max_depth)
        pred = pred + learning_rate * tree.predict(X)
        model.trees.append(tree)
        model.train_loss.append(float(np.mean((y - pred) ** 2)))
    return model

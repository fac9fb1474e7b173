"""Lasso (coordinate descent) and multinomial logistic regression."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from ..errors import ValidationError


class ConvergenceWarning(UserWarning):
    pass


class DegenerateModelWarning(UserWarning):
    pass


@dataclass
class LinearModel:
    """Affine model on (optionally standardized) inputs.

    Regression: ``weights`` has shape (d,). Classification: shape
    (n_classes, d) with a softmax link over ``classes``.
    """

    weights: np.ndarray
    intercept: np.ndarray | float
    penalty: float | None = None
    classes: np.ndarray | None = None
    x_mean: np.ndarray | None = None
    x_scale: np.ndarray | None = None
    n_iter: int = 0

    def _scaled(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.x_mean is not None:
            X = (X - self.x_mean) / self.x_scale
        return X

    def decision(self, X) -> np.ndarray:
        return self._scaled(X) @ self.weights.T + self.intercept

    def predict(self, X) -> np.ndarray:
        if self.classes is None:
            return self.decision(X)
        return self.classes[np.argmax(self.decision(X), axis=1)]

    def predict_proba(self, X) -> np.ndarray:
        if self.classes is None:
            raise ValidationError("regression model has no class probabilities")
        return softmax(self.decision(X), axis=1)

    def to_dict(self) -> dict:
        def opt(a):
            return None if a is None else np.asarray(a).tolist()
        return {"version": 1, "weights": self.weights.tolist(), "intercept": opt(self.intercept),
                "penalty": self.penalty, "classes": opt(self.classes),
                "x_mean": opt(self.x_mean), "x_scale": opt(self.x_scale)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict()) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        def opt(a):
            return None if a is None else np.asarray(a, dtype=float)
        intercept = d["intercept"]
        return cls(np.asarray(d["weights"], dtype=float),
                   float(intercept) if np.isscalar(intercept) else np.asarray(intercept, dtype=float),
                   d["penalty"], opt(d["classes"]), opt(d["x_mean"]), opt(d["x_scale"]))


def _standardizer(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    return mean, np.where(scale > 0, scale, 1.0)


def _soft_threshold(x: float, lam: float) -> float:
    if x > lam:
        return x - lam
    if x < -lam:
        return x + lam
    return 0.0


def lasso_fit(X, y, lam: float, max_iter: int = 1000, tol: float = 1e-8,
              standardize: bool = False) -> LinearModel:
    """Minimize ``0.5 * ||y - X w - w0||^2 / N + lam * ||w||_1`` by cyclic coordinate descent."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(X) == 0 or len(X) != len(y):
        raise ValidationError("lasso needs equal, non-zero numbers of rows and targets")
    x_mean = x_scale = None
    if standardize:
        x_mean, x_scale = _standardizer(X)
        X = (X - x_mean) / x_scale
    n, d = X.shape
    mu = X.mean(axis=0)
    Xc = X - mu
    ybar = y.mean()
    r = y - ybar
    z = (Xc ** 2).sum(axis=0) / n
    w = np.zeros(d)
    it = 0
    for it in range(1, max_iter + 1):
        max_change = 0.0
        for j in range(d):
            if z[j] == 0.0:
                continue
            rho = Xc[:, j] @ r / n + z[j] * w[j]
            new = _soft_threshold(rho, lam) / z[j]
            if new != w[j]:
                r -= Xc[:, j] * (new - w[j])
                max_change = max(max_change, abs(new - w[j]))
                w[j] = new
        if max_change < tol:
            break
    else:
        warnings.warn(f"lasso did not converge in {max_iter} iterations", ConvergenceWarning)
    return LinearModel(w, float(ybar - mu @ w), lam, None, x_mean, x_scale, it)


def logistic_fit(X, labels, epochs: int = 500, lr: float = 0.5, standardize: bool = False) -> LinearModel:
    """Multinomial softmax regression by full-batch gradient descent on mean cross-entropy."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    labels = np.asarray(labels)
    classes = np.unique(labels).astype(float)
    x_mean = x_scale = None
    if standardize:
        x_mean, x_scale = _standardizer(X)
        X = (X - x_mean) / x_scale
    n, d = X.shape
    W = np.zeros((len(classes), d))
    b = np.zeros(len(classes))
    if len(classes) < 2:
        warnings.warn("single class in training labels; model always predicts it",
                      DegenerateModelWarning)
        return LinearModel(W, b, None, classes, x_mean, x_scale)
    Y = (labels[:, None].astype(float) == classes[None, :]).astype(float)
    for _ in range(epochs):
        P = softmax(X @ W.T + b, axis=1)
        G = (P - Y) / n
        W -= lr * (G.T @ X)
        b -= lr * G.sum(axis=0)
    return LinearModel(W, b, None, classes, x_mean, x_scale, epochs)


def classify(model: LinearModel, x):
    """Arg-max class; ties resolve to the lowest class value."""
    out = model.predict(x)
    return out[0] if np.ndim(x) == 1 else out

"""Gaussian-Bernoulli RBM conditioned on an n-step history (CRBM).

Visible units are real valued with unit variance (inputs are standardized
beforehand), hidden units are binary. The history enters only through the
dynamic biases::

    c_hat = c + A.T @ history        (visible)
    b_hat = b + D.T @ history        (hidden)

All functions accept either a single vector or a 2-D batch (rows = instances).
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, TextIO

import numpy as np
from scipy.special import expit

from .errors import DivergenceError, ValidationError
from .window import NormStats, WindowSet

logger = logging.getLogger(__name__)

MODEL_VERSION = 1
PARAMS = ("W", "A", "D", "b", "c")
_WEIGHTS = ("W", "A", "D")


@dataclass
class CrbmModel:
    W: np.ndarray  # (n_v, n_h)
    A: np.ndarray  # (n * n_v, n_v)
    D: np.ndarray  # (n * n_v, n_h)
    b: np.ndarray  # (n_h,)
    c: np.ndarray  # (n_v,)
    norm_stats: NormStats | None = None

    def __post_init__(self) -> None:
        for name in PARAMS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n_v, n_h = self.W.shape
        hist = self.A.shape[0]
        if (self.A.shape != (hist, n_v) or self.D.shape != (hist, n_h)
                or self.b.shape != (n_h,) or self.c.shape != (n_v,) or hist % n_v):
            raise ValidationError(
                f"inconsistent CRBM shapes W{self.W.shape} A{self.A.shape} "
                f"D{self.D.shape} b{self.b.shape} c{self.c.shape}")

    @property
    def n_v(self) -> int:
        return self.W.shape[0]

    @property
    def n_h(self) -> int:
        return self.W.shape[1]

    @property
    def n(self) -> int:
        return self.A.shape[0] // self.n_v

    @classmethod
    def zeros(cls, n_v: int, n_h: int, n: int) -> "CrbmModel":
        return cls(np.zeros((n_v, n_h)), np.zeros((n * n_v, n_v)), np.zeros((n * n_v, n_h)),
                   np.zeros(n_h), np.zeros(n_v))

    @classmethod
    def initialize(cls, n_v: int, n_h: int, n: int, seed: int, scale: float = 0.01) -> "CrbmModel":
        rng = np.random.default_rng(seed)
        return cls(rng.normal(0.0, scale, (n_v, n_h)),
                   rng.normal(0.0, scale, (n * n_v, n_v)),
                   rng.normal(0.0, scale, (n * n_v, n_h)),
                   np.zeros(n_h), np.zeros(n_v))

    def copy(self) -> "CrbmModel":
        return CrbmModel(*(getattr(self, p).copy() for p in PARAMS), norm_stats=self.norm_stats)

    def params(self) -> dict[str, np.ndarray]:
        return {p: getattr(self, p) for p in PARAMS}

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.params().values())

    def to_dict(self) -> dict:
        return {
            "version": MODEL_VERSION,
            "n_v": self.n_v, "n_h": self.n_h, "n": self.n,
            **{p: getattr(self, p).tolist() for p in PARAMS},
            "norm_stats": None if self.norm_stats is None else self.norm_stats.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CrbmModel":
        if d.get("version") != MODEL_VERSION:
            raise ValidationError(f"unsupported CRBM model version {d.get('version')!r}")
        stats = d.get("norm_stats")
        model = cls(*(np.asarray(d[p], dtype=float).reshape(-1) if p in ("b", "c")
                      else np.asarray(d[p], dtype=float).reshape(_shape(d, p)) for p in PARAMS),
                    norm_stats=None if stats is None else NormStats.from_dict(stats))
        if (model.n_v, model.n_h, model.n) != (d["n_v"], d["n_h"], d["n"]):
            raise ValidationError("CRBM header dimensions disagree with matrices")
        return model

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CrbmModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _shape(d: dict, p: str) -> tuple[int, int]:
    n_v, n_h, hist = d["n_v"], d["n_h"], d["n"] * d["n_v"]
    return {"W": (n_v, n_h), "A": (hist, n_v), "D": (hist, n_h)}[p]


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 128
    learning_rate: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 2e-4
    cd_k: int = 1
    seed: int = 0
    sample_hidden: bool = True  # False: mean-field negative phase (no sampling noise)
    freeze_history: bool = False  # hold A and D fixed (plain GB-RBM training)

    def __post_init__(self) -> None:
        if not self.learning_rate >= 0:
            raise ValidationError("learning_rate must be non-negative")
        if self.cd_k < 1:
            raise ValidationError("cd_k must be >= 1")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValidationError("batch_size must be >= 1 and epochs >= 0")


def _check_history(model: CrbmModel, history: np.ndarray) -> None:
    if history.shape[-1] != model.A.shape[0]:
        raise ValidationError(
            f"history has length {history.shape[-1]}, model expects n*n_v = {model.A.shape[0]}")


def dynamic_biases(model: CrbmModel, history) -> tuple[np.ndarray, np.ndarray]:
    history = np.asarray(history, dtype=float)
    _check_history(model, history)
    return model.c + history @ model.A, model.b + history @ model.D


def _hidden_input(model: CrbmModel, v: np.ndarray, b_hat: np.ndarray) -> np.ndarray:
    return b_hat + v @ model.W


def hidden_probs(model: CrbmModel, v, history) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    _, b_hat = dynamic_biases(model, history)
    return expit(_hidden_input(model, v, b_hat))


def visible_means(model: CrbmModel, h, history) -> np.ndarray:
    c_hat, _ = dynamic_biases(model, history)
    return c_hat + np.asarray(h, dtype=float) @ model.W.T


def sample_visible(model: CrbmModel, h, history, rng: np.random.Generator) -> np.ndarray:
    mean = visible_means(model, h, history)
    return mean + rng.standard_normal(mean.shape)


def free_energy(model: CrbmModel, v, history):
    """Hidden-marginalized energy ``F(v | history)``; ``-log p(v|history) = F + log Z``."""
    v = np.asarray(v, dtype=float)
    c_hat, b_hat = dynamic_biases(model, history)
    quad = 0.5 * np.sum((v - c_hat) ** 2, axis=-1)
    return quad - np.sum(np.logaddexp(0.0, _hidden_input(model, v, b_hat)), axis=-1)


def free_energy_grad(model: CrbmModel, v, history) -> dict[str, np.ndarray]:
    """Gradient of the batch-mean free energy with respect to every parameter."""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    history = np.atleast_2d(np.asarray(history, dtype=float))
    c_hat, b_hat = dynamic_biases(model, history)
    p = expit(_hidden_input(model, v, b_hat))
    resid = v - c_hat
    m = v.shape[0]
    return {
        "W": -(v.T @ p) / m,
        "A": -(history.T @ resid) / m,
        "D": -(history.T @ p) / m,
        "b": -p.mean(axis=0),
        "c": -resid.mean(axis=0),
    }


def _as_arrays(batch) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(batch, WindowSet):
        return batch.frames, batch.history
    frames, history = batch
    return np.atleast_2d(np.asarray(frames, dtype=float)), np.atleast_2d(np.asarray(history, dtype=float))


def cd_update(model: CrbmModel, batch, config: TrainConfig, *,
              rng: np.random.Generator | None = None,
              velocity: dict[str, np.ndarray] | None = None) -> tuple[CrbmModel, float]:
    """One CD-k step on a mini-batch; returns the updated copy and reconstruction MSE.

    ``batch`` is a :class:`WindowSet` or a ``(frames, history)`` pair. Pass a
    ``velocity`` dict to carry momentum across calls; it is updated in place.
    """
    v0, hist = _as_arrays(batch)
    if v0.shape[0] == 0:
        raise ValidationError("empty batch")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    velocity = {} if velocity is None else velocity

    # overflow is caught by the finiteness check below
    with np.errstate(over="ignore", invalid="ignore"):
        c_hat, b_hat = dynamic_biases(model, hist)
        ph = expit(_hidden_input(model, v0, b_hat))
        recon = None
        vk = v0
        for _ in range(config.cd_k):
            h = (rng.random(ph.shape) < ph).astype(float) if config.sample_hidden else ph
            vk = c_hat + h @ model.W.T
            if recon is None:
                recon = vk
            ph = expit(_hidden_input(model, vk, b_hat))
        mse = float(np.mean((v0 - recon) ** 2))

        pos = free_energy_grad(model, v0, hist)
        neg = free_energy_grad(model, vk, hist)
        new = model.copy()
        for name in PARAMS:
            if config.freeze_history and name in ("A", "D"):
                continue
            grad = neg[name] - pos[name]  # ascent direction of the CD log-likelihood estimate
            param = getattr(model, name)
            if name in _WEIGHTS:
                grad = grad - config.weight_decay * param
            delta = config.learning_rate * grad
            if name in velocity:
                delta = delta + config.momentum * velocity[name]
            velocity[name] = delta
            setattr(new, name, param + delta)
    if not new.is_finite():
        raise DivergenceError("divergence: non-finite CRBM parameter after CD update")
    return new, mse


def train(model_init: CrbmModel, dataset, config: TrainConfig,
          on_epoch: Callable[[int, float], None] | None = None) -> tuple[CrbmModel, list[float]]:
    """Mini-batch CD training over shuffled batches; deterministic given ``config.seed``."""
    frames, hist = _as_arrays(dataset)
    if frames.shape[0] == 0:
        raise ValidationError("cannot train on an empty dataset")
    rng = np.random.default_rng(config.seed)
    model = model_init.copy()
    velocity: dict[str, np.ndarray] = {}
    curve: list[float] = []
    m = frames.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(m)
        total = 0.0
        for lo in range(0, m, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            model, mse = cd_update(model, (frames[idx], hist[idx]), config, rng=rng, velocity=velocity)
            total += mse * len(idx)
        curve.append(total / m)
        if on_epoch is not None:
            on_epoch(epoch, curve[-1])
        logger.debug("epoch %d recon_mse %.6f", epoch + 1, curve[-1])
    return model, curve


def encode(model: CrbmModel, instances) -> np.ndarray:
    """Hidden-unit probabilities (the activation vector) for each instance."""
    v, hist = _as_arrays(instances)
    return hidden_probs(model, v, hist)


def reconstruct(model: CrbmModel, instances) -> np.ndarray:
    v, hist = _as_arrays(instances)
    return visible_means(model, hidden_probs(model, v, hist), hist)


def simulate_reconstruction(model: CrbmModel, instances) -> float:
    """Mean squared error between frames and their mean-field reconstructions."""
    v, hist = _as_arrays(instances)
    if v.shape[0] == 0:
        raise ValidationError("no windows to reconstruct")
    return float(np.mean((v - reconstruct(model, (v, hist))) ** 2))


def write_loss_curve(curve: Sequence[float], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["epoch", "recon_mse"])
    w.writerows([i + 1, f"{v:.6f}"] for i, v in enumerate(curve))


def read_loss_curve(fh: TextIO) -> list[float]:
    return [float(r["recon_mse"]) for r in csv.DictReader(fh)]


def write_activations_csv(ws: WindowSet, activations: np.ndarray, fh: TextIO) -> None:
    n_h = activations.shape[1]
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["ship_id", "t_index", *(f"a{j}" for j in range(n_h)),
                "label_type", "label_power", "navstatus"])
    for i in range(len(ws)):
        power = ws.label_power[i]
        w.writerow([int(ws.ship_id[i]), int(ws.t_index[i]),
                    *(f"{a:.6f}" for a in activations[i]),
                    int(ws.label_type[i]), "" if math.isnan(power) else f"{power:.6f}",
                    int(ws.navstatus[i])])


@dataclass
class ActivationTable:
    ship_id: np.ndarray
    t_index: np.ndarray
    activations: np.ndarray
    label_type: np.ndarray
    label_power: np.ndarray
    navstatus: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))


def read_activations_csv(fh: TextIO) -> ActivationTable:
    reader = csv.reader(fh)
    header = next(reader)
    n_h = len(header) - 5
    rows = list(reader)
    return ActivationTable(
        ship_id=np.array([int(r[0]) for r in rows], dtype=np.int64),
        t_index=np.array([int(r[1]) for r in rows], dtype=np.int64),
        activations=np.array([[float(x) for x in r[2:2 + n_h]] for r in rows]).reshape(len(rows), n_h),
        label_type=np.array([int(r[2 + n_h]) for r in rows], dtype=np.int64),
        label_power=np.array([float(r[3 + n_h]) if r[3 + n_h] else math.nan for r in rows]),
        navstatus=np.array([int(r[4 + n_h]) for r in rows], dtype=np.int64),
    )

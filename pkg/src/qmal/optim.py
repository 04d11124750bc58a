"""MSE loss and simultaneous-perturbation training of QCNN parameters."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import EmptyBatch, EmptyDataset
from .qcnn import LayerPlan, QcnnModel, forward_batch

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 5
    batch_size: int = 32
    a: float = 2.0
    c: float = 0.1
    A: float = 10.0
    alpha: float = 0.602
    gamma: float = 0.101
    seed: int = 0
    shared_params: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.c <= 0:
            raise ValueError("perturbation gain c must be > 0")

    def gain_a(self, k: int) -> float:
        return self.a / (self.A + k + 1) ** self.alpha

    def gain_c(self, k: int) -> float:
        return self.c / (k + 1) ** self.gamma

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown training options: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def from_json(cls, path) -> "TrainConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class TrainHistory:
    losses: list[float] = field(default_factory=list)
    epoch_accuracy: list[float] = field(default_factory=list)
    loss_evaluations: int = 0
    best_epoch: int = 0

    @property
    def steps(self) -> int:
        return len(self.losses)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["step", "loss"])
            for k, loss in enumerate(self.losses):
                writer.writerow([k, repr(float(loss))])

    def epochs_to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["epoch", "train_accuracy"])
            for e, acc in enumerate(self.epoch_accuracy):
                writer.writerow([e, repr(float(acc))])


def batch_loss(model: QcnnModel, angles, labels) -> float:
    """Mean squared error between predicted malware probability and the 0/1 label."""
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    labels = np.asarray(labels, dtype=float).reshape(-1)
    if labels.size == 0:
        raise EmptyBatch("loss over an empty batch")
    return _mse(model.params, model.plan, model.shared, angles, labels)


def _mse(params, plan, shared, angles, labels) -> float:
    p = forward_batch(params, angles, plan, shared)
    return float(np.mean((p - labels) ** 2))


def spsb_gradient(lossfn, theta, c_k: float, rng: np.random.Generator):
    """Two-evaluation simultaneous-perturbation gradient estimate.

    Returns ``(g, f_plus, f_minus)``; ``g_i = (f(θ+cΔ) - f(θ-cΔ)) / (2 c Δ_i)``
    with Δ drawn uniformly from {-1, +1}^d.
    """
    if c_k <= 0:
        raise ValueError("c_k must be > 0")
    theta = np.asarray(theta, dtype=float)
    delta = rng.choice(np.array([-1.0, 1.0]), size=theta.shape)
    f_plus = float(lossfn(theta + c_k * delta))
    f_minus = float(lossfn(theta - c_k * delta))
    return (f_plus - f_minus) / (2.0 * c_k * delta), f_plus, f_minus


class _Counted:
    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def __call__(self, theta):
        self.calls += 1
        return self.fn(theta)


def spsa_step(lossfn, theta, k: int, config: TrainConfig, rng):
    g, f_plus, f_minus = spsb_gradient(lossfn, theta, config.gain_c(k), rng)
    return theta - config.gain_a(k) * g, 0.5 * (f_plus + f_minus)


def spsa_minimize(lossfn, theta0, steps: int, config: TrainConfig | None = None,
                  rng: np.random.Generator | None = None):
    """Plain SPSA loop on a deterministic objective. Returns (theta, history)."""
    config = config or TrainConfig()
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    counted = _Counted(lossfn)
    theta = np.asarray(theta0, dtype=float).copy()
    history = TrainHistory()
    for k in range(steps):
        theta, loss = spsa_step(counted, theta, k, config, rng)
        history.losses.append(loss)
    history.loss_evaluations = counted.calls
    return theta, history


def accuracy_of(params, plan, shared, angles, labels) -> float:
    p = forward_batch(params, angles, plan, shared)
    return float(np.mean((np.asarray(p) >= 0.5).astype(int) == labels))


def train_qcnn(angles, labels, config: TrainConfig | None = None, section: str | None = None,
               plan: LayerPlan | None = None):
    """Train a QCNN with minibatch SPSA and return the best-train-accuracy snapshot.

    Accuracy is checked on the full training set at initialization and after
    every epoch; ties go to the later snapshot.
    """
    config = config or TrainConfig()
    X = np.atleast_2d(np.asarray(angles, dtype=float))
    y = np.asarray(labels, dtype=int).reshape(-1)
    if y.size == 0:
        raise EmptyDataset("no training rows")
    if X.shape[0] != y.size:
        raise ValueError(f"{X.shape[0]} angle rows but {y.size} labels")
    plan = plan or LayerPlan.build(X.shape[1])
    shared = config.shared_params

    rng = np.random.default_rng(config.seed)
    theta = rng.uniform(0.0, 2 * np.pi, size=plan.n_params(shared))
    history = TrainHistory()
    best = theta.copy()
    best_acc = accuracy_of(theta, plan, shared, X, y)
    evaluations = 0
    k = 0
    for epoch in range(config.epochs):
        order = rng.permutation(y.size)
        for start in range(0, y.size, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb, yb = X[idx], y[idx].astype(float)
            lossfn = _Counted(lambda t: _mse(t, plan, shared, xb, yb))
            theta, loss = spsa_step(lossfn, theta, k, config, rng)
            evaluations += lossfn.calls
            history.losses.append(loss)
            k += 1
        acc = accuracy_of(theta, plan, shared, X, y)
        history.epoch_accuracy.append(acc)
        log.debug("section=%s epoch=%d train_acc=%.4f", section, epoch, acc)
        if acc >= best_acc:
            best, best_acc = theta.copy(), acc
            history.best_epoch = epoch + 1
    history.loss_evaluations = evaluations
    model = QcnnModel(best, plan=plan, shared=shared, section=section, seed=config.seed)
    return model, history

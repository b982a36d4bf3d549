"""Mini-batch training loop for the multitask model.

Deterministic given the config seed: the only randomness is the epoch
shuffle, drawn from a generator seeded once at the start.  A non-finite
loss aborts immediately with the offending epoch rather than skipping
the batch.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..entropy import BinaryBatch, binary_thc_loss, _as_alpha
from ..errors import EmptyDataset, InvalidConfig, NonFiniteLoss
from .losses import mse_loss, total_loss
from .model import Batch, MultitaskModel
from .optim import make_optimizer

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 8
    learning_rate: float = 1e-3
    alpha: float = 1.0
    loss_weights: tuple[float, float] = (1.0, 1.0)
    seed: int = 0
    optimizer: str = "adam"

    def validate(self):
        if self.epochs < 1:
            raise InvalidConfig("epochs must be >= 1")
        if self.batch_size < 1:
            raise InvalidConfig("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise InvalidConfig("learning_rate must be > 0")
        w_rec, w_pred = self.loss_weights
        if w_rec < 0 or w_pred < 0 or (w_rec == 0 and w_pred == 0):
            raise InvalidConfig("loss weights must be >= 0 and not both zero")
        _as_alpha(self.alpha)


@dataclass
class TrainingSet:
    """Stacked training arrays: volumes (N,H,W,C), clinical (N,D), labels (N,)."""

    volumes: np.ndarray
    clinical: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return int(self.volumes.shape[0])

    def subset(self, indices) -> "TrainingSet":
        idx = np.asarray(indices)
        return TrainingSet(self.volumes[idx], self.clinical[idx], self.labels[idx])


@dataclass
class EpochStats:
    epoch: int
    rec_loss: float
    pred_loss: float
    total_loss: float


@dataclass
class TrainResult:
    model: MultitaskModel
    trace: list[EpochStats] = field(default_factory=list)


def train(model: MultitaskModel, dataset: TrainingSet, config: TrainConfig) -> TrainResult:
    config.validate()
    n = len(dataset)
    if n == 0:
        raise EmptyDataset("training set is empty")
    alpha = _as_alpha(config.alpha)
    opt = make_optimizer(config.optimizer, config.learning_rate)
    rng = np.random.default_rng(config.seed)
    params = model.parameters()
    trace: list[EpochStats] = []

    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        rec_sum = pred_sum = tot_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            batch = Batch(dataset.volumes[idx], dataset.clinical[idx], dataset.labels[idx])
            out = model.forward(batch.volumes, batch.clinical)
            rec = mse_loss(batch.volumes, out.reconstruction)
            pred = binary_thc_loss(BinaryBatch(batch.labels, out.recurrence_prob), alpha)
            try:
                tot = total_loss(rec, pred, config.loss_weights)
            except ArithmeticError as exc:
                raise NonFiniteLoss(epoch) from exc
            if not (math.isfinite(rec) and math.isfinite(pred)):
                raise NonFiniteLoss(epoch)
            grads = model.backward(batch, alpha, config.loss_weights)
            opt.step(params, grads)
            k = len(idx)
            rec_sum += rec * k
            pred_sum += pred * k
            tot_sum += tot * k
        trace.append(EpochStats(epoch, rec_sum / n, pred_sum / n, tot_sum / n))
        log.debug("epoch %d: total loss %.6f", epoch, tot_sum / n)
    return TrainResult(model, trace)


def predict(model: MultitaskModel, dataset: TrainingSet, batch_size: int = 64) -> np.ndarray:
    """Recurrence probabilities for every item, in dataset order."""
    n = len(dataset)
    probs = np.empty(n)
    for start in range(0, n, batch_size):
        idx = np.arange(start, min(start + batch_size, n))
        out = model.forward(dataset.volumes[idx], dataset.clinical[idx])
        probs[idx] = out.recurrence_prob
    return probs


def write_trace_csv(trace: list[EpochStats], path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "rec_loss", "pred_loss", "total_loss"])
        for row in trace:
            writer.writerow([row.epoch, repr(row.rec_loss), repr(row.pred_loss), repr(row.total_loss)])


def read_trace_csv(path) -> list[EpochStats]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            EpochStats(
                int(r["epoch"]),
                float(r["rec_loss"]),
                float(r["pred_loss"]),
                float(r["total_loss"]),
            )
            for r in reader
        ]

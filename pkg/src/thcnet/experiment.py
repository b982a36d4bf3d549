"""Evaluation protocol: five-fold cross-validation, the accuracy metric,
an alpha sweep over the THC loss, and significance testing against the
Shannon baseline (alpha = 1).

Every alpha in a sweep reuses the same fold partition, so the per-fold
accuracy samples are comparable, and every (alpha, fold) pair trains a
fresh model from a fold-derived seed.  Folds are independent work items;
`parallel_folds` > 1 runs them on a thread pool, and because results are
reduced in fold order the output is schedule-independent.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .datagen import ENCODED_DIM, compute_normalization_stats, encode_records
from .entropy import _as_alpha
from .errors import (
    DimensionMismatch,
    EmptyInput,
    InsufficientData,
    InvalidConfig,
    InvalidK,
)
from .net import ModelConfig, TrainConfig, TrainingSet, build_model, predict, train
from .stats import significance_test

log = logging.getLogger(__name__)

#: Mixed into a fold seed to decouple the shuffle stream from init.
_SHUFFLE_SALT = 0x9E3779B9


@dataclass(frozen=True)
class FoldSplit:
    k: int
    assignments: np.ndarray  # fold index in [0, k) per record

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


@dataclass
class FoldResult:
    fold_index: int
    test_accuracy: float
    train_loss_trace: list[float] = field(default_factory=list)


def kfold_split(n: int, k: int, seed: int) -> FoldSplit:
    """Shuffle 0..n-1 and deal round-robin into k folds (sizes differ <= 1)."""
    if k < 2 or k > n:
        raise InvalidK(f"need 2 <= k <= n, got k={k}, n={n}")
    order = np.random.default_rng(seed).permutation(n)
    assignments = np.empty(n, dtype=np.int64)
    assignments[order] = np.arange(n) % k
    return FoldSplit(k, assignments)


def accuracy(labels, probs) -> float:
    """Fraction of correct thresholded predictions; prob >= 0.5 predicts 1."""
    y = np.asarray(labels)
    q = np.asarray(probs, dtype=np.float64)
    if y.size == 0:
        raise EmptyInput("accuracy needs at least one observation")
    if y.shape != q.shape:
        raise DimensionMismatch(f"labels {y.shape} and probs {q.shape} differ")
    return float(np.mean((q >= 0.5).astype(np.int64) == y))


def mean_sd(values) -> tuple[float, float]:
    """Arithmetic mean and sample SD (n - 1 denominator)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise InsufficientData("sample SD needs at least two values")
    return float(v.mean()), float(v.std(ddof=1))


def to_training_set(records, stats) -> TrainingSet:
    volumes = np.stack([r.volume for r in records])
    clinical = encode_records(records, stats)
    labels = np.array([r.recurrence for r in records], dtype=np.int64)
    return TrainingSet(volumes, clinical, labels)


def run_fold(
    cohort,
    split: FoldSplit,
    fold_index: int,
    train_config: TrainConfig,
    model_config: ModelConfig | None = None,
) -> FoldResult:
    """Train on the out-of-fold records and score accuracy on the fold.

    Normalization stats come from the training portion only, and the
    model is built fresh with seed = train_config.seed XOR fold_index.
    """
    if not 0 <= fold_index < split.k:
        raise InvalidK(f"fold_index {fold_index} outside [0, {split.k})")
    train_records = [cohort[i] for i in split.train_indices(fold_index)]
    test_records = [cohort[i] for i in split.test_indices(fold_index)]
    stats = compute_normalization_stats(train_records)
    train_set = to_training_set(train_records, stats)
    test_set = to_training_set(test_records, stats)

    fold_seed = int(train_config.seed) ^ fold_index
    if model_config is None:
        model_config = ModelConfig(input_shape=cohort[0].volume.shape)
    model_config = replace(
        model_config,
        input_shape=tuple(cohort[0].volume.shape),
        clinical_dim=ENCODED_DIM,
        seed=fold_seed,
    )
    model = build_model(model_config)
    result = train(model, train_set, replace(train_config, seed=fold_seed ^ _SHUFFLE_SALT))
    probs = predict(result.model, test_set)
    acc = accuracy(test_set.labels, probs)
    log.info(
        "fold %d (alpha=%.3g): test accuracy %.3f", fold_index, train_config.alpha, acc
    )
    return FoldResult(fold_index, acc, [row.total_loss for row in result.trace])


@dataclass
class SweepRow:
    alpha: float
    fold_accuracies: list[float]
    average: float
    sd: float
    p_value: float | None  # None on the Shannon baseline row
    better_and_significant: bool

    @classmethod
    def from_folds(cls, alpha, fold_accuracies, p_value=None, baseline_average=None):
        avg, sd = mean_sd(fold_accuracies)
        flag = (
            p_value is not None
            and baseline_average is not None
            and avg > baseline_average
            and p_value < 0.05
        )
        return cls(float(alpha), [float(a) for a in fold_accuracies], avg, sd, p_value, flag)

    @property
    def is_baseline(self) -> bool:
        return self.p_value is None


def default_alpha_grid() -> list[float]:
    """0.1 through 3.9 in steps of 0.2, plus the mandatory 1.0 baseline."""
    return sorted({round(0.1 + 0.2 * i, 1) for i in range(20)} | {1.0})


@dataclass
class SweepConfig:
    alpha_grid: list[float] = field(default_factory=default_alpha_grid)
    k: int = 5
    base_seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    test_kind: str = "welch"
    cohort_path: str | None = None  # set when loaded from a config file

    def validate(self):
        if not self.alpha_grid:
            raise InvalidConfig("alpha grid is empty")
        if not any(_as_alpha(a).is_shannon_limit for a in self.alpha_grid):
            raise InvalidConfig("alpha grid must contain the Shannon baseline 1.0")
        for a in self.alpha_grid:
            _as_alpha(a)
        if self.k < 2:
            raise InvalidK("k must be >= 2")


def run_sweep(cohort, config: SweepConfig, parallel_folds: int = 1) -> list[SweepRow]:
    """Run all folds for every alpha on a shared partition and aggregate.

    Rows come back in grid order; each non-baseline row carries the
    two-sided p-value of its fold accuracies against the baseline's.
    """
    config.validate()
    split = kfold_split(len(cohort), config.k, config.base_seed)

    def fold_accs(alpha: float) -> list[float]:
        cfg = replace(config.train, alpha=float(alpha), seed=config.base_seed)
        folds = range(config.k)
        if parallel_folds > 1:
            with ThreadPoolExecutor(max_workers=parallel_folds) as pool:
                results = list(
                    pool.map(lambda f: run_fold(cohort, split, f, cfg, config.model), folds)
                )
        else:
            results = [run_fold(cohort, split, f, cfg, config.model) for f in folds]
        return [r.test_accuracy for r in results]

    accs_by_alpha = {alpha: fold_accs(alpha) for alpha in config.alpha_grid}
    baseline_alpha = next(a for a in config.alpha_grid if _as_alpha(a).is_shannon_limit)
    baseline = accs_by_alpha[baseline_alpha]
    baseline_avg, _ = mean_sd(baseline)

    rows = []
    for alpha in config.alpha_grid:
        accs = accs_by_alpha[alpha]
        if _as_alpha(alpha).is_shannon_limit:
            rows.append(SweepRow.from_folds(alpha, accs))
        else:
            p = significance_test(accs, baseline, kind=config.test_kind)
            rows.append(SweepRow.from_folds(alpha, accs, p, baseline_avg))
    return rows

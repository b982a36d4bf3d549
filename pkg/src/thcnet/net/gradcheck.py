"""Exhaustive central-difference verification of the analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

from ..entropy import BinaryBatch, binary_thc_loss, _as_alpha
from ..errors import InvalidConfig
from .losses import mse_loss, total_loss
from .model import Batch, MultitaskModel

#: Largest model checked exhaustively (one forward pair per scalar).
MAX_CHECK_PARAMS = 10_000


@dataclass
class GradientCheckReport:
    block_errors: dict[str, float]
    threshold: float = 1e-4

    @property
    def max_relative_error(self) -> float:
        return max(self.block_errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.threshold


def batch_loss(model: MultitaskModel, batch: Batch, alpha, weights=(1.0, 1.0)) -> float:
    out = model.forward(batch.volumes, batch.clinical)
    rec = mse_loss(batch.volumes, out.reconstruction)
    pred = binary_thc_loss(BinaryBatch(batch.labels, out.recurrence_prob), alpha)
    return total_loss(rec, pred, weights)


def gradient_check(
    model: MultitaskModel,
    batch: Batch,
    alpha,
    weights=(1.0, 1.0),
    step: float = 1e-4,
    threshold: float = 1e-4,
) -> GradientCheckReport:
    """Compare `model.backward` against central finite differences.

    Perturbs every scalar parameter by +/- step, so the model must be
    small (<= MAX_CHECK_PARAMS parameters).
    """
    if model.param_count() > MAX_CHECK_PARAMS:
        raise InvalidConfig(
            f"model has {model.param_count()} parameters; gradient_check "
            f"supports at most {MAX_CHECK_PARAMS}"
        )
    a = _as_alpha(alpha)
    model.forward(batch.volumes, batch.clinical)
    analytic = model.backward(batch, a, weights)
    params = model.parameters()

    errors: dict[str, float] = {}
    for name, p in params.items():
        g = analytic[name]
        worst = 0.0
        for i in range(p.size):
            orig = p.flat[i]
            p.flat[i] = orig + step
            lp = batch_loss(model, batch, a, weights)
            p.flat[i] = orig - step
            lm = batch_loss(model, batch, a, weights)
            p.flat[i] = orig
            numeric = (lp - lm) / (2.0 * step)
            denom = max(abs(numeric), abs(g.flat[i]), 1e-6)
            worst = max(worst, abs(numeric - g.flat[i]) / denom)
        errors[name] = worst
    return GradientCheckReport(errors, threshold)

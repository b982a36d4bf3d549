"""Differentiable network core: model, losses, training, verification."""

from .checkpoint import load_model, save_model
from .gradcheck import GradientCheckReport, batch_loss, gradient_check
from .losses import mse_loss, total_loss
from .model import Batch, ModelConfig, MultitaskModel, MultitaskOutput, build_model
from .optim import Adam, Sgd, make_optimizer
from .train import (
    EpochStats,
    TrainConfig,
    TrainingSet,
    TrainResult,
    predict,
    read_trace_csv,
    train,
    write_trace_csv,
)

__all__ = [
    "Adam",
    "Batch",
    "EpochStats",
    "GradientCheckReport",
    "ModelConfig",
    "MultitaskModel",
    "MultitaskOutput",
    "Sgd",
    "TrainConfig",
    "TrainingSet",
    "TrainResult",
    "batch_loss",
    "build_model",
    "gradient_check",
    "load_model",
    "make_optimizer",
    "mse_loss",
    "predict",
    "read_trace_csv",
    "save_model",
    "total_loss",
    "train",
    "write_trace_csv",
]

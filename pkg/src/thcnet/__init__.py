"""Tsallis-Havrda-Charvat entropy losses, a small multitask
encoder/decoder network with analytic gradients, and a five-fold
alpha-sweep evaluation harness on synthetic cohorts."""

__version__ = "0.1.0"

from .entropy import (  # noqa: F401
    Alpha,
    BinaryBatch,
    ProbabilityVector,
    binary_shannon_loss,
    binary_thc_loss,
    binary_thc_loss_grad,
    clamp_probability,
    shannon_cross_entropy,
    shannon_entropy,
    thc_cross_entropy,
    thc_entropy,
    thc_generator,
)
from .net import (  # noqa: F401
    ModelConfig,
    TrainConfig,
    build_model,
    gradient_check,
    mse_loss,
    total_loss,
    train,
)
from .datagen import CohortConfig, generate_cohort  # noqa: F401
from .experiment import (  # noqa: F401
    SweepConfig,
    accuracy,
    kfold_split,
    mean_sd,
    run_fold,
    run_sweep,
    significance_test,
)

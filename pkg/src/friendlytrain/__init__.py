"""Friendly training: curricula that simplify hard examples, not the model.

The package trains small dense/convolutional classifiers three ways:
classic mini-batch training (CT), friendly training (FT, inner-loop
input perturbation with a decaying budget), and easy-examples-first
(EEF, per-batch selection of the lowest-loss examples). Everything is
seeded and deterministic; see the README for the CLI and config format.
"""

from .curriculum import (
    STRATEGIES,
    TrainerConfig,
    TrainResult,
    confidence_mask,
    ct_step,
    eef_step,
    ft_step,
    plan_k,
    plan_tau,
    resolve_horizon,
    simplify_batch,
    train,
)
from .data import (
    Dataset,
    batch_indices,
    batch_iter,
    load_amat,
    render_amat,
    split_dataset,
    two_moons,
    write_amat,
)
from .errors import (
    ConfigError,
    ContractViolation,
    FriendlyTrainError,
    InputError,
    NumericFailure,
    ParseError,
    ShapeError,
)
from .estimator import FriendlyTrainingClassifier
from .evaluation import (
    RepeatSummary,
    RunRecord,
    error_rate,
    load_snapshot,
    save_snapshot,
    seeded_repeat,
    select_best,
)
from .nn import (
    GRAD_TOL,
    MODE_EVAL,
    MODE_SIMPLIFY,
    MODE_TRAIN,
    Network,
    build_network,
    cross_entropy,
    grad_check,
    layer_report,
    preset_report,
    softmax,
)
from .optim import Adam, AdamSettings, delta_step

__version__ = "0.1.0"

__all__ = [
    "STRATEGIES",
    "TrainerConfig",
    "TrainResult",
    "confidence_mask",
    "ct_step",
    "eef_step",
    "ft_step",
    "plan_k",
    "plan_tau",
    "resolve_horizon",
    "simplify_batch",
    "train",
    "Dataset",
    "batch_indices",
    "batch_iter",
    "load_amat",
    "render_amat",
    "split_dataset",
    "two_moons",
    "write_amat",
    "ConfigError",
    "ContractViolation",
    "FriendlyTrainError",
    "InputError",
    "NumericFailure",
    "ParseError",
    "ShapeError",
    "FriendlyTrainingClassifier",
    "RepeatSummary",
    "RunRecord",
    "error_rate",
    "load_snapshot",
    "save_snapshot",
    "seeded_repeat",
    "select_best",
    "GRAD_TOL",
    "MODE_EVAL",
    "MODE_SIMPLIFY",
    "MODE_TRAIN",
    "Network",
    "build_network",
    "cross_entropy",
    "grad_check",
    "layer_report",
    "preset_report",
    "softmax",
    "Adam",
    "AdamSettings",
    "delta_step",
    "__version__",
]

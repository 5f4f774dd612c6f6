"""sslab: small-sample image classification experiments at desk scale.

Mini residual networks on a hand-rolled reverse-mode autodiff core,
trained on synthetic fundus-like images with analytically known class
separability, evaluated with bootstrap AUC statistics and ensembling.
"""

__version__ = "0.1.0"

from .tensor import (
    Tensor,
    Tape,
    ShapeMismatchError,
    ContractError,
    forward_op,
    backpropagate,
    finite_difference_check,
)
from .metrics import ScoreSet, accuracy, roc_curve, auc
from .stats import BootstrapConfig, BootstrapReport, bootstrap_auc, benjamini_hochberg, significance_table
from .losses import BceLoss, BalancedCosineLoss, bce_loss, balanced_loss
from .optim import OptimizerState, sgd_step, lr_at
from .model import (
    ModelConfig,
    Model,
    ResidualUnitParams,
    residual_forward,
    build_model,
    predict_proba,
    save_checkpoint,
    load_checkpoint,
    CheckpointFormatError,
)
from .data import (
    ManifestEntry,
    Manifest,
    PartitionSpec,
    SyntheticSpec,
    split_patients,
    generate_synthetic,
    dataset_stats,
)
from .ensemble import EnsembleSpec, RegressionFit, ensemble_scores, fit_linear

__all__ = [
    "Tensor", "Tape", "ShapeMismatchError", "ContractError",
    "forward_op", "backpropagate", "finite_difference_check",
    "ScoreSet", "accuracy", "roc_curve", "auc",
    "BootstrapConfig", "BootstrapReport", "bootstrap_auc", "benjamini_hochberg", "significance_table",
    "BceLoss", "BalancedCosineLoss", "bce_loss", "balanced_loss",
    "OptimizerState", "sgd_step", "lr_at",
    "ModelConfig", "Model", "ResidualUnitParams", "residual_forward", "build_model",
    "predict_proba", "save_checkpoint", "load_checkpoint", "CheckpointFormatError",
    "ManifestEntry", "Manifest", "PartitionSpec", "SyntheticSpec",
    "split_patients", "generate_synthetic", "dataset_stats",
    "EnsembleSpec", "RegressionFit", "ensemble_scores", "fit_linear",
]

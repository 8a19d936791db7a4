"""Supervised encoder baseline for metonymy detection."""

from baseline.data import (
    BaselineError,
    Instance,
    LoadError,
    load_instances,
    mark_target,
    write_predictions,
)
from baseline.train import TrainConfig, TrainResult, assign_folds, train_and_predict

__all__ = [
    "BaselineError",
    "Instance",
    "LoadError",
    "TrainConfig",
    "TrainResult",
    "assign_folds",
    "load_instances",
    "mark_target",
    "train_and_predict",
    "write_predictions",
]

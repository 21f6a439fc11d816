"""Meta-learned predictive CFR."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .distribution import GameDistribution
from .predictor import Architecture, PredictorParams, predict
from .trainer import TrainConfig, TrainingDiverged, train, unrolled_meta_loss

__all__ = [
    "Architecture",
    "CheckpointError",
    "GameDistribution",
    "PredictorParams",
    "TrainConfig",
    "TrainingDiverged",
    "load_checkpoint",
    "predict",
    "save_checkpoint",
    "train",
    "unrolled_meta_loss",
]

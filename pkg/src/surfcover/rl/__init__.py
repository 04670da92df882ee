"""Learned coverage policy: scale-grouped CNN extractor plus soft actor-critic."""

from .buffer import ReplayBuffer
from .nets import PolicyHead, QHead, ScaleGroupedCNN
from .sac import (
    SacAgent,
    TrainingDiverged,
    evaluate_policy,
    load_checkpoint,
    rollout,
    save_checkpoint,
    train,
    write_training_log,
)

__all__ = [
    "PolicyHead",
    "QHead",
    "ReplayBuffer",
    "SacAgent",
    "ScaleGroupedCNN",
    "TrainingDiverged",
    "evaluate_policy",
    "load_checkpoint",
    "rollout",
    "save_checkpoint",
    "train",
    "write_training_log",
]

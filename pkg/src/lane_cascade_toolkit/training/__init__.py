"""セグメンテーションの損失関数、カリキュラム、学習ループ"""

from .curriculum import (
    CurriculumController,
    CurriculumState,
    PolynomialDecay,
    TrainingPhase,
    curriculum_step,
)
from .dataset import LaneSegmentationDataset
from .losses import (
    InstanceLossConfig,
    PairSampler,
    SegmentationLosses,
    binary_phase_loss,
    instance_pair_loss,
)
from .seg_trainer import SegmentationTrainer, SegTrainingConfig, SegTrainingResult

__all__ = [
    "CurriculumController",
    "CurriculumState",
    "InstanceLossConfig",
    "LaneSegmentationDataset",
    "PairSampler",
    "PolynomialDecay",
    "SegTrainingConfig",
    "SegTrainingResult",
    "SegmentationLosses",
    "SegmentationTrainer",
    "TrainingPhase",
    "binary_phase_loss",
    "curriculum_step",
    "instance_pair_loss",
]

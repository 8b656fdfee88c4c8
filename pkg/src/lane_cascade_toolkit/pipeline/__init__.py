"""カスケードの推論、評価、アブレーション、各コマンドの実行"""

from .ablation import AblationResult, DescriptorAblation, ablate_descriptor_sizes
from .cascade import CascadeResult, CascadeRunner, ClassifiedBoundary, cascade_infer
from .evaluation import CascadeEvaluator, Evaluation, evaluate
from .workflow import DatasetSplits, Workflow, train_classification, train_segmentation

__all__ = [
    "AblationResult",
    "CascadeEvaluator",
    "CascadeResult",
    "CascadeRunner",
    "ClassifiedBoundary",
    "DatasetSplits",
    "DescriptorAblation",
    "Evaluation",
    "Workflow",
    "ablate_descriptor_sizes",
    "cascade_infer",
    "evaluate",
    "train_classification",
    "train_segmentation",
]

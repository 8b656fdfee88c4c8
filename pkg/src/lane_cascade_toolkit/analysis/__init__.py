"""評価指標とレポート"""

from .metrics import (
    ClassificationMetrics,
    EvalCounts,
    ImageCounts,
    LaneAssignment,
    LaneMetrics,
    MetricsConfig,
    MetricsReport,
    accuracy,
    classification_accuracy,
    fn_rate,
    fp_rate,
    match_lanes,
)

__all__ = [
    "ClassificationMetrics",
    "EvalCounts",
    "ImageCounts",
    "LaneAssignment",
    "LaneMetrics",
    "MetricsConfig",
    "MetricsReport",
    "accuracy",
    "classification_accuracy",
    "fn_rate",
    "fp_rate",
    "match_lanes",
]

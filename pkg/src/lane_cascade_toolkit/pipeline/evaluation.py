"""カスケード推論の結果をTuSimple方式の指標と分類精度で評価する"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

from tqdm import tqdm

from lane_cascade_toolkit.analysis.metrics import (
    ClassificationMetrics,
    EvalCounts,
    LaneAssignment,
    LaneMetrics,
    MetricsConfig,
    MetricsReport,
)
from lane_cascade_toolkit.classification.association import GroundTruthAssociation
from lane_cascade_toolkit.data.types import ClassLabel, Sample
from lane_cascade_toolkit.errors import UndefinedMetricError
from lane_cascade_toolkit.geometry import Polyline
from lane_cascade_toolkit.pipeline.cascade import CascadeResult, CascadeRunner

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Evaluation:
    """
    Attributes:
        report: 指標
        results: 画像ごとの推論結果 (サンプル順)
    """

    report: MetricsReport
    results: tuple[CascadeResult, ...]


class CascadeEvaluator:
    """サンプルごとに推論し、集計を結合してレポートにする"""

    @staticmethod
    def class_targets(
        result: CascadeResult, sample: Sample, runner: CascadeRunner, config: MetricsConfig
    ) -> list[Optional[int]]:
        """検出ごとの正解の出力インデックス (対応する正解がない、または無視クラスなら None)"""
        gt: list[tuple[Polyline, ClassLabel]] = list(zip(sample.boundaries, sample.classes))
        targets: list[Optional[int]] = []
        for boundary in result.boundaries:
            label: Optional[ClassLabel] = GroundTruthAssociation.associate_across_frames(
                boundary.polyline,
                result.frame_size,
                gt,
                sample.image_size,
                config.threshold_px,
                config.resolution,
            )
            targets.append(runner.scheme.remap(label) if label is not None else None)
        return targets

    @staticmethod
    def evaluate(
        samples: Sequence[Sample], runner: CascadeRunner, config: MetricsConfig = MetricsConfig()
    ) -> Evaluation:
        """
        データセット全体を評価

        Args:
            samples: 正解付きのサンプル
            runner: 読み込み済みのカスケード
            config: 評価の設定

        Returns:
            Evaluation

        Raises:
            UndefinedMetricError: サンプルが空、または正解レーンがなく指標が定義できない場合
        """
        if not samples:
            raise UndefinedMetricError("Cannot evaluate an empty dataset", {"images": 0})

        counts: EvalCounts = EvalCounts()
        results: list[CascadeResult] = []
        predictions: list[Optional[int]] = []
        targets: list[Optional[int]] = []

        progress = tqdm(
            samples, desc="evaluate", leave=False, disable=not logger.isEnabledFor(logging.INFO)
        )
        for sample in progress:
            result: CascadeResult = runner.infer(sample.image, sample.source_id)
            results.append(result)

            assignment: LaneAssignment = LaneMetrics.evaluate_image(
                result.polylines,
                result.frame_size,
                sample.boundaries,
                sample.image_size,
                config,
                sample.source_id,
            )
            counts = counts.merge(EvalCounts((assignment.counts,)))
            predictions += [b.class_index for b in result.boundaries]
            targets += CascadeEvaluator.class_targets(result, sample, runner, config)

        cls_accuracy: Optional[float] = None
        try:
            cls_accuracy = ClassificationMetrics.classification_accuracy(predictions, targets)
        except UndefinedMetricError:
            logger.warning("No detection matched a labeled boundary; classification not scored")

        confusion = ClassificationMetrics.confusion_matrix(
            predictions, targets, runner.scheme.output_names
        )
        report: MetricsReport = MetricsReport.from_counts(counts, config, cls_accuracy, confusion)
        logger.info(
            "Evaluated %d images: accuracy=%.4f FP=%.4f FN=%.4f",
            len(samples),
            report.accuracy,
            report.fp_rate,
            report.fn_rate,
        )
        return Evaluation(report, tuple(results))


def evaluate(
    samples: Sequence[Sample], runner: CascadeRunner, config: MetricsConfig = MetricsConfig()
) -> MetricsReport:
    return CascadeEvaluator.evaluate(samples, runner, config).report

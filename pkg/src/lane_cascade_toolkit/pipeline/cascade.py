"""
2段カスケードによる推論

画像1枚につきセグメンテーションの順伝播1回と、全境界のディスクリプタを束ねた
分類器の順伝播1回だけを行う。
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from lane_cascade_toolkit import K_MAX
from lane_cascade_toolkit.classification.descriptor import DescriptorBatch, DescriptorExtractor
from lane_cascade_toolkit.classification.model import ClsModel, DescriptorClassifier
from lane_cascade_toolkit.classification.taxonomy import TaxonomyScheme
from lane_cascade_toolkit.errors import CompatibilityError
from lane_cascade_toolkit.geometry import Polyline
from lane_cascade_toolkit.geometry.polyline import Size
from lane_cascade_toolkit.segmentation.checkpoint import load_seg_checkpoint
from lane_cascade_toolkit.segmentation.decode import DetectedBoundary, decode_instances
from lane_cascade_toolkit.segmentation.inference import SegmentationInference, SegOutput
from lane_cascade_toolkit.segmentation.models import SegModel

logger = logging.getLogger(__name__)

STAGES: tuple[str, ...] = ("segmentation", "decode", "descriptor", "classification")


@dataclass(frozen=True, eq=False)
class ClassifiedBoundary:
    """
    Attributes:
        instance_id: セグメンテーションの出力チャネル
        polyline: ネットワーク解像度のポリライン
        class_index: 分類器の出力インデックス
        class_name: クラス体系での名前
        confidence: ソフトマックスの最大値
    """

    instance_id: int
    polyline: Polyline
    class_index: int
    class_name: str
    confidence: float


@dataclass(frozen=True, eq=False)
class CascadeResult:
    """
    1枚分の推論結果

    Attributes:
        boundaries: 分類済みの境界 (instance_id 昇順、最大 K_MAX 件)
        frame_size: ポリラインの座標系 (ネットワーク入力の W, H)
        timings: 段ごとの処理時間 (ミリ秒)
        source_id: 画像ID
    """

    boundaries: tuple[ClassifiedBoundary, ...]
    frame_size: Size
    timings: dict[str, float] = field(default_factory=dict)
    source_id: str = ""

    @property
    def polylines(self) -> list[Polyline]:
        return [b.polyline for b in self.boundaries]

    def __len__(self) -> int:
        return len(self.boundaries)


def _elapsed_ms(start: int) -> float:
    # 分解能より短い区間でも正の値にする
    return max((time.perf_counter_ns() - start) / 1e6, 1e-6)


class CascadeRunner:
    """
    2つのチェックポイントを一度だけ読み込み、画像ごとの推論を行う

    Attributes:
        calls: 段ごとのモデル呼び出し回数 ("segmentation" と "classification")
    """

    def __init__(
        self,
        seg_model: SegModel,
        cls_model: ClsModel,
        scheme: TaxonomyScheme,
        min_points: int = 3,
        device: str | torch.device = "cpu",
    ) -> None:
        CascadeRunner.check_compatible(seg_model, cls_model, scheme)
        self.device: torch.device = torch.device(device)
        self.seg_model: SegModel = seg_model.to(self.device).eval()
        self.cls_model: ClsModel = cls_model.to(self.device).eval()
        self.scheme: TaxonomyScheme = scheme
        self.min_points: int = min_points
        self.calls: dict[str, int] = {"segmentation": 0, "classification": 0}

    @staticmethod
    def check_compatible(
        seg_model: SegModel,
        cls_model: ClsModel,
        scheme: TaxonomyScheme,
        descriptor_size: Optional[int] = None,
    ) -> None:
        """
        Raises:
            CompatibilityError: インスタンスヘッドでない、出力数やディスクリプタサイズが合わない場合
        """
        if seg_model.head_channels != K_MAX + 1:
            raise CompatibilityError(
                f"Segmentation model has a {seg_model.head_channels}-channel head; "
                f"the cascade needs an instance head with {K_MAX + 1} channels"
            )
        if cls_model.config.num_outputs != scheme.num_outputs:
            raise CompatibilityError(
                f"Classifier has {cls_model.config.num_outputs} outputs but scheme "
                f"{scheme.name} has {scheme.num_outputs}"
            )
        if descriptor_size is not None and descriptor_size != cls_model.config.descriptor_size:
            raise CompatibilityError(
                f"Configured descriptor size {descriptor_size} does not match the classifier's "
                f"{cls_model.config.descriptor_size}"
            )

    @classmethod
    def from_checkpoints(
        cls,
        seg_checkpoint: str | Path,
        cls_checkpoint: str | Path,
        descriptor_size: Optional[int] = None,
        min_points: int = 3,
        device: str | torch.device = "cpu",
    ) -> "CascadeRunner":
        """
        チェックポイントを読み込んで互換性を検証

        Args:
            seg_checkpoint: セグメンテーションのチェックポイント
            cls_checkpoint: 分類器のチェックポイント
            descriptor_size: 設定上のディスクリプタサイズ (省略時は分類器に合わせる)
            min_points: 復号時の最小点数
            device: 推論デバイス

        Raises:
            FileNotFoundError: チェックポイントがない場合
            CompatibilityError: 2つのチェックポイントが組み合わせられない場合
        """
        seg_model, seg_payload = load_seg_checkpoint(seg_checkpoint, device)
        cls_model, scheme, cls_payload = DescriptorClassifier.load_checkpoint(
            cls_checkpoint, device
        )

        trained_against: Optional[str] = cls_payload.get("seg_config_hash")
        if trained_against is not None and trained_against != seg_payload["config_hash"]:
            raise CompatibilityError(
                f"{Path(cls_checkpoint).name} was trained on detections of a different "
                f"segmentation model than {Path(seg_checkpoint).name}"
            )
        CascadeRunner.check_compatible(seg_model, cls_model, scheme, descriptor_size)

        logger.info(
            "Loaded cascade: %s (%s), %s (S=%d, %s)",
            Path(seg_checkpoint).name,
            seg_model.config.architecture,
            Path(cls_checkpoint).name,
            cls_model.config.descriptor_size,
            scheme.name,
        )
        return cls(seg_model, cls_model, scheme, min_points, device)

    @property
    def input_size(self) -> Size:
        return self.seg_model.config.input_size

    def reset_counters(self) -> None:
        self.calls = {"segmentation": 0, "classification": 0}

    def infer(self, image: np.ndarray, source_id: str = "") -> CascadeResult:
        """
        画像1枚を推論

        Args:
            image: 任意解像度の H×W×3 uint8 画像
            source_id: 結果に付ける画像ID

        Returns:
            CascadeResult (境界がない画像では分類器を呼ばない)
        """
        timings: dict[str, float] = {}
        total_start: int = time.perf_counter_ns()

        start: int = time.perf_counter_ns()
        resized: np.ndarray = SegmentationInference.resize_image(image, self.input_size)
        output: SegOutput = SegmentationInference.forward(
            self.seg_model, SegmentationInference.to_tensor([resized]).to(self.device)
        )[0]
        self.calls["segmentation"] += 1
        timings["segmentation"] = _elapsed_ms(start)

        start = time.perf_counter_ns()
        detected: list[DetectedBoundary] = decode_instances(output, self.min_points)
        timings["decode"] = _elapsed_ms(start)

        start = time.perf_counter_ns()
        batch: DescriptorBatch = DescriptorExtractor.batch_descriptors(
            resized, detected, self.cls_model.config.descriptor_size, source_id
        )
        timings["descriptor"] = _elapsed_ms(start)

        start = time.perf_counter_ns()
        predictions: list[tuple[int, float]] = DescriptorClassifier.classify(
            self.cls_model, batch
        )
        if len(batch):
            self.calls["classification"] += 1
        timings["classification"] = _elapsed_ms(start)
        timings["total"] = _elapsed_ms(total_start)

        boundaries: tuple[ClassifiedBoundary, ...] = tuple(
            ClassifiedBoundary(
                instance_id=d.instance_id,
                polyline=d.polyline,
                class_index=index,
                class_name=self.scheme.output_names[index],
                confidence=confidence,
            )
            for d, (index, confidence) in zip(detected, predictions)
        )
        logger.debug(
            "%s: %d boundaries in %.1f ms", source_id or "image", len(boundaries), timings["total"]
        )
        return CascadeResult(boundaries, self.input_size, timings, source_id)


def cascade_infer(
    image: np.ndarray,
    seg_checkpoint: str | Path,
    cls_checkpoint: str | Path,
    min_points: int = 3,
    device: str | torch.device = "cpu",
) -> CascadeResult:
    """チェックポイントを読み込んで画像1枚を推論する (繰り返す場合は CascadeRunner を使う)"""
    runner: CascadeRunner = CascadeRunner.from_checkpoints(
        seg_checkpoint, cls_checkpoint, min_points=min_points, device=device
    )
    return runner.infer(image)

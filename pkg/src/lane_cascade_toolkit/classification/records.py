"""
セグメンテーション出力と正解クラスを結びつけた中間データ

検出ごとにネットワーク解像度の画像、境界ピクセル、対応する正解クラスを持つ。
ディスクリプタのサイズを変えても同じ記録から学習データを作り直せる。
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from tqdm import tqdm

from lane_cascade_toolkit.classification.association import GroundTruthAssociation
from lane_cascade_toolkit.classification.descriptor import DescriptorExtractor, DescriptorSource
from lane_cascade_toolkit.classification.taxonomy import TaxonomyScheme
from lane_cascade_toolkit.classification.trainer import DescriptorPairs
from lane_cascade_toolkit.data.types import ClassLabel, Sample
from lane_cascade_toolkit.geometry import Polyline
from lane_cascade_toolkit.segmentation.decode import DetectedBoundary, decode_instances
from lane_cascade_toolkit.segmentation.inference import SegmentationInference, SegOutput
from lane_cascade_toolkit.segmentation.models import SegModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DetectionRecord:
    """
    Attributes:
        source_id: 画像ID
        boundary_index: 画像内での検出順
        image: ネットワーク解像度の H×W×3 画像
        pixels: 境界ピクセル (x, y)。ラスタ順
        polyline: 行平均したポリライン (ネットワーク解像度)
        label: 対応付いた正解クラス (閾値内に正解がなければ None)
    """

    source_id: str
    boundary_index: int
    image: np.ndarray
    pixels: np.ndarray
    polyline: Polyline
    label: Optional[ClassLabel]


class DetectionRecorder:
    """学習済みセグメンテーションモデルで検出記録を集める"""

    @staticmethod
    def collect(
        model: SegModel,
        samples: Sequence[Sample],
        threshold_px: float = 20.0,
        min_points: int = 3,
        frame: str = "network",
        batch_size: int = 8,
    ) -> list[DetectionRecord]:
        """
        サンプルごとに推論・復号し、各検出に正解クラスを対応付ける

        Args:
            model: セグメンテーションモデル
            samples: 正解付きのサンプル
            threshold_px: 対応付けの平均距離の上限
            min_points: 復号時の最小点数
            frame: threshold_px の座標系 ("network" または "source")
            batch_size: 推論のバッチサイズ

        Returns:
            全サンプルの検出記録 (サンプル順、画像内は検出順)
        """
        size = model.config.input_size
        records: list[DetectionRecord] = []

        batches = range(0, len(samples), batch_size)
        progress = tqdm(
            batches, desc="detections", leave=False, disable=not logger.isEnabledFor(logging.INFO)
        )
        for start in progress:
            chunk: Sequence[Sample] = samples[start : start + batch_size]
            images: list[np.ndarray] = [
                SegmentationInference.resize_image(s.image, size) for s in chunk
            ]
            outputs: list[SegOutput] = SegmentationInference.forward(
                model, SegmentationInference.to_tensor(images)
            )

            for sample, image, output in zip(chunk, images, outputs):
                gt: list[tuple[Polyline, ClassLabel]] = list(
                    zip(sample.boundaries, sample.classes)
                )
                detected: list[DetectedBoundary] = decode_instances(output, min_points)
                for index, boundary in enumerate(detected):
                    label: Optional[ClassLabel] = GroundTruthAssociation.associate_across_frames(
                        boundary.polyline, size, gt, sample.image_size, threshold_px, frame
                    )
                    records.append(
                        DetectionRecord(
                            source_id=sample.source_id,
                            boundary_index=index,
                            image=image,
                            pixels=boundary.pixels,
                            polyline=boundary.polyline,
                            label=label,
                        )
                    )

        associated: int = sum(1 for r in records if r.label is not None)
        logger.info(
            "Collected %d detections from %d images (%d associated)",
            len(records),
            len(samples),
            associated,
        )
        return records

    @staticmethod
    def to_pairs(
        records: Sequence[DetectionRecord], size: int, scheme: TaxonomyScheme
    ) -> DescriptorPairs:
        """
        対応付いた検出からサイズ size のディスクリプタと出力インデックスの組を作る

        正解のない検出と、クラス体系で無視されるクラスは除く。
        """
        pairs: list[tuple[np.ndarray, int]] = []
        for record in records:
            if record.label is None:
                continue
            target: Optional[int] = scheme.remap(record.label)
            if target is None:
                continue
            descriptor = DescriptorExtractor.extract_descriptor(
                record.image,
                record.pixels,
                size,
                DescriptorSource(record.source_id, record.boundary_index),
            )
            pairs.append((descriptor.pixels, target))
        return DescriptorPairs.from_pairs(pairs, size)


collect_detections = DetectionRecorder.collect

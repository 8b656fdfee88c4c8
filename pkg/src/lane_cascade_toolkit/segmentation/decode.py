"""チャネル出力から離散的なレーン境界インスタンスへの変換"""

from dataclasses import dataclass

import numpy as np

from lane_cascade_toolkit import K_MAX
from lane_cascade_toolkit.geometry import Polyline, row_average
from lane_cascade_toolkit.segmentation.inference import SegOutput


@dataclass(frozen=True, eq=False)
class DetectedBoundary:
    """
    検出されたレーン境界

    Attributes:
        instance_id: 出力チャネル (1..K_MAX)
        polyline: 行平均したポリライン
        pixels: 形状 (N, 2) の (x, y)。元画像のラスタ順 (上から下、左から右)
    """

    instance_id: int
    polyline: Polyline
    pixels: np.ndarray


class InstanceDecoder:
    """argmax → 行平均 → 点数フィルタ の順で境界を取り出す"""

    @staticmethod
    def decode_instances(
        output: SegOutput | np.ndarray, min_points: int = 3
    ) -> list[DetectedBoundary]:
        """
        ネットワーク出力をレーン境界のリストに変換

        Args:
            output: SegOutput、または H×W×C のロジット/確率
            min_points: これより少ない行しか持たない境界は捨てる

        Returns:
            instance_id 昇順の検出結果 (最大K_MAX件)

        Raises:
            ValueError: min_points が1未満の場合
        """
        if min_points < 1:
            raise ValueError(f"min_points must be >= 1, got {min_points}")

        scores: np.ndarray = output.logits if isinstance(output, SegOutput) else output
        labels: np.ndarray = np.argmax(scores, axis=-1)

        detections: list[DetectedBoundary] = []
        for channel in range(1, min(scores.shape[-1], K_MAX + 1)):
            ys, xs = np.nonzero(labels == channel)
            if ys.size == 0:
                continue
            pixels: np.ndarray = np.stack([xs, ys], axis=1)
            polyline: Polyline = row_average(pixels)
            if polyline.num_points < min_points:
                continue
            detections.append(DetectedBoundary(channel, polyline, pixels))

        return detections


decode_instances = InstanceDecoder.decode_instances

"""検出した境界と正解境界の対応付け (分類器の学習データ作成用)"""

from typing import Optional, Sequence

from lane_cascade_toolkit.data.types import ClassLabel
from lane_cascade_toolkit.geometry import Polyline, align_to_gt, average_distance
from lane_cascade_toolkit.geometry.polyline import Size


class GroundTruthAssociation:
    """平均水平距離で最も近い正解境界を探す"""

    @staticmethod
    def nearest(distances: Sequence[Optional[float]]) -> Optional[tuple[int, float]]:
        """
        距離が最小の正解 (None は比較不能として飛ばす)

        Returns:
            (正解インデックス, 平均距離)。同距離なら小さいインデックス
        """
        best: Optional[tuple[int, float]] = None
        for index, distance in enumerate(distances):
            if distance is None:
                continue
            if best is None or distance < best[1]:
                best = (index, distance)
        return best

    @staticmethod
    def _select(
        distances: Sequence[Optional[float]],
        labels: Sequence[ClassLabel],
        threshold_px: float,
    ) -> Optional[ClassLabel]:
        if threshold_px <= 0:
            raise ValueError(f"threshold_px must be positive, got {threshold_px}")
        nearest: Optional[tuple[int, float]] = GroundTruthAssociation.nearest(distances)
        if nearest is None or nearest[1] >= threshold_px:
            return None
        return labels[nearest[0]]

    @staticmethod
    def associate_to_gt(
        detected: Polyline,
        gt: Sequence[tuple[Polyline, ClassLabel]],
        threshold_px: float = 20.0,
    ) -> Optional[ClassLabel]:
        """
        検出に最も近い正解のクラスを返す (距離が閾値以上なら None)

        Args:
            detected: 検出した境界 (正解と同じ座標系)
            gt: (正解ポリライン, クラス) のリスト
            threshold_px: 採用する平均距離の上限 (この値ちょうどは不採用)

        Raises:
            ValueError: threshold_px が正でない場合
        """
        distances: list[Optional[float]] = [average_distance(detected, g) for g, _ in gt]
        return GroundTruthAssociation._select(distances, [c for _, c in gt], threshold_px)

    @staticmethod
    def associate_across_frames(
        detected: Polyline,
        detected_size: Size,
        gt: Sequence[tuple[Polyline, ClassLabel]],
        gt_size: Size,
        threshold_px: float = 20.0,
        frame: str = "network",
    ) -> Optional[ClassLabel]:
        """
        ネットワーク解像度の検出を正解の行で再サンプリングしてから対応付ける

        threshold_px は frame で選んだ座標系のピクセル単位。
        """
        distances: list[Optional[float]] = []
        for polyline, _ in gt:
            aligned_pred, aligned_gt = align_to_gt(
                detected, detected_size, polyline, gt_size, frame
            )
            distances.append(average_distance(aligned_pred, aligned_gt))
        return GroundTruthAssociation._select(distances, [c for _, c in gt], threshold_px)


associate_to_gt = GroundTruthAssociation.associate_to_gt

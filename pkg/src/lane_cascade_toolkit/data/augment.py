"""学習時のデータ拡張 (左右反転と明るさの揺らぎのみ)"""

from typing import Sequence

import numpy as np

from lane_cascade_toolkit.geometry import Polyline


class SampleAugmenter:
    """画像と境界を同時に変換するクラス"""

    @staticmethod
    def hflip(
        image: np.ndarray, boundaries: Sequence[Polyline]
    ) -> tuple[np.ndarray, list[Polyline]]:
        """
        画像と境界を左右反転

        境界の並びも反転して左から右の順を保つ。
        """
        width: int = image.shape[1]
        flipped: np.ndarray = np.ascontiguousarray(image[:, ::-1])
        return flipped, [b.flipped(width) for b in reversed(boundaries)]

    @staticmethod
    def brightness(image: np.ndarray, rng: np.random.Generator, max_delta: float) -> np.ndarray:
        """
        一様乱数で明るさをずらす

        Args:
            image: uint8 または [0, 1] の浮動小数点画像
            rng: 乱数生成器
            max_delta: 最大変化量 (画素値スケールに対する比率)

        Returns:
            入力と同じdtypeの画像
        """
        delta: float = float(rng.uniform(-max_delta, max_delta))
        if image.dtype == np.uint8:
            return np.clip(image.astype(np.float64) + delta * 255.0, 0, 255).astype(np.uint8)
        return np.clip(image + delta, 0.0, 1.0).astype(image.dtype)

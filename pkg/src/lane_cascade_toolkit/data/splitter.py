"""データセットの学習/検証/テスト分割"""

from typing import Sequence, TypeVar

import numpy as np

from lane_cascade_toolkit.errors import EmptyDatasetError

T = TypeVar("T")


class DatasetSplitter:
    """シード固定の3分割を行うクラス"""

    @staticmethod
    def split(
        samples: Sequence[T],
        fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
        seed: int = 0,
    ) -> tuple[list[T], list[T], list[T]]:
        """
        サンプルを学習/検証/テストに分割

        Args:
            samples: 分割するサンプル
            fractions: (train, val, test) の比率 (合計1)
            seed: シャッフルのシード

        Returns:
            (train, val, test)。互いに素で、和集合は入力と一致する

        Raises:
            EmptyDatasetError: サンプルが空の場合
            ValueError: 比率が不正な場合
        """
        if len(samples) == 0:
            raise EmptyDatasetError("Cannot split an empty dataset")
        if len(fractions) != 3 or any(f < 0 for f in fractions):
            raise ValueError(f"fractions must be three non-negative values, got {fractions}")
        if abs(sum(fractions) - 1.0) > 1e-6:
            raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")

        total: int = len(samples)
        n_train: int = int(round(fractions[0] * total))
        n_val: int = min(int(round(fractions[1] * total)), total - n_train)

        order: np.ndarray = np.random.default_rng(seed).permutation(total)
        train: list[T] = [samples[i] for i in order[:n_train]]
        val: list[T] = [samples[i] for i in order[n_train : n_train + n_val]]
        test: list[T] = [samples[i] for i in order[n_train + n_val :]]

        return train, val, test


split_dataset = DatasetSplitter.split

"""セグメンテーション学習用の torch Dataset"""

from typing import Sequence

import numpy as np
import torch
from torch.utils.data import Dataset

from lane_cascade_toolkit.data.augment import SampleAugmenter
from lane_cascade_toolkit.data.types import Sample
from lane_cascade_toolkit.geometry import InstanceMap, Polyline, rasterize_boundaries
from lane_cascade_toolkit.geometry.polyline import Size
from lane_cascade_toolkit.segmentation.inference import SegmentationInference


class LaneSegmentationDataset(Dataset):
    """
    Sample をネットワーク入力サイズの画像とインスタンスマップに変換する

    拡張の乱数は (seed, epoch, index) から作るので、ワーカー数や読み込み順に依存しない。
    """

    def __init__(
        self,
        samples: Sequence[Sample],
        input_size: Size,
        width_px: int = 5,
        hflip: bool = False,
        brightness: float = 0.0,
        seed: int = 0,
    ) -> None:
        self.samples: list[Sample] = list(samples)
        self.input_size: Size = input_size
        self.width_px: int = width_px
        self.hflip: bool = hflip
        self.brightness: float = brightness
        self.seed: int = seed
        self.epoch: int = 0

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, index: int) -> tuple[torch.Tensor, torch.Tensor]:
        sample: Sample = self.samples[index]
        image: np.ndarray = sample.image
        boundaries: list[Polyline] = list(sample.boundaries)

        augment: bool = self.hflip or self.brightness > 0
        if augment:
            rng: np.random.Generator = np.random.default_rng([self.seed, self.epoch, index])
            # 反転は元解像度で行い、ポリラインと画素の対応をずらさない
            if self.hflip and rng.random() < 0.5:
                image, boundaries = SampleAugmenter.hflip(image, boundaries)
            if self.brightness > 0:
                image = SampleAugmenter.brightness(image, rng, self.brightness)

        resized: np.ndarray = SegmentationInference.resize_image(image, self.input_size)
        instance_map: InstanceMap = rasterize_boundaries(
            boundaries, self.width_px, self.input_size, source_size=sample.image_size
        )

        tensor: torch.Tensor = SegmentationInference.to_tensor([resized])[0]
        labels: torch.Tensor = torch.from_numpy(np.array(instance_map.data, dtype=np.int64))
        return tensor, labels

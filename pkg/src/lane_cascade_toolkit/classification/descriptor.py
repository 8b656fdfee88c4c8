"""
境界ピクセルから固定サイズの正方形ディスクリプタを作る

境界のピクセル列 (元画像のラスタ順) から S² 個を等間隔に選び、その色を
S×S の画像に行優先で並べる。ピクセル数が S² より少ない境界は最近傍インデックスの
重複で埋める。
"""

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from lane_cascade_toolkit.errors import DescriptorError
from lane_cascade_toolkit.segmentation.decode import DetectedBoundary

logger = logging.getLogger(__name__)

DESCRIPTOR_SIZES: tuple[int, ...] = (16, 32, 64, 128, 256)


@dataclass(frozen=True)
class DescriptorSource:
    source_id: str
    boundary_index: int


@dataclass(frozen=True, eq=False)
class Descriptor:
    """
    Attributes:
        size: 一辺の長さ S
        pixels: S×S×3 の uint8 画像
        indices: 読み出した境界ピクセルのインデックス (S² 個、非減少)
        source: 元の境界
    """

    size: int
    pixels: np.ndarray
    indices: np.ndarray
    source: Optional[DescriptorSource] = None


@dataclass(frozen=True, eq=False)
class DescriptorBatch:
    """同じサイズのディスクリプタ群。pixels は B×S×S×3"""

    size: int
    descriptors: tuple[Descriptor, ...]

    @property
    def pixels(self) -> np.ndarray:
        if not self.descriptors:
            return np.zeros((0, self.size, self.size, 3), dtype=np.uint8)
        return np.stack([d.pixels for d in self.descriptors])

    def __len__(self) -> int:
        return len(self.descriptors)


class DescriptorExtractor:
    """境界ピクセルのサンプリング"""

    @staticmethod
    def sample_indices(length: int, size: int) -> np.ndarray:
        """[0, length-1] を S² 等分した位置の最近傍インデックス (x + 0.5 の切り捨て)"""
        count: int = size * size
        if count == 1:
            return np.zeros(1, dtype=np.int64)
        k: np.ndarray = np.arange(count, dtype=np.int64)
        # floor(k * (length - 1) / (count - 1) + 0.5) を整数演算で
        return (2 * k * (length - 1) + (count - 1)) // (2 * (count - 1))

    @staticmethod
    def raster_order(pixels: np.ndarray) -> np.ndarray:
        """(x, y) の配列を上から下、左から右の順に並べ替える"""
        arr: np.ndarray = np.asarray(pixels).reshape(-1, 2)
        return arr[np.lexsort((arr[:, 0], arr[:, 1]))]

    @staticmethod
    def extract_descriptor(
        image: np.ndarray,
        boundary_pixels: np.ndarray,
        size: int,
        source: Optional[DescriptorSource] = None,
    ) -> Descriptor:
        """
        境界ピクセルから S×S×3 のディスクリプタを作る

        Args:
            image: H×W×3 の uint8 画像 (ピクセル座標と同じ解像度)
            boundary_pixels: ラスタ順に並んだ (x, y) の配列 (N, 2)
            size: 一辺の長さ S
            source: 元の境界の情報

        Returns:
            Descriptor

        Raises:
            DescriptorError: ピクセルが空、S が正でない、座標が画像外の場合
        """
        if size <= 0:
            raise DescriptorError(f"descriptor size must be positive, got {size}")
        pixels: np.ndarray = np.asarray(boundary_pixels).reshape(-1, 2).astype(np.int64)
        if pixels.shape[0] == 0:
            raise DescriptorError("boundary has no pixels")

        height, width = image.shape[:2]
        xs: np.ndarray = pixels[:, 0]
        ys: np.ndarray = pixels[:, 1]
        if xs.min() < 0 or ys.min() < 0 or xs.max() >= width or ys.max() >= height:
            raise DescriptorError(f"boundary pixels fall outside the {width}x{height} image")

        indices: np.ndarray = DescriptorExtractor.sample_indices(pixels.shape[0], size)
        colors: np.ndarray = image[ys[indices], xs[indices]]
        return Descriptor(size, colors.reshape(size, size, -1).astype(np.uint8), indices, source)

    @staticmethod
    def batch_descriptors(
        image: np.ndarray,
        boundaries: Sequence[DetectedBoundary | np.ndarray],
        size: int,
        source_id: str = "",
    ) -> DescriptorBatch:
        """
        境界ごとのディスクリプタを境界と同じ順で束ねる

        配列で渡した境界はラスタ順に並べ直してから抽出する

        Raises:
            DescriptorError: 抽出に失敗した境界のインデックス付き
        """
        descriptors: list[Descriptor] = []
        for index, boundary in enumerate(boundaries):
            pixels: np.ndarray = (
                boundary.pixels
                if isinstance(boundary, DetectedBoundary)
                else DescriptorExtractor.raster_order(boundary)
            )
            try:
                descriptors.append(
                    DescriptorExtractor.extract_descriptor(
                        image, pixels, size, DescriptorSource(source_id, index)
                    )
                )
            except DescriptorError as e:
                raise DescriptorError(str(e), boundary_index=index) from e
        return DescriptorBatch(size, tuple(descriptors))

    @staticmethod
    def dump_name(descriptor: Descriptor) -> str:
        """{source_id}_{boundary_index}_{S}.png (パス区切りと拡張子は除く)"""
        source: DescriptorSource = descriptor.source or DescriptorSource("descriptor", 0)
        base: Path = Path(source.source_id or "descriptor").with_suffix("")
        stem: str = re.sub(r"[^\w.-]+", "_", str(base))
        return f"{stem.strip('_')}_{source.boundary_index}_{descriptor.size}.png"

    @staticmethod
    def save(descriptor: Descriptor, out_dir: str | Path) -> Path:
        """ディスクリプタをPNG (可逆) で保存"""
        root: Path = Path(out_dir)
        root.mkdir(parents=True, exist_ok=True)
        path: Path = root / DescriptorExtractor.dump_name(descriptor)
        Image.fromarray(descriptor.pixels).save(path, format="PNG")
        logger.debug("Saved descriptor %s", path)
        return path


extract_descriptor = DescriptorExtractor.extract_descriptor
batch_descriptors = DescriptorExtractor.batch_descriptors

"""ポリラインをインスタンスマップに投影する"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from lane_cascade_toolkit import K_MAX
from lane_cascade_toolkit.errors import InstanceBudgetError, RasterizationError
from lane_cascade_toolkit.geometry.polyline import Polyline, Size

# 距離比較の浮動小数点誤差の許容量
_EPS: float = 1e-9


@dataclass(frozen=True, eq=False)
class InstanceMap:
    """
    H×W の整数画像。0 は背景、1..K_MAX はレーン境界のインスタンスID
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        data: np.ndarray = np.asarray(self.data)
        if data.ndim != 2:
            raise ValueError(f"InstanceMap must be 2-D, got shape {data.shape}")
        if data.size and data.min() < 0:
            raise ValueError(f"InstanceMap contains negative label {int(data.min())}")
        if data.size and data.max() > K_MAX:
            raise InstanceBudgetError(int(data.max()), K_MAX)
        data = data.astype(np.uint8, copy=True)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    def binary(self) -> np.ndarray:
        """背景/境界の2値マスク"""
        return self.data > 0

    def instance_ids(self) -> list[int]:
        """存在するインスタンスID (背景を除く)"""
        return [int(v) for v in np.unique(self.data) if v != 0]


class BoundaryRasterizer:
    """固定幅のストロークでレーン境界を描画するクラス"""

    @staticmethod
    def chain_distance(vertices: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """
        点群から折れ線 (線分の連なり) までのユークリッド距離

        Args:
            vertices: 形状 (M, 2) の頂点 (x, y)。M == 1 なら点との距離
            xs: 点のx座標
            ys: 点のy座標 (xsと同形状)

        Returns:
            xsと同形状の距離
        """
        px: np.ndarray = np.asarray(xs, dtype=np.float64)
        py: np.ndarray = np.asarray(ys, dtype=np.float64)
        best: np.ndarray = np.full(px.shape, np.inf)

        starts: np.ndarray = vertices if len(vertices) == 1 else vertices[:-1]
        ends: np.ndarray = vertices if len(vertices) == 1 else vertices[1:]

        for (ax, ay), (bx, by) in zip(starts, ends):
            dx: float = bx - ax
            dy: float = by - ay
            length_sq: float = dx * dx + dy * dy
            if length_sq > 0:
                t: np.ndarray = np.clip(((px - ax) * dx + (py - ay) * dy) / length_sq, 0.0, 1.0)
            else:
                t = np.zeros_like(px)
            dist: np.ndarray = np.hypot(px - (ax + t * dx), py - (ay + t * dy))
            np.minimum(best, dist, out=best)

        return best

    @staticmethod
    def vertices(
        polyline: Polyline, size: Size, source_size: Optional[Size] = None
    ) -> np.ndarray:
        """ポリラインの有効点を描画先の座標系の (x, y) 頂点に変換"""
        rows, cols = polyline.points()
        scale_x: float = 1.0
        scale_y: float = 1.0
        if source_size is not None:
            scale_x = size[0] / source_size[0]
            scale_y = size[1] / source_size[1]
        return np.stack([cols * scale_x, rows.astype(np.float64) * scale_y], axis=1)

    @staticmethod
    def stroke_mask(vertices: np.ndarray, radius: float, size: Size) -> np.ndarray:
        """
        折れ線から radius 以内のピクセルを True にしたマスク

        Args:
            vertices: 頂点 (x, y)
            radius: 半径 (ピクセル)
            size: 画像サイズ (W, H)

        Returns:
            形状 (H, W) の bool マスク
        """
        width, height = size
        mask: np.ndarray = np.zeros((height, width), dtype=bool)
        if len(vertices) == 0:
            return mask

        starts: np.ndarray = vertices if len(vertices) == 1 else vertices[:-1]
        ends: np.ndarray = vertices if len(vertices) == 1 else vertices[1:]

        # 線分ごとに外接矩形の中だけ距離を計算する
        for a, b in zip(starts, ends):
            x0: int = max(int(np.floor(min(a[0], b[0]) - radius)), 0)
            x1: int = min(int(np.ceil(max(a[0], b[0]) + radius)), width - 1)
            y0: int = max(int(np.floor(min(a[1], b[1]) - radius)), 0)
            y1: int = min(int(np.ceil(max(a[1], b[1]) + radius)), height - 1)
            if x0 > x1 or y0 > y1:
                continue

            ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
            dist: np.ndarray = BoundaryRasterizer.chain_distance(np.stack([a, b]), xs, ys)
            mask[y0 : y1 + 1, x0 : x1 + 1] |= dist <= radius + _EPS

        return mask

    @staticmethod
    def rasterize_boundaries(
        boundaries: Sequence[Polyline],
        width_px: int = 5,
        size: Size = (512, 256),
        source_size: Optional[Size] = None,
    ) -> InstanceMap:
        """
        レーン境界を固定幅でインスタンスマップに投影

        重なったピクセルはインデックスの小さい境界が優先される。

        Args:
            boundaries: 最大K_MAX本のポリライン
            width_px: ストローク幅 (奇数)
            size: 出力サイズ (W, H)
            source_size: ポリライン座標の元画像サイズ。指定時はsizeへスケーリング

        Returns:
            インスタンスマップ

        Raises:
            InstanceBudgetError: 境界がK_MAX本を超える場合
            RasterizationError: width_pxが偶数または1未満の場合
        """
        if len(boundaries) > K_MAX:
            raise InstanceBudgetError(len(boundaries), K_MAX)
        if width_px < 1 or width_px % 2 == 0:
            raise RasterizationError(f"width_px must be odd and >= 1, got {width_px}")

        width, height = size
        data: np.ndarray = np.zeros((height, width), dtype=np.uint8)
        radius: float = width_px / 2.0

        for instance_id, boundary in enumerate(boundaries, start=1):
            if boundary.is_empty:
                continue
            verts: np.ndarray = BoundaryRasterizer.vertices(boundary, size, source_size)
            mask: np.ndarray = BoundaryRasterizer.stroke_mask(verts, radius, size)
            data[mask & (data == 0)] = instance_id

        return InstanceMap(data)


rasterize_boundaries = BoundaryRasterizer.rasterize_boundaries

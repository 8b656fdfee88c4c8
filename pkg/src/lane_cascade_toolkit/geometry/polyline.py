"""レーン境界を表すポリラインと行単位の幾何演算"""

from dataclasses import dataclass
from typing import Iterable, Literal, Optional

import numpy as np

# ある行に点が存在しないことを示す値 (TuSimpleの -2 と同じ)
MISSING_X: float = -2.0

Size = tuple[int, int]


@dataclass(frozen=True, eq=False)
class Polyline:
    """
    固定の行位置でサンプリングされたレーン境界

    Attributes:
        rows: y座標 (ピクセル、狭義単調増加)
        cols: rowsに対応するx座標。点がない行は MISSING_X
    """

    rows: np.ndarray
    cols: np.ndarray

    def __post_init__(self) -> None:
        rows: np.ndarray = np.asarray(self.rows, dtype=np.int64).reshape(-1).copy()
        cols: np.ndarray = np.asarray(self.cols, dtype=np.float64).reshape(-1).copy()

        if rows.shape != cols.shape:
            raise ValueError(
                f"rows and cols must have the same length ({rows.size} != {cols.size})"
            )
        if rows.size > 1 and np.any(np.diff(rows) <= 0):
            raise ValueError("rows must be strictly increasing")

        # NaNは欠損として扱う
        cols[~np.isfinite(cols)] = MISSING_X

        rows.setflags(write=False)
        cols.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)

    @classmethod
    def empty(cls) -> "Polyline":
        """点を持たないポリラインを生成"""
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.float64))

    @classmethod
    def from_points(cls, rows: Iterable[int], cols: Iterable[float]) -> "Polyline":
        """
        順不同の (row, x) の組からポリラインを生成

        Args:
            rows: 行 (重複不可)
            cols: 各行のx座標

        Returns:
            行でソートされたポリライン
        """
        rows_arr: np.ndarray = np.asarray(list(rows), dtype=np.int64)
        cols_arr: np.ndarray = np.asarray(list(cols), dtype=np.float64)
        order: np.ndarray = np.argsort(rows_arr, kind="stable")
        return cls(rows_arr[order], cols_arr[order])

    @property
    def valid_mask(self) -> np.ndarray:
        return self.cols != MISSING_X

    @property
    def num_points(self) -> int:
        return int(np.count_nonzero(self.valid_mask))

    @property
    def is_empty(self) -> bool:
        return self.num_points == 0

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """欠損を除いた (rows, cols) を返す"""
        mask: np.ndarray = self.valid_mask
        return self.rows[mask], self.cols[mask]

    def flipped(self, width: int) -> "Polyline":
        """幅widthの画像を左右反転したときのポリライン"""
        cols: np.ndarray = np.where(self.valid_mask, (width - 1) - self.cols, MISSING_X)
        return Polyline(self.rows, cols)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Polyline):
            return NotImplemented
        return bool(
            np.array_equal(self.rows, other.rows) and np.array_equal(self.cols, other.cols)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Polyline(points={self.num_points}, rows={self.rows.size})"


class LaneGeometry:
    """ポリライン同士の比較と行単位の集約"""

    @staticmethod
    def row_average(pixels: Iterable[tuple[int, int]] | np.ndarray) -> Polyline:
        """
        ピクセル集合を行ごとのx平均でポリラインに縮約

        Args:
            pixels: (x, y) の集合、または形状 (N, 2) の配列

        Returns:
            行ごとに1点を持つポリライン (行は昇順)。空集合なら空のポリライン
        """
        if isinstance(pixels, np.ndarray):
            arr: np.ndarray = pixels.reshape(-1, 2)
        else:
            arr = np.asarray(list(pixels), dtype=np.float64).reshape(-1, 2)

        if arr.shape[0] == 0:
            return Polyline.empty()

        xs: np.ndarray = arr[:, 0].astype(np.float64)
        ys: np.ndarray = arr[:, 1].astype(np.int64)

        rows, inverse = np.unique(ys, return_inverse=True)
        sums: np.ndarray = np.bincount(inverse, weights=xs)
        counts: np.ndarray = np.bincount(inverse)

        return Polyline(rows, sums / counts)

    @staticmethod
    def _shared(pred: Polyline, gt: Polyline) -> tuple[np.ndarray, np.ndarray]:
        """両方に点がある行のx座標を (pred, gt) の順で返す"""
        pred_rows, pred_cols = pred.points()
        gt_rows, gt_cols = gt.points()
        _, pred_idx, gt_idx = np.intersect1d(
            pred_rows, gt_rows, assume_unique=True, return_indices=True
        )
        return pred_cols[pred_idx], gt_cols[gt_idx]

    @staticmethod
    def point_match_count(pred: Polyline, gt: Polyline, threshold_px: float) -> tuple[int, int]:
        """
        閾値未満の水平距離で一致したGT点を数える

        Args:
            pred: 予測ポリライン
            gt: 正解ポリライン
            threshold_px: 一致とみなす距離 (この値ちょうどは不一致)

        Returns:
            (一致した点数, GTの点数)

        Raises:
            ValueError: threshold_pxが正でない場合
        """
        if threshold_px <= 0:
            raise ValueError(f"threshold_px must be positive, got {threshold_px}")

        pred_x, gt_x = LaneGeometry._shared(pred, gt)
        matched: int = int(np.count_nonzero(np.abs(pred_x - gt_x) < threshold_px))
        return matched, gt.num_points

    @staticmethod
    def average_distance(pred: Polyline, gt: Polyline) -> Optional[float]:
        """
        共通する行での水平距離の平均

        Returns:
            平均距離。共通の行がなければ None (比較不能)
        """
        pred_x, gt_x = LaneGeometry._shared(pred, gt)
        if pred_x.size == 0:
            return None
        return float(np.mean(np.abs(pred_x - gt_x)))

    @staticmethod
    def interpolate_x(polyline: Polyline, query_rows: np.ndarray) -> np.ndarray:
        """
        任意の (実数) 行でのxを線形補間で求める

        有効点の範囲外は外挿せず MISSING_X を返す。
        """
        query: np.ndarray = np.asarray(query_rows, dtype=np.float64)
        rows, cols = polyline.points()
        out: np.ndarray = np.full(query.shape, MISSING_X, dtype=np.float64)
        if rows.size == 0:
            return out

        inside: np.ndarray = (query >= rows[0]) & (query <= rows[-1])
        out[inside] = np.interp(query[inside], rows.astype(np.float64), cols)
        return out

    @staticmethod
    def resample_rows(polyline: Polyline, rows: Iterable[int]) -> Polyline:
        """指定した行でポリラインを再サンプリング"""
        rows_arr: np.ndarray = np.asarray(list(rows), dtype=np.int64)
        return Polyline(rows_arr, LaneGeometry.interpolate_x(polyline, rows_arr))

    @staticmethod
    def align_to_gt(
        pred: Polyline,
        pred_size: Size,
        gt: Polyline,
        gt_size: Size,
        frame: Literal["network", "source"] = "network",
    ) -> tuple[Polyline, Polyline]:
        """
        予測をGTの行に合わせ、x座標を指定した座標系にそろえる

        Args:
            pred: ネットワーク解像度での予測
            pred_size: 予測の画像サイズ (W, H)
            gt: アノテーション解像度でのGT
            gt_size: GTの画像サイズ (W, H)
            frame: "network" ならxを予測側の解像度に、"source" ならGT側にそろえる

        Returns:
            (予測, GT)。どちらもGTの行ラベルを持つ
        """
        scale_x: float = pred_size[0] / gt_size[0]
        scale_y: float = pred_size[1] / gt_size[1]

        pred_x: np.ndarray = LaneGeometry.interpolate_x(pred, gt.rows * scale_y)
        gt_x: np.ndarray = gt.cols.copy()
        pred_valid: np.ndarray = pred_x != MISSING_X

        if frame == "network":
            gt_x[gt.valid_mask] = gt_x[gt.valid_mask] * scale_x
        elif frame == "source":
            pred_x[pred_valid] = pred_x[pred_valid] / scale_x
        else:
            raise ValueError(f"Unknown frame: {frame}")

        return Polyline(gt.rows, pred_x), Polyline(gt.rows, gt_x)


row_average = LaneGeometry.row_average
point_match_count = LaneGeometry.point_match_count
average_distance = LaneGeometry.average_distance
resample_rows = LaneGeometry.resample_rows
align_to_gt = LaneGeometry.align_to_gt

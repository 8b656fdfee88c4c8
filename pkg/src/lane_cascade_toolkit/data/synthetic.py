"""
合成道路シーンの生成モジュール

シード1つから画像とレーン境界の正解 (ポリラインとクラス) を決定的に生成する。
実データなしでカスケード全体を学習・検証するための代替データセット。
"""

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from lane_cascade_toolkit import K_MAX
from lane_cascade_toolkit.data.types import ClassLabel, Sample
from lane_cascade_toolkit.errors import ConfigError, InstanceBudgetError
from lane_cascade_toolkit.geometry import MISSING_X, BoundaryRasterizer, LaneGeometry, Polyline
from lane_cascade_toolkit.geometry.polyline import Size

WHITE: tuple[int, int, int] = (235, 235, 230)
YELLOW: tuple[int, int, int] = (225, 185, 40)
WORN: tuple[int, int, int] = (165, 165, 160)
SKY: tuple[int, int, int] = (120, 155, 200)

KNOWN_CLASSES: tuple[ClassLabel, ...] = tuple(c for c in ClassLabel if c != ClassLabel.UNKNOWN)


@dataclass(frozen=True)
class SceneSpec:
    """
    合成シーンのパラメータ。同じSceneSpecからは常にビット単位で同じSampleが得られる

    Attributes:
        seed: 乱数シード
        image_size: 画像サイズ (W, H)
        lane_count: レーン境界の本数 (2..K_MAX)
        curvature_range: 地平線付近での横ずれ量 (画像幅に対する比率)
        stroke_width_range: 塗装の幅 (ピクセル)
        class_palette: 使用するクラス
        row_step: アノテーション行の間隔 (ピクセル)
        horizon: 地平線の高さ (画像高さに対する比率)
        noise_sigma: 路面テクスチャのノイズ強度
    """

    seed: int = 0
    image_size: Size = (128, 64)
    lane_count: int = 4
    curvature_range: tuple[float, float] = (-0.12, 0.12)
    stroke_width_range: tuple[float, float] = (3.0, 5.0)
    class_palette: tuple[ClassLabel, ...] = field(default=KNOWN_CLASSES)
    row_step: int = 2
    horizon: float = 0.3
    noise_sigma: float = 6.0

    def __post_init__(self) -> None:
        if self.lane_count > K_MAX:
            raise InstanceBudgetError(self.lane_count, K_MAX)
        if self.lane_count < 2:
            raise ConfigError(f"lane_count must be in 2..{K_MAX}, got {self.lane_count}")
        if not self.class_palette:
            raise ConfigError("class_palette must not be empty")
        if self.stroke_width_range[0] < 1.0 or (
            self.stroke_width_range[0] > self.stroke_width_range[1]
        ):
            raise ConfigError(f"Invalid stroke_width_range: {self.stroke_width_range}")
        if self.row_step < 1:
            raise ConfigError(f"row_step must be >= 1, got {self.row_step}")
        object.__setattr__(
            self, "class_palette", tuple(ClassLabel(c) for c in self.class_palette)
        )


class SceneGenerator:
    """透視投影風の道路とレーン境界を描画するクラス"""

    # 地平線からこの比率より下の行だけにレーンを描く (収束点付近の重なりを避ける)
    TOP_FRACTION: float = 0.2

    @staticmethod
    def generate(spec: SceneSpec) -> Sample:
        """
        SceneSpecから合成サンプルを生成

        Args:
            spec: シーンのパラメータ

        Returns:
            画像と正解ポリライン、クラスを持つSample
        """
        rng: np.random.Generator = np.random.default_rng(spec.seed)
        width, height = spec.image_size

        image: np.ndarray = SceneGenerator._background(rng, spec)

        horizon_y: float = spec.horizon * (height - 1)
        road_depth: float = height - 1 - horizon_y
        top_y: int = int(np.ceil(horizon_y + SceneGenerator.TOP_FRACTION * road_depth))
        h_samples: np.ndarray = np.arange(height - 1, top_y - 1, -spec.row_step)[::-1]
        t: np.ndarray = (h_samples - horizon_y) / road_depth

        vanish_x: float = width / 2.0 + rng.uniform(-0.08, 0.08) * width
        curvature: float = rng.uniform(*spec.curvature_range) * width
        spacing: float = rng.uniform(0.26, 0.32) * width
        offsets: np.ndarray = np.arange(spec.lane_count) - (spec.lane_count - 1) / 2.0
        jitter: np.ndarray = rng.uniform(-0.02, 0.02, spec.lane_count) * width
        bottoms: np.ndarray = vanish_x + offsets * spacing + jitter

        boundaries: list[Polyline] = []
        classes: list[ClassLabel] = []

        for bottom_x in bottoms:
            xs: np.ndarray = vanish_x + curvature * (1.0 - t) ** 2 + (bottom_x - vanish_x) * t
            # 画像外に出た点は欠損扱い
            xs = np.where((xs >= 0) & (xs <= width - 1), xs, MISSING_X)
            polyline: Polyline = Polyline(h_samples, xs)

            label: ClassLabel = spec.class_palette[int(rng.integers(len(spec.class_palette)))]
            stroke_width: float = float(rng.uniform(*spec.stroke_width_range))

            if not polyline.is_empty:
                SceneGenerator._paint(image, rng, polyline, label, stroke_width, spec)

            boundaries.append(polyline)
            classes.append(label)

        return Sample(
            boundaries=tuple(boundaries),
            classes=tuple(classes),
            source_id=f"synthetic/{spec.seed:08d}.png",
            h_samples=tuple(int(h) for h in h_samples),
            image_size=spec.image_size,
            _image=np.clip(np.rint(image), 0, 255).astype(np.uint8),
        )

    @staticmethod
    def _background(rng: np.random.Generator, spec: SceneSpec) -> np.ndarray:
        """空と路面 (テクスチャノイズ付き) を描画"""
        width, height = spec.image_size
        horizon_row: int = int(round(spec.horizon * (height - 1)))

        image: np.ndarray = np.empty((height, width, 3), dtype=np.float64)
        image[:horizon_row] = SKY
        asphalt: float = rng.uniform(70.0, 100.0)
        image[horizon_row:] = asphalt
        image += rng.normal(0.0, spec.noise_sigma, size=image.shape)
        return image

    @staticmethod
    def _paint(
        image: np.ndarray,
        rng: np.random.Generator,
        polyline: Polyline,
        label: ClassLabel,
        stroke_width: float,
        spec: SceneSpec,
    ) -> None:
        """クラスに応じたパターンで境界を塗る (塗装は正解の折れ線から stroke_width/2 以内)"""
        height: int = spec.image_size[1]
        verts: np.ndarray = BoundaryRasterizer.vertices(polyline, spec.image_size)
        rows: np.ndarray = np.arange(height)[:, None]

        # 破線の周期は行単位 (路面の下半分で2周期以上入る長さ)
        span: float = float(verts[-1, 1] - verts[0, 1]) + 1.0
        period: float = max(4.0, rng.uniform(0.25, 0.35) * span)
        phase: float = rng.uniform(0.0, period)
        dash_on: np.ndarray = ((rows + phase) % period) < 0.5 * period

        double: bool = label in (
            ClassLabel.DOUBLE_WHITE_CONTINUOUS,
            ClassLabel.DOUBLE_YELLOW_CONTINUOUS,
            ClassLabel.DOUBLE_DASHED,
        )
        color: tuple[int, int, int] = (
            YELLOW
            if label in (ClassLabel.SINGLE_YELLOW_CONTINUOUS, ClassLabel.DOUBLE_YELLOW_CONTINUOUS)
            else WHITE
        )

        if label == ClassLabel.BOTTS_DOTS:
            mask: np.ndarray = SceneGenerator._dots(polyline, stroke_width, spec, rng)
        elif double:
            # 2本の細いストロークを外縁が stroke_width/2 に収まるように並べる
            sub: float = max(1.0, stroke_width / 3.0)
            offset: float = stroke_width / 2.0 - sub / 2.0
            mask = np.zeros(image.shape[:2], dtype=bool)
            for sign in (-1.0, 1.0):
                shifted: np.ndarray = verts + np.array([sign * offset, 0.0])
                mask |= BoundaryRasterizer.stroke_mask(shifted, sub / 2.0, spec.image_size)
        else:
            mask = BoundaryRasterizer.stroke_mask(verts, stroke_width / 2.0, spec.image_size)

        if label in (ClassLabel.DASHED, ClassLabel.DOUBLE_DASHED):
            mask &= dash_on
        elif label == ClassLabel.UNKNOWN:
            # かすれた塗装
            mask &= rng.random(mask.shape) < 0.5
            color = WORN

        paint: np.ndarray = np.asarray(color, dtype=np.float64) + rng.normal(
            0.0, 4.0, size=(int(mask.sum()), 3)
        )
        image[mask] = paint

    @staticmethod
    def _dots(
        polyline: Polyline, stroke_width: float, spec: SceneSpec, rng: np.random.Generator
    ) -> np.ndarray:
        """ボッツドット: 折れ線上に等間隔で並ぶ円"""
        rows, _ = polyline.points()
        step: int = max(3, int(round(0.12 * (rows[-1] - rows[0] + 1))))
        start: int = int(rows[0]) + int(rng.integers(0, step))
        centers_y: np.ndarray = np.arange(start, rows[-1] + 1, step, dtype=np.float64)
        centers_x: np.ndarray = LaneGeometry.interpolate_x(polyline, centers_y)

        mask: np.ndarray = np.zeros((spec.image_size[1], spec.image_size[0]), dtype=bool)
        for cx, cy in zip(centers_x, centers_y):
            if cx == MISSING_X:
                continue
            mask |= BoundaryRasterizer.stroke_mask(
                np.array([[cx, cy]]), stroke_width / 2.0, spec.image_size
            )
        return mask

    @staticmethod
    def generate_many(
        template: SceneSpec, count: int, seed: Optional[int] = None
    ) -> list[Sample]:
        """
        テンプレートのシードだけを変えて複数シーンを生成

        各サンプルのシードはルートシードから独立に導出するので、並列生成しても
        直列生成と同じ結果になる。
        """
        root: int = template.seed if seed is None else seed
        seeds: np.ndarray = np.random.SeedSequence(root).generate_state(count, dtype=np.uint32)
        return [SceneGenerator.generate(replace(template, seed=int(s))) for s in seeds]


def scenes_with_palette(
    template: SceneSpec, palette: Sequence[ClassLabel], count: int
) -> list[Sample]:
    """特定のクラスだけを含むシーン群 (分類器の学習データ作成用)"""
    spec: SceneSpec = replace(template, class_palette=tuple(palette))
    return SceneGenerator.generate_many(spec, count)


generate_scene = SceneGenerator.generate

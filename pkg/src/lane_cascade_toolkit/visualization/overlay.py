"""
推論結果を画像に重ねて描画する

クラスモードの配色: 実線は赤、破線は緑、二重破線は黄。full 体系では線種ごとに
拡張パレット (CLASS_COLORS) を使う。インスタンスモードは instance_id で色分けする。
"""

from pathlib import Path
from typing import TYPE_CHECKING, Literal

import numpy as np
from PIL import Image, ImageDraw

from lane_cascade_toolkit.geometry import Polyline

if TYPE_CHECKING:
    from lane_cascade_toolkit.pipeline.cascade import CascadeResult

Color = tuple[int, int, int]
OverlayMode = Literal["class", "instance"]

RED: Color = (255, 0, 0)
GREEN: Color = (0, 255, 0)
YELLOW: Color = (255, 255, 0)

CLASS_COLORS: dict[str, Color] = {
    # two_class / three_class
    "continuous": RED,
    "dashed": GREEN,
    "double_dashed": YELLOW,
    # full
    "single_white_continuous": RED,
    "double_white_continuous": (255, 110, 110),
    "single_yellow_continuous": (200, 0, 90),
    "double_yellow_continuous": (255, 0, 200),
    "botts_dots": (0, 200, 255),
    "unknown": (160, 160, 160),
}

INSTANCE_COLORS: tuple[Color, ...] = (
    (230, 25, 75),
    (60, 180, 75),
    (0, 130, 200),
    (245, 130, 48),
)

FALLBACK_COLOR: Color = (255, 255, 255)


class OverlayRenderer:
    """PIL による境界の描画"""

    @staticmethod
    def color_for(class_name: str, instance_id: int, mode: OverlayMode) -> Color:
        if mode == "instance":
            return INSTANCE_COLORS[(instance_id - 1) % len(INSTANCE_COLORS)]
        return CLASS_COLORS.get(class_name, FALLBACK_COLOR)

    @staticmethod
    def runs(
        polyline: Polyline, scale_x: float, scale_y: float
    ) -> list[list[tuple[float, float]]]:
        """欠損行で区切った連続区間ごとの頂点 (描画先の座標系)"""
        segments: list[list[tuple[float, float]]] = []
        current: list[tuple[float, float]] = []
        for row, x, valid in zip(polyline.rows, polyline.cols, polyline.valid_mask):
            if not valid:
                if current:
                    segments.append(current)
                current = []
                continue
            current.append((float(x) * scale_x, float(row) * scale_y))
        if current:
            segments.append(current)
        return segments

    @staticmethod
    def render_overlay(
        image: np.ndarray,
        result: "CascadeResult",
        mode: OverlayMode = "class",
        line_width: int = 3,
    ) -> np.ndarray:
        """
        結果の境界を画像に重ねる

        Args:
            image: H×W×3 の uint8 画像 (任意解像度)
            result: CascadeResult (ポリラインは result.frame_size の座標系)
            mode: "class" (クラスで配色) または "instance" (instance_id で配色)
            line_width: 線の太さ (描画先のピクセル)

        Returns:
            描画済みの画像。境界がなければ入力のコピー
        """
        canvas: np.ndarray = np.array(image, dtype=np.uint8, copy=True)
        if not result.boundaries:
            return canvas

        height, width = canvas.shape[:2]
        scale_x: float = width / result.frame_size[0]
        scale_y: float = height / result.frame_size[1]

        pil_image: Image.Image = Image.fromarray(canvas)
        draw: ImageDraw.ImageDraw = ImageDraw.Draw(pil_image)
        for boundary in result.boundaries:
            color: Color = OverlayRenderer.color_for(
                boundary.class_name, boundary.instance_id, mode
            )
            for vertices in OverlayRenderer.runs(boundary.polyline, scale_x, scale_y):
                if len(vertices) == 1:
                    x, y = vertices[0]
                    r: float = line_width / 2
                    draw.ellipse((x - r, y - r, x + r, y + r), fill=color)
                else:
                    draw.line(vertices, fill=color, width=line_width, joint="curve")

        return np.asarray(pil_image, dtype=np.uint8)

    @staticmethod
    def save_overlay(
        path: str | Path,
        image: np.ndarray,
        result: "CascadeResult",
        mode: OverlayMode = "class",
        line_width: int = 3,
    ) -> Path:
        """描画してPNGで保存"""
        file_path: Path = Path(path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        rendered: np.ndarray = OverlayRenderer.render_overlay(image, result, mode, line_width)
        Image.fromarray(rendered).save(file_path, format="PNG")
        return file_path


render_overlay = OverlayRenderer.render_overlay


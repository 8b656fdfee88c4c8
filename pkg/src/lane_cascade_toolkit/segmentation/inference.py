"""セグメンテーションモデルの前処理と推論"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
from PIL import Image

from lane_cascade_toolkit.errors import ShapeMismatchError
from lane_cascade_toolkit.geometry.polyline import Size
from lane_cascade_toolkit.segmentation.models import SegModel


@dataclass(frozen=True, eq=False)
class SegOutput:
    """
    1枚分のネットワーク出力

    Attributes:
        logits: H×W×C のロジット
        probabilities: logits のピクセルごとのソフトマックス
    """

    logits: np.ndarray
    probabilities: np.ndarray

    @property
    def size(self) -> Size:
        return int(self.logits.shape[1]), int(self.logits.shape[0])


class SegmentationInference:
    """画像の正規化とバッチ推論"""

    @staticmethod
    def resize_image(image: np.ndarray, size: Size) -> np.ndarray:
        """
        uint8画像を (W, H) にリサイズ (同サイズならそのまま返す)
        """
        if image.shape[1] == size[0] and image.shape[0] == size[1]:
            return image
        resized: Image.Image = Image.fromarray(image).resize(size, Image.Resampling.BILINEAR)
        return np.asarray(resized, dtype=np.uint8)

    @staticmethod
    def to_tensor(images: Sequence[np.ndarray]) -> torch.Tensor:
        """uint8 の H×W×3 画像群を [0, 1] の N×3×H×W テンソルに変換"""
        batch: np.ndarray = np.stack([np.asarray(img) for img in images]).astype(np.float32)
        return torch.from_numpy(batch / 255.0).permute(0, 3, 1, 2).contiguous()

    @staticmethod
    def forward(model: SegModel, image_batch: torch.Tensor) -> list[SegOutput]:
        """
        バッチを推論して画像ごとの出力を返す (評価モードで実行)

        Args:
            model: セグメンテーションモデル
            image_batch: N×3×H×W のテンソル (設定サイズに正規化済み)

        Returns:
            画像ごとの SegOutput

        Raises:
            ShapeMismatchError: 入力サイズがモデル設定と一致しない場合
        """
        width, height = model.config.input_size
        if image_batch.ndim != 4 or tuple(image_batch.shape[1:]) != (3, height, width):
            raise ShapeMismatchError(
                f"Expected input of shape (N, 3, {height}, {width}), "
                f"got {tuple(image_batch.shape)}"
            )

        device: torch.device = next(model.parameters()).device
        model.eval()
        with torch.no_grad():
            logits: torch.Tensor = model(image_batch.to(device))
            probabilities: torch.Tensor = torch.softmax(logits, dim=1)

        logits_np: np.ndarray = logits.permute(0, 2, 3, 1).cpu().numpy()
        probs_np: np.ndarray = probabilities.permute(0, 2, 3, 1).cpu().numpy()
        return [SegOutput(logits_np[i], probs_np[i]) for i in range(logits_np.shape[0])]


forward = SegmentationInference.forward

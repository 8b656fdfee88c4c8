"""
ディスクリプタ分類器 (H-Net を小さくした畳み込みネットワーク)

ConvBlock (3x3 畳み込み → BatchNorm → ReLU → 2x2 MaxPool) を重ね、
全体平均プーリングのあと全結合層で num_outputs 個のロジットを出す。
"""

from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np
import torch
import torch.nn as nn

from lane_cascade_toolkit.checkpoint import CheckpointIO, config_hash
from lane_cascade_toolkit.classification.descriptor import DescriptorBatch
from lane_cascade_toolkit.classification.taxonomy import TaxonomyScheme
from lane_cascade_toolkit.errors import CompatibilityError, ConfigError, ShapeMismatchError

KIND: str = "classification"


@dataclass(frozen=True)
class ClsModelConfig:
    """
    分類器の設定

    Attributes:
        descriptor_size: 入力ディスクリプタの一辺 S
        num_outputs: 出力クラス数 (クラス体系から決まる)
        conv_blocks: ConvBlock ごとの出力チャネル数
        fc_widths: 全結合の中間層の幅
    """

    descriptor_size: int = 64
    num_outputs: int = 2
    conv_blocks: tuple[int, ...] = (16, 32, 64, 128)
    fc_widths: tuple[int, ...] = (64,)

    def __post_init__(self) -> None:
        object.__setattr__(self, "conv_blocks", tuple(int(c) for c in self.conv_blocks))
        object.__setattr__(self, "fc_widths", tuple(int(w) for w in self.fc_widths))
        if self.num_outputs < 2:
            raise ConfigError(f"num_outputs must be >= 2, got {self.num_outputs}")
        if self.descriptor_size <= 0:
            raise ConfigError(f"descriptor_size must be positive, got {self.descriptor_size}")
        if not self.conv_blocks:
            raise ConfigError("conv_blocks must not be empty")


class ConvBlock(nn.Sequential):
    def __init__(self, cin: int, cout: int) -> None:
        super().__init__(
            nn.Conv2d(cin, cout, 3, padding=1, bias=False),
            nn.BatchNorm2d(cout),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
        )


class ClsModel(nn.Module):
    """N×3×S×S を N×num_outputs のロジットに写す"""

    def __init__(self, config: ClsModelConfig) -> None:
        super().__init__()
        self.config: ClsModelConfig = config

        blocks: list[nn.Module] = []
        cin: int = 3
        for cout in config.conv_blocks:
            blocks.append(ConvBlock(cin, cout))
            cin = cout
        self.features = nn.Sequential(*blocks)
        self.pool = nn.AdaptiveAvgPool2d(1)

        layers: list[nn.Module] = []
        for width in config.fc_widths:
            layers += [nn.Linear(cin, width), nn.ReLU(inplace=True)]
            cin = width
        layers.append(nn.Linear(cin, config.num_outputs))
        self.classifier = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.classifier(torch.flatten(self.pool(self.features(x)), 1))


class DescriptorClassifier:
    """分類器の構築、推論、チェックポイント"""

    @staticmethod
    def build_classifier(config: ClsModelConfig) -> ClsModel:
        """
        設定から分類器を構築

        Raises:
            ConfigError: descriptor_size が 2^len(conv_blocks) で割り切れない場合
        """
        factor: int = 2 ** len(config.conv_blocks)
        if config.descriptor_size % factor:
            raise ConfigError(
                f"descriptor_size {config.descriptor_size} must be divisible by {factor} "
                f"for {len(config.conv_blocks)} conv blocks"
            )
        return ClsModel(config)

    @staticmethod
    def to_tensor(descriptors: DescriptorBatch | np.ndarray, size: int) -> torch.Tensor:
        """
        B×S×S×3 の uint8 を [0, 1] の B×3×S×S に変換

        Raises:
            ShapeMismatchError: S がモデルと一致しない場合
        """
        pixels: np.ndarray = (
            descriptors.pixels if isinstance(descriptors, DescriptorBatch) else descriptors
        )
        pixels = np.asarray(pixels)
        if pixels.ndim != 4 or pixels.shape[1:] != (size, size, 3):
            raise ShapeMismatchError(
                f"Expected descriptors of shape (B, {size}, {size}, 3), got {pixels.shape}"
            )
        tensor: torch.Tensor = torch.from_numpy(pixels.astype(np.float32) / 255.0)
        return tensor.permute(0, 3, 1, 2).contiguous()

    @staticmethod
    def classify(
        model: ClsModel, descriptor_batch: DescriptorBatch | np.ndarray
    ) -> list[tuple[int, float]]:
        """
        ディスクリプタをまとめて1回の推論で分類

        Returns:
            ディスクリプタごとの (出力インデックス, 確信度)。空のバッチは空リスト

        Raises:
            ShapeMismatchError: S がモデルと一致しない場合
        """
        batch: torch.Tensor = DescriptorClassifier.to_tensor(
            descriptor_batch, model.config.descriptor_size
        )
        if batch.shape[0] == 0:
            return []

        device: torch.device = next(model.parameters()).device
        model.eval()
        with torch.no_grad():
            probabilities: torch.Tensor = torch.softmax(model(batch.to(device)), dim=1)
        confidence, index = probabilities.max(dim=1)
        return [(int(i), float(c)) for i, c in zip(index.cpu(), confidence.cpu())]

    @staticmethod
    def save_checkpoint(
        path: str | Path,
        model: ClsModel,
        scheme: TaxonomyScheme,
        seg_config_hash: Optional[str] = None,
        **extra: Any,
    ) -> Path:
        """
        分類器の重みと設定、クラス体系を保存

        Args:
            path: 保存先
            model: 分類器
            scheme: 学習に使ったクラス体系
            seg_config_hash: 学習データを作ったセグメンテーションモデルの設定ハッシュ
        """
        payload: dict[str, Any] = {
            "config": asdict(model.config),
            "config_hash": config_hash(model.config),
            "scheme": scheme.name,
            "descriptor_size": model.config.descriptor_size,
            "seg_config_hash": seg_config_hash,
            "state_dict": model.state_dict(),
            **extra,
        }
        return CheckpointIO.save(path, KIND, payload)

    @staticmethod
    def load_checkpoint(
        path: str | Path, device: str | torch.device = "cpu"
    ) -> tuple[ClsModel, TaxonomyScheme, dict[str, Any]]:
        """
        チェックポイントから分類器を復元

        Returns:
            (評価モードの分類器, クラス体系, チェックポイントの内容)

        Raises:
            CompatibilityError: 設定ハッシュまたは出力数がクラス体系と一致しない場合
        """
        payload: dict[str, Any] = CheckpointIO.load(path, KIND, map_location=device)
        config: ClsModelConfig = ClsModelConfig(**payload["config"])
        if config_hash(config) != payload["config_hash"]:
            raise CompatibilityError(f"{Path(path).name}: config hash mismatch")

        scheme: TaxonomyScheme = TaxonomyScheme.from_name(payload["scheme"])
        if scheme.num_outputs != config.num_outputs:
            raise CompatibilityError(
                f"{Path(path).name}: {config.num_outputs} outputs but scheme "
                f"{scheme.name} has {scheme.num_outputs}"
            )

        model: ClsModel = DescriptorClassifier.build_classifier(config)
        model.load_state_dict(payload["state_dict"])
        model.to(device)
        model.eval()
        return model, scheme, payload


build_classifier = DescriptorClassifier.build_classifier
classify = DescriptorClassifier.classify
save_cls_checkpoint = DescriptorClassifier.save_checkpoint
load_cls_checkpoint = DescriptorClassifier.load_checkpoint

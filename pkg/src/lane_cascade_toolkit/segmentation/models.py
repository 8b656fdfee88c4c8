"""
インスタンスセグメンテーション用のエンコーダ・デコーダ

erfnet_like は ERFNet の公開されている構成 (ダウンサンプラ、dilation付き
non-bottleneck-1D 残差ブロック、転置畳み込みデコーダ) に従う。
mini はテスト・小規模学習用の4段ダウン/4段アップの U-Net 風ネットワーク。
"""

from dataclasses import dataclass
from typing import Literal

import torch
import torch.nn as nn
import torch.nn.functional as F

from lane_cascade_toolkit import K_MAX
from lane_cascade_toolkit.errors import ConfigError

Architecture = Literal["erfnet_like", "mini"]
ARCHITECTURES: tuple[str, ...] = ("erfnet_like", "mini")


@dataclass(frozen=True)
class SegModelConfig:
    """
    セグメンテーションモデルの設定

    Attributes:
        input_size: 入力サイズ (W, H)
        channels: 出力チャネル数 (背景 + K_MAX インスタンス)
        width_multiplier: 全層のチャネル数に掛ける係数
        architecture: "erfnet_like" または "mini"
    """

    input_size: tuple[int, int] = (512, 256)
    channels: int = K_MAX + 1
    width_multiplier: float = 1.0
    architecture: str = "erfnet_like"

    def __post_init__(self) -> None:
        object.__setattr__(self, "input_size", tuple(int(v) for v in self.input_size))
        if self.channels != K_MAX + 1:
            raise ConfigError(f"channels must be K_MAX + 1 = {K_MAX + 1}, got {self.channels}")
        if self.width_multiplier <= 0:
            raise ConfigError(f"width_multiplier must be positive, got {self.width_multiplier}")

    @property
    def downsample_factor(self) -> int:
        return 8 if self.architecture == "erfnet_like" else 16


def _scaled(channels: int, multiplier: float, minimum: int = 4) -> int:
    return max(minimum, int(round(channels * multiplier)))


class SegModel(nn.Module):
    """最終ヘッドだけを差し替えられるセグメンテーションモデルの基底クラス"""

    def __init__(self, config: SegModelConfig, head_channels: int) -> None:
        super().__init__()
        self.config: SegModelConfig = config
        self.head_channels: int = head_channels

    def _make_head(self, channels: int) -> nn.Module:
        raise NotImplementedError

    def reset_head(self, channels: int) -> None:
        """
        最終ヘッドを新しく初期化したもので置き換える (バックボーンの重みは保持)

        Args:
            channels: 新しいヘッドの出力チャネル数
        """
        device: torch.device = next(self.parameters()).device
        self.head = self._make_head(channels).to(device)
        self.head_channels = channels


# --- ERFNet 風 ---


class DownsamplerBlock(nn.Module):
    def __init__(self, ninput: int, noutput: int) -> None:
        super().__init__()
        self.conv = nn.Conv2d(ninput, noutput - ninput, 3, stride=2, padding=1, bias=True)
        self.pool = nn.MaxPool2d(2, stride=2)
        self.bn = nn.BatchNorm2d(noutput, eps=1e-3)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return F.relu(self.bn(torch.cat([self.conv(x), self.pool(x)], dim=1)))


class NonBottleneck1d(nn.Module):
    """3x1 と 1x3 に分解した畳み込みの残差ブロック"""

    def __init__(self, channels: int, dropprob: float, dilated: int) -> None:
        super().__init__()
        self.conv3x1_1 = nn.Conv2d(channels, channels, (3, 1), padding=(1, 0), bias=True)
        self.conv1x3_1 = nn.Conv2d(channels, channels, (1, 3), padding=(0, 1), bias=True)
        self.bn1 = nn.BatchNorm2d(channels, eps=1e-3)
        self.conv3x1_2 = nn.Conv2d(
            channels, channels, (3, 1), padding=(dilated, 0), dilation=(dilated, 1), bias=True
        )
        self.conv1x3_2 = nn.Conv2d(
            channels, channels, (1, 3), padding=(0, dilated), dilation=(1, dilated), bias=True
        )
        self.bn2 = nn.BatchNorm2d(channels, eps=1e-3)
        self.dropout = nn.Dropout2d(dropprob)
        self.dropprob: float = dropprob

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out: torch.Tensor = F.relu(self.conv3x1_1(x))
        out = F.relu(self.bn1(self.conv1x3_1(out)))
        out = F.relu(self.conv3x1_2(out))
        out = self.bn2(self.conv1x3_2(out))
        if self.dropprob > 0:
            out = self.dropout(out)
        return F.relu(out + x)


class UpsamplerBlock(nn.Module):
    def __init__(self, ninput: int, noutput: int) -> None:
        super().__init__()
        self.conv = nn.ConvTranspose2d(
            ninput, noutput, 3, stride=2, padding=1, output_padding=1, bias=True
        )
        self.bn = nn.BatchNorm2d(noutput, eps=1e-3)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return F.relu(self.bn(self.conv(x)))


class ErfNetLike(SegModel):
    """ERFNet 構成のエンコーダ・デコーダ"""

    def __init__(self, config: SegModelConfig, head_channels: int) -> None:
        super().__init__(config, head_channels)
        wm: float = config.width_multiplier
        c1: int = _scaled(16, wm)
        c2: int = max(c1 + 1, _scaled(64, wm))
        c3: int = max(c2 + 1, _scaled(128, wm))
        self._decoder_channels: int = c1

        encoder: list[nn.Module] = [DownsamplerBlock(3, c1), DownsamplerBlock(c1, c2)]
        encoder += [NonBottleneck1d(c2, 0.03, 1) for _ in range(5)]
        encoder.append(DownsamplerBlock(c2, c3))
        for _ in range(2):
            encoder += [NonBottleneck1d(c3, 0.3, d) for d in (2, 4, 8, 16)]
        self.encoder = nn.Sequential(*encoder)

        self.decoder = nn.Sequential(
            UpsamplerBlock(c3, c2),
            NonBottleneck1d(c2, 0.0, 1),
            NonBottleneck1d(c2, 0.0, 1),
            UpsamplerBlock(c2, c1),
            NonBottleneck1d(c1, 0.0, 1),
            NonBottleneck1d(c1, 0.0, 1),
        )
        self.head = self._make_head(head_channels)

    def _make_head(self, channels: int) -> nn.Module:
        return nn.ConvTranspose2d(self._decoder_channels, channels, 2, stride=2, bias=True)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.decoder(self.encoder(x)))


# --- mini ---


def _conv_bn_relu(cin: int, cout: int, stride: int = 1) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, stride=stride, padding=1, bias=False),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class _UpBlock(nn.Module):
    def __init__(self, cin: int, cout: int) -> None:
        super().__init__()
        self.up = nn.Sequential(
            nn.ConvTranspose2d(cin, cout, 2, stride=2, bias=False),
            nn.BatchNorm2d(cout),
            nn.ReLU(inplace=True),
        )
        self.fuse = _conv_bn_relu(cout, cout)

    def forward(self, x: torch.Tensor, skip: torch.Tensor) -> torch.Tensor:
        return self.fuse(self.up(x) + skip)


class MiniSegNet(SegModel):
    """4段ダウン/4段アップの小型エンコーダ・デコーダ (加算スキップ接続)"""

    def __init__(self, config: SegModelConfig, head_channels: int) -> None:
        super().__init__(config, head_channels)
        base: int = _scaled(16, config.width_multiplier)
        chans: list[int] = [base, base * 2, base * 4, base * 8]
        self._decoder_channels: int = base

        self.stem = _conv_bn_relu(3, base)
        downs: list[nn.Module] = []
        cin: int = base
        for cout in chans:
            downs.append(nn.Sequential(_conv_bn_relu(cin, cout, 2), _conv_bn_relu(cout, cout)))
            cin = cout
        self.downs = nn.ModuleList(downs)

        # chans[3] -> chans[2] -> chans[1] -> chans[0] -> base
        targets: list[int] = [chans[2], chans[1], chans[0], base]
        ups: list[nn.Module] = []
        cin = chans[3]
        for cout in targets:
            ups.append(_UpBlock(cin, cout))
            cin = cout
        self.ups = nn.ModuleList(ups)
        self.head = self._make_head(head_channels)

    def _make_head(self, channels: int) -> nn.Module:
        return nn.Conv2d(self._decoder_channels, channels, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        skips: list[torch.Tensor] = [self.stem(x)]
        out: torch.Tensor = skips[0]
        for down in self.downs:
            out = down(out)
            skips.append(out)

        # 最深部以外の特徴を深い順に使う
        for up, skip in zip(self.ups, reversed(skips[:-1])):
            out = up(out, skip)
        return self.head(out)


def build_model(config: SegModelConfig, head_channels: int | None = None) -> SegModel:
    """
    設定からセグメンテーションモデルを構築

    Args:
        config: モデル設定
        head_channels: ヘッドの出力チャネル数 (省略時 K_MAX + 1、二値フェーズでは 2)

    Returns:
        SegModel

    Raises:
        ConfigError: 未知のアーキテクチャ、または入力サイズが縮小率で割り切れない場合
    """
    if config.architecture not in ARCHITECTURES:
        raise ConfigError(
            f"Unknown architecture '{config.architecture}'. Valid: {', '.join(ARCHITECTURES)}"
        )

    factor: int = config.downsample_factor
    width, height = config.input_size
    if width % factor or height % factor:
        raise ConfigError(
            f"input_size {config.input_size} must be divisible by {factor} "
            f"for {config.architecture}"
        )

    channels: int = head_channels if head_channels is not None else config.channels
    if config.architecture == "erfnet_like":
        return ErfNetLike(config, channels)
    return MiniSegNet(config, channels)


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())

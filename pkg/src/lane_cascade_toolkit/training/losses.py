"""
セグメンテーションの学習目的関数

- 二値フェーズ: 背景 / 境界 の2チャネルに対する交差エントロピー
- インスタンスフェーズ: ピクセル分布のペアに対するKLダイバージェンス。
  同じインスタンスの分布は近づけ、異なるインスタンスはマージン以上離す。
  チャネルに固定の正解ラベルを持たないので、チャネルの並べ替えに対して不変。
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
import torch.nn.functional as F

from lane_cascade_toolkit import K_MAX
from lane_cascade_toolkit.errors import ConfigError, InstanceBudgetError, ShapeMismatchError
from lane_cascade_toolkit.geometry import InstanceMap

_LOG_EPS: float = 1e-12


@dataclass(frozen=True)
class InstanceLossConfig:
    """
    インスタンス損失の設定

    Attributes:
        margin: 異なるインスタンス間のKLに課すヒンジのマージン
        pair_budget: 1画像あたりにサンプリングするピクセルペア数
        symmetric: KL(P‖Q) + KL(Q‖P) の対称形を使うか
    """

    margin: float = 2.0
    pair_budget: int = 4096
    symmetric: bool = True

    def __post_init__(self) -> None:
        if self.margin <= 0:
            raise ConfigError(f"margin must be positive, got {self.margin}")
        if self.pair_budget < 1:
            raise ConfigError(f"pair_budget must be >= 1, got {self.pair_budget}")


@dataclass(frozen=True)
class PixelPairs:
    """1画像分のサンプリング結果 (平坦化したピクセルインデックス)"""

    first: torch.Tensor
    second: torch.Tensor
    same: torch.Tensor


class PairSampler:
    """ラベルごとに層化したピクセルペアのサンプリング"""

    @staticmethod
    def _pick(
        order: torch.Tensor,
        offsets: torch.Tensor,
        counts: torch.Tensor,
        labels: torch.Tensor,
        generator: torch.Generator,
    ) -> torch.Tensor:
        """各ラベル番号からピクセルを1つずつ一様に選ぶ"""
        u: torch.Tensor = torch.rand(labels.shape, generator=generator, dtype=torch.float64)
        within: torch.Tensor = torch.minimum((u * counts[labels]).long(), counts[labels] - 1)
        return order[offsets[labels] + within]

    @staticmethod
    def sample(labels: torch.Tensor, budget: int, generator: torch.Generator) -> PixelPairs:
        """
        同一インスタンスのペアと異なるインスタンスのペアを約半数ずつサンプリング

        まずラベルを一様に選び、次にそのラベルのピクセルを一様に選ぶので、
        細いレーン境界も背景と同じ頻度でペアに現れる。
        ラベルが1種類しかない画像では同一インスタンスのペアだけを作る。

        Args:
            labels: 平坦化したインスタンスラベル (CPU上の long)
            budget: ペア数
            generator: 乱数生成器

        Returns:
            PixelPairs
        """
        present, counts = torch.unique(labels, sorted=True, return_counts=True)
        order: torch.Tensor = torch.argsort(labels, stable=True)
        offsets: torch.Tensor = torch.cumsum(counts, 0) - counts
        n_labels: int = int(present.numel())

        n_same: int = budget if n_labels == 1 else (budget + 1) // 2
        n_diff: int = budget - n_same

        same_labels: torch.Tensor = torch.randint(n_labels, (n_same,), generator=generator)
        first: list[torch.Tensor] = [
            PairSampler._pick(order, offsets, counts, same_labels, generator)
        ]
        second: list[torch.Tensor] = [
            PairSampler._pick(order, offsets, counts, same_labels, generator)
        ]

        if n_diff > 0:
            label_a: torch.Tensor = torch.randint(n_labels, (n_diff,), generator=generator)
            shift: torch.Tensor = torch.randint(n_labels - 1, (n_diff,), generator=generator) + 1
            label_b: torch.Tensor = (label_a + shift) % n_labels
            first.append(PairSampler._pick(order, offsets, counts, label_a, generator))
            second.append(PairSampler._pick(order, offsets, counts, label_b, generator))

        same: torch.Tensor = torch.cat(
            [torch.ones(n_same, dtype=torch.bool), torch.zeros(n_diff, dtype=torch.bool)]
        )
        return PixelPairs(torch.cat(first), torch.cat(second), same)


class SegmentationLosses:
    """二値フェーズとインスタンスフェーズの損失"""

    @staticmethod
    def binary_phase_loss(
        logits: torch.Tensor, gt_mask: torch.Tensor | np.ndarray
    ) -> torch.Tensor:
        """
        背景 / 境界 の2チャネルヘッドに対する交差エントロピー (ピクセル平均)

        2クラスのソフトマックス交差エントロピーは p = softmax[:, 1] の
        二値交差エントロピーと等しい。

        Args:
            logits: N×2×H×W のロジット
            gt_mask: N×H×W の正解。0 が背景、それ以外は境界として扱う

        Raises:
            ShapeMismatchError: 形状が合わない場合
        """
        target: torch.Tensor = torch.as_tensor(gt_mask)
        if logits.ndim != 4 or logits.shape[1] != 2:
            raise ShapeMismatchError(
                f"Expected logits of shape (N, 2, H, W), got {tuple(logits.shape)}"
            )
        if tuple(target.shape) != (logits.shape[0], *logits.shape[2:]):
            raise ShapeMismatchError(
                f"gt_mask shape {tuple(target.shape)} does not match logits "
                f"{tuple(logits.shape)}"
            )
        return F.cross_entropy(logits, (target > 0).long().to(logits.device))

    @staticmethod
    def _as_label_tensor(instance_map: torch.Tensor | np.ndarray | InstanceMap) -> torch.Tensor:
        if isinstance(instance_map, InstanceMap):
            data: torch.Tensor = torch.from_numpy(np.array(instance_map.data))
        elif isinstance(instance_map, torch.Tensor):
            data = instance_map.detach().cpu()
        else:
            data = torch.from_numpy(np.asarray(instance_map))
        data = data.long()

        if data.numel() and int(data.min()) < 0:
            raise ValueError(f"instance_map contains negative label {int(data.min())}")
        if data.numel() and int(data.max()) > K_MAX:
            raise InstanceBudgetError(int(data.max()), K_MAX)
        return data

    @staticmethod
    def kl_divergence(p: torch.Tensor, q: torch.Tensor) -> torch.Tensor:
        """行ごとの KL(P‖Q)。log の引数は 1e-12 で下から抑える"""
        return (p * (p.clamp_min(_LOG_EPS).log() - q.clamp_min(_LOG_EPS).log())).sum(dim=-1)

    @staticmethod
    def pair_costs(
        p: torch.Tensor, q: torch.Tensor, same: torch.Tensor, config: InstanceLossConfig
    ) -> torch.Tensor:
        """
        ペアごとのコスト

        同一インスタンス: KL(P‖Q) (+ KL(Q‖P))
        異なるインスタンス: max(0, margin - KL(P‖Q)) (+ 対称項)
        """
        forward: torch.Tensor = SegmentationLosses.kl_divergence(p, q)
        pull: torch.Tensor = forward
        push: torch.Tensor = F.relu(config.margin - forward)
        if config.symmetric:
            backward: torch.Tensor = SegmentationLosses.kl_divergence(q, p)
            pull = pull + backward
            push = push + F.relu(config.margin - backward)
        return torch.where(same.to(p.device), pull, push)

    @staticmethod
    def instance_pair_loss(
        probabilities: torch.Tensor,
        instance_map: torch.Tensor | np.ndarray | InstanceMap,
        config: InstanceLossConfig = InstanceLossConfig(),
        generator: Optional[torch.Generator] = None,
        seed: int = 0,
    ) -> torch.Tensor:
        """
        ピクセル分布のペアに対するKLクラスタリング損失

        Args:
            probabilities: N×C×H×W (または C×H×W) のチャネル確率
            instance_map: N×H×W (または H×W) のインスタンスラベル (0..K_MAX)
            config: 損失の設定
            generator: ペアサンプリング用の乱数生成器 (CPU)
            seed: generator を省略したときのシード

        Returns:
            全画像のペアコストの平均 (スカラー)

        Raises:
            InstanceBudgetError: instance_map に K_MAX を超える値がある場合
            ShapeMismatchError: 空間サイズが一致しない場合
        """
        labels: torch.Tensor = SegmentationLosses._as_label_tensor(instance_map)
        probs: torch.Tensor = probabilities
        if probs.ndim == 3:
            probs = probs.unsqueeze(0)
        if labels.ndim == 2:
            labels = labels.unsqueeze(0)

        if probs.ndim != 4 or tuple(labels.shape) != (probs.shape[0], *probs.shape[2:]):
            raise ShapeMismatchError(
                f"instance_map shape {tuple(labels.shape)} does not match probabilities "
                f"{tuple(probabilities.shape)}"
            )

        gen: torch.Generator = generator or torch.Generator().manual_seed(seed)
        channels: int = probs.shape[1]
        per_image: list[torch.Tensor] = []

        for n in range(probs.shape[0]):
            flat: torch.Tensor = probs[n].reshape(channels, -1).transpose(0, 1)
            pairs: PixelPairs = PairSampler.sample(labels[n].reshape(-1), config.pair_budget, gen)
            first: torch.Tensor = pairs.first.to(flat.device)
            second: torch.Tensor = pairs.second.to(flat.device)
            costs: torch.Tensor = SegmentationLosses.pair_costs(
                flat[first], flat[second], pairs.same, config
            )
            per_image.append(costs.mean())

        return torch.stack(per_image).mean()


binary_phase_loss = SegmentationLosses.binary_phase_loss
instance_pair_loss = SegmentationLosses.instance_pair_loss

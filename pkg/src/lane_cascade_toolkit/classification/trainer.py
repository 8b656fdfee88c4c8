"""ディスクリプタ分類器の学習"""

import copy
import logging
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np
import polars as pl
import torch
import torch.nn.functional as F
from tqdm import tqdm

from lane_cascade_toolkit.classification.descriptor import Descriptor
from lane_cascade_toolkit.classification.model import ClsModel, ClsModelConfig, DescriptorClassifier
from lane_cascade_toolkit.errors import ConfigError, EmptyDatasetError
from lane_cascade_toolkit.seeding import derive_seed
from lane_cascade_toolkit.training.curriculum import PolynomialDecay

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClsTrainingConfig:
    """
    分類器の学習設定 (学習率と減衰はセグメンテーションと同じ値が既定)

    Attributes:
        epochs: エポック数
        learning_rate: Adam の初期学習率
        poly_power: 多項式減衰の指数
        batch_size: ミニバッチサイズ
        val_fraction: 検証用に取り分ける割合 (検証データを別に渡さない場合)
    """

    epochs: int = 20
    learning_rate: float = 5e-4
    poly_power: float = 0.9
    batch_size: int = 32
    val_fraction: float = 0.2

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError(f"val_fraction must be in [0, 1), got {self.val_fraction}")


@dataclass(frozen=True, eq=False)
class DescriptorPairs:
    """
    {ディスクリプタ, 出力インデックス} の集合

    Attributes:
        pixels: N×S×S×3 の uint8
        targets: N 個の出力インデックス
    """

    pixels: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        if self.pixels.shape[0] != self.targets.shape[0]:
            raise ValueError(
                f"{self.pixels.shape[0]} descriptors for {self.targets.shape[0]} targets"
            )

    @classmethod
    def from_pairs(
        cls, pairs: Sequence[tuple[Descriptor | np.ndarray, int]], size: int
    ) -> "DescriptorPairs":
        pixels: list[np.ndarray] = [
            p.pixels if isinstance(p, Descriptor) else np.asarray(p) for p, _ in pairs
        ]
        stacked: np.ndarray = (
            np.stack(pixels).astype(np.uint8)
            if pixels
            else np.zeros((0, size, size, 3), dtype=np.uint8)
        )
        return cls(stacked, np.asarray([t for _, t in pairs], dtype=np.int64))

    @property
    def size(self) -> int:
        return int(self.pixels.shape[1]) if self.pixels.ndim == 4 else 0

    def __len__(self) -> int:
        return int(self.targets.shape[0])

    def subset(self, indices: np.ndarray) -> "DescriptorPairs":
        return DescriptorPairs(self.pixels[indices], self.targets[indices])

    def class_counts(self, num_outputs: int) -> np.ndarray:
        return np.bincount(self.targets, minlength=num_outputs)[:num_outputs]


@dataclass(frozen=True, eq=False)
class ClsTrainingResult:
    """
    Attributes:
        model: 検証精度が最良だったエポックの重みを読み込んだ分類器
        history: エポックごとの履歴 (epoch, lr, train_loss, val_accuracy)
        best_epoch: 採用したエポック
        best_val_accuracy: そのエポックの検証精度
    """

    model: ClsModel
    history: pl.DataFrame
    best_epoch: int
    best_val_accuracy: float


class ClassifierTrainer:
    """交差エントロピーによる分類器の学習"""

    @staticmethod
    def split(
        pairs: DescriptorPairs, fraction: float, seed: int
    ) -> tuple[DescriptorPairs, DescriptorPairs]:
        """シード付きの並べ替えで学習用と検証用に分ける (検証が空なら学習用で代用)"""
        order: np.ndarray = np.random.default_rng(seed).permutation(len(pairs))
        n_val: int = int(round(len(pairs) * fraction))
        if n_val == 0 or n_val >= len(pairs):
            return pairs, pairs
        return pairs.subset(order[n_val:]), pairs.subset(order[:n_val])

    @staticmethod
    def class_weights(counts: np.ndarray) -> Optional[torch.Tensor]:
        """
        例のないクラスがあるときだけ逆頻度の重みを返す

        Returns:
            重み (例のないクラスは0)。全クラスに例があれば None
        """
        if np.all(counts > 0):
            return None
        present: np.ndarray = counts > 0
        weights: np.ndarray = np.zeros(counts.shape, dtype=np.float32)
        weights[present] = counts.sum() / (present.sum() * counts[present])
        return torch.from_numpy(weights)

    @staticmethod
    def _accuracy(model: ClsModel, pairs: DescriptorPairs) -> float:
        predictions: list[tuple[int, float]] = DescriptorClassifier.classify(model, pairs.pixels)
        correct: int = sum(1 for (p, _), y in zip(predictions, pairs.targets) if p == int(y))
        return correct / max(len(pairs), 1)

    @staticmethod
    def train_classifier(
        pairs: DescriptorPairs,
        config: ClsModelConfig,
        hyperparams: ClsTrainingConfig = ClsTrainingConfig(),
        seed: int = 0,
        val_pairs: Optional[DescriptorPairs] = None,
        device: str | torch.device = "cpu",
    ) -> ClsTrainingResult:
        """
        分類器を学習して検証精度が最良のエポックの重みを返す

        Args:
            pairs: 学習データ
            config: 分類器の設定
            hyperparams: 学習設定
            seed: 初期化とシャッフルのシード
            val_pairs: 検証データ (省略時は pairs から val_fraction を取り分ける)
            device: 学習デバイス

        Returns:
            ClsTrainingResult

        Raises:
            EmptyDatasetError: 学習データが空の場合
        """
        if len(pairs) == 0:
            raise EmptyDatasetError("No descriptor pairs to train the classifier on")
        if val_pairs is None:
            pairs, val_pairs = ClassifierTrainer.split(pairs, hyperparams.val_fraction, seed)

        counts: np.ndarray = pairs.class_counts(config.num_outputs)
        weights: Optional[torch.Tensor] = ClassifierTrainer.class_weights(counts)
        if weights is not None:
            missing: list[int] = [int(k) for k in np.flatnonzero(counts == 0)]
            logger.warning(
                "Classes %s have no training examples; using inverse-frequency class weights",
                missing,
            )
            weights = weights.to(device)

        torch.manual_seed(seed)
        model: ClsModel = DescriptorClassifier.build_classifier(config).to(device)
        optimizer: torch.optim.Optimizer = torch.optim.Adam(
            model.parameters(), lr=hyperparams.learning_rate
        )
        decay: PolynomialDecay = PolynomialDecay(
            hyperparams.learning_rate, hyperparams.epochs, hyperparams.poly_power
        )
        inputs: torch.Tensor = DescriptorClassifier.to_tensor(pairs.pixels, config.descriptor_size)
        targets: torch.Tensor = torch.from_numpy(pairs.targets)

        history: list[dict[str, Any]] = []
        best_state: dict[str, Any] = copy.deepcopy(model.state_dict())
        best_epoch: int = -1
        best_accuracy: float = -1.0

        epochs = tqdm(
            range(hyperparams.epochs),
            desc="classifier",
            leave=False,
            disable=not logger.isEnabledFor(logging.INFO),
        )
        for epoch in epochs:
            lr: float = decay.apply(optimizer, epoch)
            generator: torch.Generator = torch.Generator().manual_seed(derive_seed(seed, epoch))
            order: torch.Tensor = torch.randperm(len(pairs), generator=generator)

            model.train()
            total: float = 0.0
            for start in range(0, len(pairs), hyperparams.batch_size):
                batch: torch.Tensor = order[start : start + hyperparams.batch_size]
                logits: torch.Tensor = model(inputs[batch].to(device))
                loss: torch.Tensor = F.cross_entropy(
                    logits, targets[batch].to(device), weight=weights
                )
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                total += float(loss.detach()) * int(batch.numel())

            train_loss: float = total / len(pairs)
            val_accuracy: float = ClassifierTrainer._accuracy(model, val_pairs)
            history.append(
                {"epoch": epoch, "lr": lr, "train_loss": train_loss, "val_accuracy": val_accuracy}
            )
            logger.debug(
                "classifier epoch %d: loss=%.4f val_accuracy=%.4f",
                epoch + 1,
                train_loss,
                val_accuracy,
            )

            if val_accuracy > best_accuracy:
                best_accuracy, best_epoch = val_accuracy, epoch
                best_state = copy.deepcopy(model.state_dict())

        model.load_state_dict(best_state)
        model.eval()
        logger.info(
            "Classifier trained: best val_accuracy=%.4f at epoch %d", best_accuracy, best_epoch + 1
        )
        return ClsTrainingResult(model, pl.DataFrame(history), best_epoch, best_accuracy)


train_classifier = ClassifierTrainer.train_classifier

"""
セグメンテーションモデルの2フェーズ学習

二値フェーズで境界/背景を学習したあと、ヘッドだけを K_MAX+1 チャネルに作り直して
インスタンスフェーズの損失で学習を続ける。エポックごとの乱数は (seed, epoch) から
導出するので、チェックポイントから再開しても同じ損失の列が得られる。
"""

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Optional, Sequence

import polars as pl
import torch
from torch.utils.data import DataLoader
from tqdm import tqdm

from lane_cascade_toolkit import K_MAX
from lane_cascade_toolkit.analysis.metrics import EvalCounts, LaneMetrics, MetricsConfig
from lane_cascade_toolkit.data.types import Sample
from lane_cascade_toolkit.errors import (
    CompatibilityError,
    ConfigError,
    DivergenceError,
    EmptyDatasetError,
)
from lane_cascade_toolkit.seeding import derive_seed, subsystem_seeds
from lane_cascade_toolkit.segmentation.checkpoint import load_seg_checkpoint, save_seg_checkpoint
from lane_cascade_toolkit.segmentation.decode import decode_instances
from lane_cascade_toolkit.segmentation.inference import SegmentationInference, SegOutput
from lane_cascade_toolkit.segmentation.models import SegModel, SegModelConfig, build_model
from lane_cascade_toolkit.training.curriculum import (
    CurriculumController,
    CurriculumState,
    PolynomialDecay,
    TrainingPhase,
    curriculum_step,
)
from lane_cascade_toolkit.training.dataset import LaneSegmentationDataset
from lane_cascade_toolkit.training.losses import (
    InstanceLossConfig,
    binary_phase_loss,
    instance_pair_loss,
)

logger = logging.getLogger(__name__)

HISTORY_COLUMNS: tuple[str, ...] = (
    "epoch",
    "phase",
    "lr",
    "train_loss",
    "val_metric",
    "val_value",
)


@dataclass(frozen=True)
class SegTrainingConfig:
    """
    セグメンテーション学習の設定

    Attributes:
        epochs: 総エポック数
        switch_epoch: インスタンスフェーズに切り替えるエポック
        learning_rate: Adam の初期学習率
        poly_power: 多項式減衰の指数
        batch_size: ミニバッチサイズ
        width_px: 正解マップのストローク幅
        hflip: 左右反転による拡張
        brightness: 明るさ揺らぎの最大量 (0 で無効)
    """

    epochs: int = 150
    switch_epoch: int = 50
    learning_rate: float = 5e-4
    poly_power: float = 0.9
    batch_size: int = 8
    width_px: int = 5
    hflip: bool = False
    brightness: float = 0.0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.switch_epoch < 0:
            raise ConfigError(f"switch_epoch must be >= 0, got {self.switch_epoch}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.brightness < 1.0:
            raise ConfigError(f"brightness must be in [0, 1), got {self.brightness}")


@dataclass(frozen=True, eq=False)
class SegTrainingResult:
    """
    Attributes:
        best_checkpoint: 検証指標が最良だったチェックポイント
        last_checkpoint: 最終エポックのチェックポイント (再開用)
        history: エポックごとの履歴
        best_epoch: best_checkpoint のエポック
    """

    best_checkpoint: Path
    last_checkpoint: Path
    history: pl.DataFrame
    best_epoch: int


class SegmentationTrainer:
    """カリキュラム付きのセグメンテーション学習ループ"""

    def __init__(
        self,
        model_config: SegModelConfig,
        training: SegTrainingConfig = SegTrainingConfig(),
        loss: InstanceLossConfig = InstanceLossConfig(),
        metrics: MetricsConfig = MetricsConfig(),
        seed: int = 0,
        output_dir: str | Path = "outputs/segmentation",
        device: str | torch.device = "cpu",
    ) -> None:
        self.model_config: SegModelConfig = model_config
        self.training: SegTrainingConfig = training
        self.loss: InstanceLossConfig = loss
        self.metrics: MetricsConfig = metrics
        self.seed: int = seed
        self.seeds: dict[str, int] = subsystem_seeds(seed)
        self.output_dir: Path = Path(output_dir)
        self.device: torch.device = torch.device(device)

    def _optimizer(self, model: SegModel) -> torch.optim.Optimizer:
        # ヘッドを作り直したら新しいパラメータ集合でオプティマイザも作り直す
        return torch.optim.Adam(model.parameters(), lr=self.training.learning_rate)

    def fit(
        self,
        train_samples: Sequence[Sample],
        val_samples: Sequence[Sample],
        resume: Optional[str | Path] = None,
    ) -> SegTrainingResult:
        """
        学習を実行して best.pt と last.pt を保存

        Args:
            train_samples: 学習用サンプル
            val_samples: 検証用サンプル (空なら学習用で代用)
            resume: 再開する last.pt のパス

        Returns:
            SegTrainingResult

        Raises:
            EmptyDatasetError: 学習用サンプルが空の場合
            DivergenceError: 損失が有限値でなくなった場合
        """
        if not train_samples:
            raise EmptyDatasetError("No training samples")
        if not val_samples:
            logger.warning("Validation split is empty; validating on the training samples")
            val_samples = train_samples

        cfg: SegTrainingConfig = self.training
        dataset: LaneSegmentationDataset = LaneSegmentationDataset(
            train_samples,
            self.model_config.input_size,
            width_px=cfg.width_px,
            hflip=cfg.hflip,
            brightness=cfg.brightness,
            seed=self.seeds["data"],
        )
        val_dataset: LaneSegmentationDataset = LaneSegmentationDataset(
            val_samples, self.model_config.input_size, width_px=cfg.width_px
        )
        decay: PolynomialDecay = PolynomialDecay(cfg.learning_rate, cfg.epochs, cfg.poly_power)

        torch.manual_seed(self.seeds["seg_init"])
        state: CurriculumState = CurriculumController.initial(cfg.switch_epoch)
        head: int = 2 if state.phase == TrainingPhase.BINARY else K_MAX + 1
        model: SegModel = build_model(self.model_config, head_channels=head).to(self.device)
        optimizer: torch.optim.Optimizer = self._optimizer(model)

        history: list[dict[str, Any]] = []
        best_score: Optional[tuple[int, float]] = None
        best_epoch: int = -1
        start_epoch: int = 0

        if resume is not None:
            model, payload = load_seg_checkpoint(resume, self.device)
            if "optimizer" not in payload:
                raise CompatibilityError(
                    f"{Path(resume).name} has no optimizer state; resume from last.pt"
                )
            optimizer = self._optimizer(model)
            optimizer.load_state_dict(payload["optimizer"])
            state = CurriculumState.from_state_dict(payload["curriculum"])
            history = list(payload["history"])
            best_score = tuple(payload["best_score"]) if payload["best_score"] else None
            best_epoch = int(payload["best_epoch"])
            start_epoch = int(payload["epoch"]) + 1
            logger.info("Resuming from %s at epoch %d", resume, start_epoch)

        self.output_dir.mkdir(parents=True, exist_ok=True)
        best_path: Path = self.output_dir / "best.pt"
        last_path: Path = self.output_dir / "last.pt"

        for epoch in range(start_epoch, cfg.epochs):
            state = curriculum_step(state, epoch)
            torch.manual_seed(derive_seed(self.seeds["seg_init"], epoch))
            if state.head_reset:
                model.reset_head(K_MAX + 1)
                optimizer = self._optimizer(model)

            lr: float = decay.apply(optimizer, epoch)
            train_loss: float = self._train_epoch(model, optimizer, dataset, state, epoch)
            val_name, val_value = self._validate(model, val_dataset, val_samples, state)

            history.append(
                {
                    "epoch": epoch,
                    "phase": state.phase.value,
                    "lr": lr,
                    "train_loss": train_loss,
                    "val_metric": val_name,
                    "val_value": val_value,
                }
            )
            logger.info(
                "epoch %d/%d [%s] lr=%.2e train_loss=%.4f %s=%.4f",
                epoch + 1,
                cfg.epochs,
                state.phase.value,
                lr,
                train_loss,
                val_name,
                val_value,
            )

            # インスタンスフェーズの精度は二値フェーズの損失より常に優先する
            score: tuple[int, float] = (
                (1, val_value) if state.phase == TrainingPhase.INSTANCE else (0, -val_value)
            )
            if best_score is None or score > best_score:
                best_score, best_epoch = score, epoch
                save_seg_checkpoint(best_path, model, state.phase.value, epoch, seed=self.seed)

            save_seg_checkpoint(
                last_path,
                model,
                state.phase.value,
                epoch,
                seed=self.seed,
                optimizer=optimizer.state_dict(),
                curriculum=state.state_dict(),
                history=history,
                best_score=list(best_score),
                best_epoch=best_epoch,
                training=asdict(cfg),
                loss=asdict(self.loss),
            )

        frame: pl.DataFrame = pl.DataFrame(history, schema=list(HISTORY_COLUMNS))
        frame.write_csv(self.output_dir / "history.csv")
        return SegTrainingResult(best_path, last_path, frame, best_epoch)

    def _train_epoch(
        self,
        model: SegModel,
        optimizer: torch.optim.Optimizer,
        dataset: LaneSegmentationDataset,
        state: CurriculumState,
        epoch: int,
    ) -> float:
        dataset.set_epoch(epoch)
        loader: DataLoader = DataLoader(
            dataset,
            batch_size=self.training.batch_size,
            shuffle=True,
            generator=torch.Generator().manual_seed(derive_seed(self.seeds["data"], epoch)),
        )
        pair_generator: torch.Generator = torch.Generator().manual_seed(
            derive_seed(self.seeds["loss_sampling"], epoch)
        )

        model.train()
        total: float = 0.0
        batches: int = 0
        progress = tqdm(
            loader,
            desc=f"{state.phase.value} {epoch + 1}",
            leave=False,
            disable=not logger.isEnabledFor(logging.INFO),
        )
        for images, labels in progress:
            images = images.to(self.device)
            labels = labels.to(self.device)
            logits: torch.Tensor = model(images)

            if state.phase == TrainingPhase.BINARY:
                loss: torch.Tensor = binary_phase_loss(logits, labels)
            else:
                loss = instance_pair_loss(
                    torch.softmax(logits, dim=1), labels, self.loss, generator=pair_generator
                )

            if not torch.isfinite(loss):
                raise DivergenceError(state.phase.value, epoch, float(loss))

            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += float(loss.detach())
            batches += 1

        return total / max(batches, 1)

    def _validate(
        self,
        model: SegModel,
        dataset: LaneSegmentationDataset,
        samples: Sequence[Sample],
        state: CurriculumState,
    ) -> tuple[str, float]:
        """二値フェーズは検証BCE、インスタンスフェーズはTuSimple精度"""
        loader: DataLoader = DataLoader(dataset, batch_size=self.training.batch_size)
        model.eval()

        if state.phase == TrainingPhase.BINARY:
            losses: list[float] = []
            with torch.no_grad():
                for images, labels in loader:
                    logits: torch.Tensor = model(images.to(self.device))
                    losses.append(float(binary_phase_loss(logits, labels.to(self.device))))
            return "val_bce", sum(losses) / max(len(losses), 1)

        counts: EvalCounts = EvalCounts()
        offset: int = 0
        for images, _ in loader:
            outputs: list[SegOutput] = SegmentationInference.forward(model, images)
            for output in outputs:
                sample: Sample = samples[offset]
                offset += 1
                detected = decode_instances(output, self.metrics.min_points)
                assignment = LaneMetrics.evaluate_image(
                    [d.polyline for d in detected],
                    self.model_config.input_size,
                    sample.boundaries,
                    sample.image_size,
                    self.metrics,
                    sample.source_id,
                )
                counts = counts.merge(EvalCounts((assignment.counts,)))

        if counts.gt_points == 0:
            return "val_accuracy", 0.0
        return "val_accuracy", LaneMetrics.accuracy(counts)

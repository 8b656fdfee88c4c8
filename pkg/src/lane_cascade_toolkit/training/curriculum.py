"""二値フェーズからインスタンスフェーズへの切り替えと学習率スケジュール"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any

import torch

logger = logging.getLogger(__name__)


class TrainingPhase(str, Enum):
    BINARY = "binary"
    INSTANCE = "instance"


@dataclass(frozen=True)
class CurriculumState:
    """
    カリキュラムの状態

    Attributes:
        phase: 現在のフェーズ
        epoch: 現在のエポック
        switch_epoch: インスタンスフェーズに入るエポック
        head_reset: このエポックでヘッドを K_MAX+1 チャネルに作り直す必要があるか
    """

    phase: TrainingPhase
    epoch: int
    switch_epoch: int
    head_reset: bool = False

    def __post_init__(self) -> None:
        expected: TrainingPhase = CurriculumController.phase_for(self.epoch, self.switch_epoch)
        if self.phase != expected:
            raise ValueError(
                f"phase {self.phase.value} is inconsistent with epoch {self.epoch} "
                f"(switch_epoch={self.switch_epoch})"
            )

    def state_dict(self) -> dict[str, Any]:
        return {"phase": self.phase.value, "epoch": self.epoch, "switch_epoch": self.switch_epoch}

    @classmethod
    def from_state_dict(cls, state: dict[str, Any]) -> "CurriculumState":
        return cls(TrainingPhase(state["phase"]), int(state["epoch"]), int(state["switch_epoch"]))


class CurriculumController:
    """エポック番号からフェーズを決める"""

    @staticmethod
    def phase_for(epoch: int, switch_epoch: int) -> TrainingPhase:
        return TrainingPhase.BINARY if epoch < switch_epoch else TrainingPhase.INSTANCE

    @staticmethod
    def initial(switch_epoch: int) -> CurriculumState:
        """
        エポック0の状態

        switch_epoch が0なら二値フェーズを飛ばして最初からインスタンスフェーズになる。
        """
        if switch_epoch < 0:
            raise ValueError(f"switch_epoch must be >= 0, got {switch_epoch}")
        if switch_epoch == 0:
            logger.warning("switch_epoch is 0: the binary warm-up phase is skipped")
        return CurriculumState(CurriculumController.phase_for(0, switch_epoch), 0, switch_epoch)

    @staticmethod
    def step(state: CurriculumState, epoch: int) -> CurriculumState:
        """
        指定エポックの状態を返す

        Args:
            state: 直前の状態
            epoch: 次に学習するエポック (0以上)

        Returns:
            新しい状態。二値からインスタンスへ移った時だけ head_reset が True
        """
        if epoch < 0:
            raise ValueError(f"epoch must be >= 0, got {epoch}")

        phase: TrainingPhase = CurriculumController.phase_for(epoch, state.switch_epoch)
        head_reset: bool = state.phase == TrainingPhase.BINARY and phase == TrainingPhase.INSTANCE
        if head_reset:
            logger.info("Epoch %d: switching to the instance phase", epoch)
        return CurriculumState(phase, epoch, state.switch_epoch, head_reset)


curriculum_step = CurriculumController.step


@dataclass(frozen=True)
class PolynomialDecay:
    """lr = base * (1 - epoch / max_epochs) ** power"""

    base_lr: float
    max_epochs: int
    power: float = 0.9

    def lr_at(self, epoch: int) -> float:
        progress: float = min(max(epoch, 0), self.max_epochs) / max(self.max_epochs, 1)
        return self.base_lr * (1.0 - progress) ** self.power

    def apply(self, optimizer: torch.optim.Optimizer, epoch: int) -> float:
        """オプティマイザの全パラメータグループに学習率を設定"""
        lr: float = self.lr_at(epoch)
        for group in optimizer.param_groups:
            group["lr"] = lr
        return lr

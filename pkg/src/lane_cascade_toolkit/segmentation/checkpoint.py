"""セグメンテーションモデルのチェックポイント"""

from dataclasses import asdict
from pathlib import Path
from typing import Any

import torch

from lane_cascade_toolkit.checkpoint import CheckpointIO, config_hash
from lane_cascade_toolkit.errors import CompatibilityError
from lane_cascade_toolkit.segmentation.models import SegModel, SegModelConfig, build_model

KIND: str = "segmentation"


def save_seg_checkpoint(
    path: str | Path, model: SegModel, phase: str, epoch: int, **extra: Any
) -> Path:
    """
    重み、モデル設定、学習フェーズのタグを保存

    Args:
        path: 保存先
        model: 保存するモデル
        phase: "binary" または "instance"
        epoch: 保存時点のエポック
        **extra: オプティマイザの状態などの追加情報
    """
    payload: dict[str, Any] = {
        "config": asdict(model.config),
        "config_hash": config_hash(model.config),
        "phase": phase,
        "head_channels": model.head_channels,
        "epoch": epoch,
        "state_dict": model.state_dict(),
        **extra,
    }
    return CheckpointIO.save(path, KIND, payload)


def load_seg_checkpoint(
    path: str | Path, device: str | torch.device = "cpu"
) -> tuple[SegModel, dict[str, Any]]:
    """
    チェックポイントからモデルを復元

    Returns:
        (評価モードのモデル, チェックポイントの内容)

    Raises:
        CompatibilityError: 保存された設定ハッシュが設定と一致しない場合
    """
    payload: dict[str, Any] = CheckpointIO.load(path, KIND, map_location=device)
    config: SegModelConfig = SegModelConfig(**payload["config"])
    if config_hash(config) != payload["config_hash"]:
        raise CompatibilityError(f"{Path(path).name}: config hash mismatch")

    model: SegModel = build_model(config, head_channels=payload["head_channels"])
    model.load_state_dict(payload["state_dict"])
    model.to(device)
    model.eval()
    return model, payload

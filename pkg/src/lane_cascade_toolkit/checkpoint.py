"""バージョン付きチェックポイントの保存と読み込み"""

import hashlib
import json
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Any

import torch

from lane_cascade_toolkit.errors import CompatibilityError

CHECKPOINT_FORMAT_VERSION: int = 1


def config_hash(config: Any) -> str:
    """
    設定 (dataclass または dict) の正規化JSONから SHA-256 を計算

    Returns:
        16進文字列の先頭16文字
    """
    data: Any = asdict(config) if is_dataclass(config) else config
    canonical: str = json.dumps(data, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


class CheckpointIO:
    """種類タグとフォーマットバージョンを持つ torch チェックポイント"""

    @staticmethod
    def save(path: str | Path, kind: str, payload: dict[str, Any]) -> Path:
        """
        チェックポイントを保存

        Args:
            path: 保存先
            kind: "segmentation" または "classification"
            payload: 保存する内容 (state_dict や設定)

        Returns:
            保存先のパス
        """
        file_path: Path = Path(path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        header: dict[str, Any] = {"format_version": CHECKPOINT_FORMAT_VERSION, "kind": kind}
        torch.save({**header, **payload}, file_path)
        return file_path

    @staticmethod
    def load(path: str | Path, kind: str, map_location: str | torch.device = "cpu") -> dict:
        """
        チェックポイントを読み込み、バージョンと種類を検証

        Raises:
            FileNotFoundError: ファイルが存在しない場合
            CompatibilityError: バージョンまたは種類が一致しない場合
        """
        file_path: Path = Path(path)
        if not file_path.exists():
            raise FileNotFoundError(f"File not found: {path}")

        payload: dict = torch.load(file_path, map_location=map_location, weights_only=False)
        version: Any = payload.get("format_version")
        if version != CHECKPOINT_FORMAT_VERSION:
            raise CompatibilityError(
                f"{file_path.name}: unsupported checkpoint format {version} "
                f"(expected {CHECKPOINT_FORMAT_VERSION})"
            )
        if payload.get("kind") != kind:
            raise CompatibilityError(
                f"{file_path.name}: expected a {kind} checkpoint, got {payload.get('kind')}"
            )
        return payload

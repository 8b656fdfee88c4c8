"""パイプライン全体で使う例外クラス"""

from typing import Any, Mapping, Optional


class LaneCascadeError(Exception):
    """このパッケージが送出する例外の基底クラス"""


class InstanceBudgetError(LaneCascadeError, ValueError):
    """レーン境界の数がK_MAXを超えた"""

    def __init__(self, count: int, limit: int) -> None:
        super().__init__(f"Instance budget exceeded: {count} boundaries (max {limit})")
        self.count: int = count
        self.limit: int = limit


class RasterizationError(LaneCascadeError, ValueError):
    """ラスタライズのパラメータが不正"""


class MalformedRecordError(LaneCascadeError, ValueError):
    """TuSimpleのレコードが壊れている"""

    def __init__(self, record: str, reason: str) -> None:
        super().__init__(f"Malformed record {record}: {reason}")
        self.record: str = record
        self.reason: str = reason


class AnnotationError(LaneCascadeError, ValueError):
    """クラスアノテーションファイルの内容が不正"""


class EmptyDatasetError(LaneCascadeError, ValueError):
    """データセットが空"""


class ShapeMismatchError(LaneCascadeError, ValueError):
    """テンソルや画像の形状が設定と一致しない"""


class ConfigError(LaneCascadeError, ValueError):
    """設定値が不正"""


class DivergenceError(LaneCascadeError):
    """学習中に損失が有限値でなくなった"""

    def __init__(self, phase: str, epoch: int, loss: float) -> None:
        super().__init__(f"Loss diverged in {phase} phase at epoch {epoch} (loss={loss})")
        self.phase: str = phase
        self.epoch: int = epoch
        self.loss: float = loss


class EmptyAssociationError(LaneCascadeError):
    """GTと対応付けられた検出が1件もない"""


class CompatibilityError(LaneCascadeError):
    """チェックポイント同士、またはチェックポイントと設定が噛み合わない"""


class DescriptorError(LaneCascadeError, ValueError):
    """ディスクリプタを抽出できない"""

    def __init__(self, message: str, boundary_index: Optional[int] = None) -> None:
        if boundary_index is not None:
            message = f"boundary {boundary_index}: {message}"
        super().__init__(message)
        self.boundary_index: Optional[int] = boundary_index


class UndefinedMetricError(LaneCascadeError, ValueError):
    """分母が0で指標が定義できない"""

    def __init__(self, message: str, stats: Optional[Mapping[str, Any]] = None) -> None:
        if stats:
            details: str = ", ".join(f"{k}={v}" for k, v in stats.items())
            message = f"{message} ({details})"
        super().__init__(message)
        self.stats: dict[str, Any] = dict(stats or {})

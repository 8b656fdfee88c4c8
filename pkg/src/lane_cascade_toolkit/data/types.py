"""データセットの基本型: 境界クラスとサンプル"""

from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from lane_cascade_toolkit import K_MAX
from lane_cascade_toolkit.errors import AnnotationError, InstanceBudgetError
from lane_cascade_toolkit.geometry import Polyline
from lane_cascade_toolkit.geometry.polyline import Size


class ClassLabel(IntEnum):
    """レーン境界の8クラス (コードは固定)"""

    SINGLE_WHITE_CONTINUOUS = 0
    DOUBLE_WHITE_CONTINUOUS = 1
    SINGLE_YELLOW_CONTINUOUS = 2
    DOUBLE_YELLOW_CONTINUOUS = 3
    DASHED = 4
    DOUBLE_DASHED = 5
    BOTTS_DOTS = 6
    UNKNOWN = 7

    @property
    def token(self) -> str:
        return self.name.lower()

    @classmethod
    def tokens(cls) -> list[str]:
        return [member.token for member in cls]

    @classmethod
    def from_token(cls, token: str) -> "ClassLabel":
        """
        文字列トークンからクラスを取得

        Raises:
            AnnotationError: 未知のトークンの場合 (有効なトークンを列挙)
        """
        normalized: str = str(token).strip().lower().replace("-", "_").replace(" ", "_")
        for member in cls:
            if member.token == normalized:
                return member
        raise AnnotationError(
            f"Unknown class token '{token}'. Valid tokens: {', '.join(cls.tokens())}"
        )


@dataclass(eq=False)
class Sample:
    """
    画像1枚分のアノテーション

    画像は image_path からの遅延読み込みに対応する。アノテーション側は画像を
    読み込んでも変化しない。

    Attributes:
        boundaries: レーン境界 (最大K_MAX本)
        classes: boundaries と同順のクラス
        source_id: TuSimpleの raw_file に相当する識別子
        h_samples: アノテーションの行位置
        image_size: アノテーション座標系の画像サイズ (W, H)
        image_path: 画像ファイルのパス (遅延読み込み用)
    """

    boundaries: tuple[Polyline, ...]
    classes: tuple[ClassLabel, ...]
    source_id: str
    h_samples: tuple[int, ...]
    image_size: Size
    image_path: Optional[Path] = None
    _image: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.boundaries = tuple(self.boundaries)
        self.classes = tuple(ClassLabel(c) for c in self.classes)
        self.h_samples = tuple(int(h) for h in self.h_samples)

        if len(self.boundaries) > K_MAX:
            raise InstanceBudgetError(len(self.boundaries), K_MAX)
        if len(self.classes) != len(self.boundaries):
            raise ValueError(
                f"{self.source_id}: {len(self.classes)} classes for "
                f"{len(self.boundaries)} boundaries"
            )

    @property
    def is_materialized(self) -> bool:
        return self._image is not None

    @property
    def image(self) -> np.ndarray:
        """H×W×3 の uint8 画像 (初回アクセス時に読み込んでキャッシュ)"""
        if self._image is None:
            if self.image_path is None:
                raise FileNotFoundError(f"No image attached to sample {self.source_id}")
            if not self.image_path.exists():
                raise FileNotFoundError(f"File not found: {self.image_path}")
            with Image.open(self.image_path) as img:
                self._image = np.asarray(img.convert("RGB"), dtype=np.uint8)
        return self._image

    def with_boundaries(
        self, boundaries: Sequence[Polyline], image: Optional[np.ndarray] = None
    ) -> "Sample":
        """境界 (と画像) を差し替えたコピーを返す"""
        return Sample(
            boundaries=tuple(boundaries),
            classes=self.classes,
            source_id=self.source_id,
            h_samples=self.h_samples,
            image_size=self.image_size,
            image_path=self.image_path,
            _image=image if image is not None else self._image,
        )

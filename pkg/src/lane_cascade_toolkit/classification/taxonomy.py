"""境界クラスを分類器の出力インデックスへ写すクラス体系"""

from dataclasses import dataclass
from typing import Optional

from lane_cascade_toolkit.data.types import ClassLabel
from lane_cascade_toolkit.errors import ConfigError


@dataclass(frozen=True)
class TaxonomyScheme:
    """
    8つの ClassLabel から出力インデックス (None は無視) への全域写像

    Attributes:
        name: "two_class"、"three_class"、"full" のいずれか
        mapping: ClassLabel の値順に並べた出力インデックス
        output_names: 出力インデックス順のクラス名
    """

    name: str
    mapping: tuple[Optional[int], ...]
    output_names: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.mapping) != len(ClassLabel):
            raise ConfigError(f"{self.name}: mapping must cover all {len(ClassLabel)} labels")
        live: set[int] = {m for m in self.mapping if m is not None}
        if live != set(range(len(self.output_names))):
            raise ConfigError(f"{self.name}: outputs {sorted(live)} do not match output_names")

    @property
    def num_outputs(self) -> int:
        return len(self.output_names)

    def remap(self, label: ClassLabel) -> Optional[int]:
        return self.mapping[int(label)]

    @classmethod
    def from_name(cls, name: str) -> "TaxonomyScheme":
        """
        名前から体系を取得

        Raises:
            ConfigError: 未知の名前の場合
        """
        if name not in SCHEMES:
            raise ConfigError(f"Unknown scheme '{name}'. Valid: {', '.join(SCHEMES)}")
        return SCHEMES[name]


_CONTINUOUS: int = 0
_DASHED: int = 1

TWO_CLASS: TaxonomyScheme = TaxonomyScheme(
    name="two_class",
    mapping=(
        _CONTINUOUS,  # single_white_continuous
        _CONTINUOUS,  # double_white_continuous
        _CONTINUOUS,  # single_yellow_continuous
        _CONTINUOUS,  # double_yellow_continuous
        _DASHED,  # dashed
        _DASHED,  # double_dashed
        _DASHED,  # botts_dots
        None,  # unknown
    ),
    output_names=("continuous", "dashed"),
)

THREE_CLASS: TaxonomyScheme = TaxonomyScheme(
    name="three_class",
    mapping=(_CONTINUOUS, _CONTINUOUS, _CONTINUOUS, _CONTINUOUS, _DASHED, 2, _DASHED, None),
    output_names=("continuous", "dashed", "double_dashed"),
)

FULL: TaxonomyScheme = TaxonomyScheme(
    name="full",
    mapping=tuple(int(label) for label in ClassLabel),
    output_names=tuple(label.token for label in ClassLabel),
)

SCHEMES: dict[str, TaxonomyScheme] = {s.name: s for s in (TWO_CLASS, THREE_CLASS, FULL)}


def remap_class(label: ClassLabel, scheme: TaxonomyScheme | str) -> Optional[int]:
    """ラベルを体系の出力インデックスに変換 (None は学習・評価から除外)"""
    resolved: TaxonomyScheme = (
        TaxonomyScheme.from_name(scheme) if isinstance(scheme, str) else scheme
    )
    return resolved.remap(ClassLabel(label))

"""
パイプライン全体の設定

YAMLのキー構成は dataclass の入れ子と一致する。未知のキーは ConfigError。
コマンドラインからは "seg_training.epochs=5" のようなドット区切りで上書きする。
"""

import dataclasses
import logging
import shutil
import types
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union, get_args, get_origin, get_type_hints

import yaml

from lane_cascade_toolkit import K_MAX
from lane_cascade_toolkit.analysis.metrics import MetricsConfig
from lane_cascade_toolkit.classification.descriptor import DESCRIPTOR_SIZES
from lane_cascade_toolkit.classification.model import ClsModelConfig
from lane_cascade_toolkit.classification.taxonomy import SCHEMES, TaxonomyScheme
from lane_cascade_toolkit.classification.trainer import ClsTrainingConfig
from lane_cascade_toolkit.data.synthetic import KNOWN_CLASSES, SceneSpec
from lane_cascade_toolkit.data.tusimple import TUSIMPLE_IMAGE_SIZE
from lane_cascade_toolkit.data.types import ClassLabel
from lane_cascade_toolkit.errors import ConfigError
from lane_cascade_toolkit.i18n import LANGUAGES
from lane_cascade_toolkit.seeding import SUBSYSTEMS, derive_seed
from lane_cascade_toolkit.segmentation.models import SegModelConfig
from lane_cascade_toolkit.training.losses import InstanceLossConfig
from lane_cascade_toolkit.training.seg_trainer import SegTrainingConfig

logger = logging.getLogger(__name__)

SNAPSHOT_NAME: str = "config_snapshot.yaml"
LOG_LEVELS: tuple[str, ...] = ("DEBUG", "INFO", "WARNING", "ERROR")


@dataclass(frozen=True)
class DatasetConfig:
    """
    Attributes:
        source: "synthetic" (SceneConfig から生成) または "tusimple" (ファイルから読み込み)
        label_files: TuSimple の JSON-lines ファイル
        root: 画像パスの基準ディレクトリ (省略時は各ファイルと同じ場所)
        class_file: クラスアノテーション (JSON-lines または CSV)
        image_size: アノテーション座標系の画像サイズ (W, H)
        split: (train, val, test) の比率
    """

    source: str = "synthetic"
    label_files: tuple[str, ...] = ()
    root: Optional[str] = None
    class_file: Optional[str] = None
    image_size: tuple[int, int] = TUSIMPLE_IMAGE_SIZE
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)

    def __post_init__(self) -> None:
        if self.source not in ("synthetic", "tusimple"):
            raise ConfigError(
                f"dataset.source must be 'synthetic' or 'tusimple', got {self.source}"
            )
        if self.source == "tusimple" and not self.label_files:
            raise ConfigError("dataset.label_files is required when dataset.source is 'tusimple'")
        if len(self.split) != 3 or abs(sum(self.split) - 1.0) > 1e-6:
            raise ConfigError(
                f"dataset.split must be three fractions summing to 1, got {self.split}"
            )


@dataclass(frozen=True)
class SceneConfig:
    """合成シーンの生成設定 (SceneSpec のテンプレートと枚数)"""

    count: int = 64
    image_size: tuple[int, int] = (128, 64)
    lane_count: int = 4
    curvature_range: tuple[float, float] = (-0.12, 0.12)
    stroke_width_range: tuple[float, float] = (3.0, 5.0)
    class_palette: tuple[str, ...] = tuple(c.token for c in KNOWN_CLASSES)
    row_step: int = 2
    horizon: float = 0.3
    noise_sigma: float = 6.0

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ConfigError(f"scenes.count must be >= 1, got {self.count}")
        if not 2 <= self.lane_count <= K_MAX:
            raise ConfigError(f"scenes.lane_count must be in 2..{K_MAX}, got {self.lane_count}")
        try:
            for token in self.class_palette:
                ClassLabel.from_token(token)
        except ValueError as e:
            raise ConfigError(f"scenes.class_palette: {e}") from e

    def to_spec(self, seed: int) -> SceneSpec:
        return SceneSpec(
            seed=seed,
            image_size=self.image_size,
            lane_count=self.lane_count,
            curvature_range=self.curvature_range,
            stroke_width_range=self.stroke_width_range,
            class_palette=tuple(ClassLabel.from_token(t) for t in self.class_palette),
            row_step=self.row_step,
            horizon=self.horizon,
            noise_sigma=self.noise_sigma,
        )


@dataclass(frozen=True)
class DescriptorConfig:
    """
    Attributes:
        size: ディスクリプタの一辺 S
        dump: 学習に使ったディスクリプタをPNGで書き出すか
    """

    size: int = 64
    dump: bool = False

    def __post_init__(self) -> None:
        if self.size <= 0:
            raise ConfigError(f"descriptor.size must be positive, got {self.size}")


@dataclass(frozen=True)
class AblationConfig:
    sizes: tuple[int, ...] = DESCRIPTOR_SIZES
    schemes: tuple[str, ...] = ("two_class", "three_class")

    def __post_init__(self) -> None:
        unknown: list[str] = [s for s in self.schemes if s not in SCHEMES]
        if unknown:
            raise ConfigError(f"ablation.schemes: unknown {unknown}. Valid: {', '.join(SCHEMES)}")


@dataclass(frozen=True)
class ReportConfig:
    """
    Attributes:
        language: レポートとグラフのラベルの言語 ("ja" または "en")
        charts: グラフ (PNG / HTML) も書き出すか
        overlay_mode: 重畳描画の配色 ("class" または "instance")
    """

    language: str = "ja"
    charts: bool = True
    overlay_mode: str = "class"

    def __post_init__(self) -> None:
        if self.language not in LANGUAGES:
            raise ConfigError(f"report.language must be one of {LANGUAGES}, got {self.language}")
        if self.overlay_mode not in ("class", "instance"):
            raise ConfigError(
                f"report.overlay_mode must be 'class' or 'instance', got {self.overlay_mode}"
            )


@dataclass(frozen=True)
class PipelineConfig:
    """
    パイプラインの全設定

    Attributes:
        seed: ルートシード (サブシステムごとのシードはここから導出)
        device: torch のデバイス名
        output_dir: 出力ディレクトリ
        log_level: ログレベル
        scheme: 分類のクラス体系
        seg_checkpoint: 推論・評価に使うセグメンテーションのチェックポイント
        cls_checkpoint: 推論・評価に使う分類器のチェックポイント
    """

    seed: int = 0
    device: str = "cpu"
    output_dir: str = "outputs"
    log_level: str = "INFO"
    scheme: str = "two_class"
    seg_checkpoint: Optional[str] = None
    cls_checkpoint: Optional[str] = None
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    scenes: SceneConfig = field(default_factory=SceneConfig)
    segmentation: SegModelConfig = field(default_factory=SegModelConfig)
    seg_training: SegTrainingConfig = field(default_factory=SegTrainingConfig)
    loss: InstanceLossConfig = field(default_factory=InstanceLossConfig)
    descriptor: DescriptorConfig = field(default_factory=DescriptorConfig)
    classifier: ClsModelConfig = field(default_factory=ClsModelConfig)
    cls_training: ClsTrainingConfig = field(default_factory=ClsTrainingConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    ablation: AblationConfig = field(default_factory=AblationConfig)
    report: ReportConfig = field(default_factory=ReportConfig)

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ConfigError(f"Unknown scheme '{self.scheme}'. Valid: {', '.join(SCHEMES)}")
        if self.log_level.upper() not in LOG_LEVELS:
            raise ConfigError(f"log_level must be one of {LOG_LEVELS}, got {self.log_level}")

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)

    @property
    def taxonomy(self) -> TaxonomyScheme:
        return TaxonomyScheme.from_name(self.scheme)

    @property
    def classifier_config(self) -> ClsModelConfig:
        """ディスクリプタサイズと出力数を descriptor / scheme に合わせた分類器の設定"""
        return replace(
            self.classifier,
            descriptor_size=self.descriptor.size,
            num_outputs=self.taxonomy.num_outputs,
        )

    def subsystem_seed(self, name: str) -> int:
        """
        Raises:
            ConfigError: 未知のサブシステム名の場合
        """
        if name not in SUBSYSTEMS:
            raise ConfigError(f"Unknown subsystem '{name}'. Valid: {', '.join(SUBSYSTEMS)}")
        return derive_seed(self.seed, name)

    def to_dict(self) -> dict[str, Any]:
        return _plain(asdict(self))


def _plain(value: Any) -> Any:
    # YAML に素直に書ける形 (タプルはリスト)
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _field_type(hint: Any) -> Any:
    """Optional[X] を X に"""
    if get_origin(hint) in (Union, types.UnionType):
        args: list[Any] = [a for a in get_args(hint) if a is not type(None)]
        if len(args) == 1:
            return args[0]
    return hint


class ConfigLoader:
    """YAMLの読み込み、ドット区切りの上書き、スナップショット"""

    @staticmethod
    def build(cls: type, data: Optional[Mapping[str, Any]], path: str = "") -> Any:
        """
        辞書から dataclass を組み立てる (入れ子も再帰的に)

        Raises:
            ConfigError: 未知のキー、値の型や範囲が不正な場合
        """
        if data is None:
            data = {}
        if not isinstance(data, Mapping):
            raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")

        hints: dict[str, Any] = get_type_hints(cls)
        known: dict[str, dataclasses.Field] = {f.name: f for f in fields(cls) if f.init}
        unknown: list[str] = sorted(set(data) - set(known))
        if unknown:
            where: str = path or "config"
            raise ConfigError(
                f"{where}: unknown keys {unknown}. Valid keys: {', '.join(sorted(known))}"
            )

        kwargs: dict[str, Any] = {}
        for name, value in data.items():
            target: Any = _field_type(hints[name])
            key_path: str = f"{path}.{name}" if path else name
            if is_dataclass(target):
                kwargs[name] = ConfigLoader.build(target, value, key_path)
            elif isinstance(value, list):
                kwargs[name] = tuple(tuple(v) if isinstance(v, list) else v for v in value)
            else:
                kwargs[name] = value

        try:
            return cls(**kwargs)
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{path or 'config'}: {e}") from e

    @staticmethod
    def parse_override(text: str) -> tuple[list[str], Any]:
        """
        "a.b=値" を (["a", "b"], 値) に分解 (値はYAMLとして解釈)

        Raises:
            ConfigError: "=" がない、またはキーが空の場合
        """
        key, sep, raw = text.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"Override must look like key.path=value, got '{text}'")
        return key.strip().split("."), yaml.safe_load(raw)

    @staticmethod
    def apply_overrides(data: dict[str, Any], overrides: Sequence[str]) -> dict[str, Any]:
        """ドット区切りの上書きを辞書に適用した新しい辞書"""
        merged: dict[str, Any] = _plain(data)
        for override in overrides:
            keys, value = ConfigLoader.parse_override(override)
            node: dict[str, Any] = merged
            for key in keys[:-1]:
                child: Any = node.setdefault(key, {})
                if not isinstance(child, dict):
                    raise ConfigError(f"Cannot override '{override}': '{key}' is not a section")
                node = child
            node[keys[-1]] = value
        return merged

    @staticmethod
    def read_yaml(path: str | Path) -> dict[str, Any]:
        """
        Raises:
            FileNotFoundError: ファイルが存在しない場合
            ConfigError: YAMLとして読めない、またはトップレベルが辞書でない場合
        """
        file_path: Path = Path(path)
        if not file_path.exists():
            raise FileNotFoundError(f"File not found: {path}")
        try:
            with open(file_path, "r", encoding="utf-8") as f:
                data: Any = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"{file_path.name}: invalid YAML ({e})") from e
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ConfigError(f"{file_path.name}: top level must be a mapping")
        return data

    @staticmethod
    def load(
        path: Optional[str | Path] = None, overrides: Sequence[str] = ()
    ) -> PipelineConfig:
        """
        設定ファイル (省略時は既定値) に上書きを適用して PipelineConfig を作る

        Args:
            path: YAMLファイル
            overrides: "key.path=value" の列

        Returns:
            PipelineConfig
        """
        data: dict[str, Any] = ConfigLoader.read_yaml(path) if path is not None else {}
        config: PipelineConfig = ConfigLoader.build(
            PipelineConfig, ConfigLoader.apply_overrides(data, overrides)
        )
        logger.debug("Loaded config from %s with %d overrides", path or "defaults", len(overrides))
        return config

    @staticmethod
    def dump(config: PipelineConfig) -> str:
        return yaml.safe_dump(config.to_dict(), sort_keys=False, allow_unicode=True)

    @staticmethod
    def write_snapshot(
        config: PipelineConfig, out_dir: str | Path, source: Optional[str | Path] = None
    ) -> list[Path]:
        """
        解決済みの設定を config_snapshot.yaml に書き、入力ファイルもそのままコピーする

        Returns:
            書き出したファイルのパス
        """
        root: Path = Path(out_dir)
        root.mkdir(parents=True, exist_ok=True)
        snapshot: Path = root / SNAPSHOT_NAME
        snapshot.write_text(ConfigLoader.dump(config), encoding="utf-8")
        written: list[Path] = [snapshot]

        if source is not None:
            source_path: Path = Path(source)
            copy_path: Path = root / f"input_{source_path.name}"
            if source_path.resolve() != copy_path.resolve():
                shutil.copyfile(source_path, copy_path)
            written.append(copy_path)
        return written


load_config = ConfigLoader.load

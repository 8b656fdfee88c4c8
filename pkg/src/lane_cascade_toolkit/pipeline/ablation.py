"""
ディスクリプタサイズ × クラス体系のアブレーション

同じ検出記録から各サイズのディスクリプタを作り直し、セルごとに分類器を学習して
分類精度を表にまとめる。
"""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Optional, Sequence

import polars as pl

from lane_cascade_toolkit.analysis.metrics import ClassificationMetrics
from lane_cascade_toolkit.classification.descriptor import DESCRIPTOR_SIZES
from lane_cascade_toolkit.classification.model import ClsModelConfig, DescriptorClassifier
from lane_cascade_toolkit.classification.records import DetectionRecord, DetectionRecorder
from lane_cascade_toolkit.classification.taxonomy import TaxonomyScheme
from lane_cascade_toolkit.classification.trainer import (
    ClsTrainingConfig,
    ClsTrainingResult,
    DescriptorPairs,
    train_classifier,
)
from lane_cascade_toolkit.errors import LaneCascadeError
from lane_cascade_toolkit.seeding import derive_seed

logger = logging.getLogger(__name__)

ABLATION_COLUMNS: dict[str, Any] = {
    "size": pl.Int64,
    "scheme": pl.Utf8,
    "accuracy": pl.Float64,
    "error": pl.Utf8,
}


@dataclass(frozen=True, eq=False)
class AblationResult:
    """
    Attributes:
        table: size, scheme, accuracy, error の縦長の表 (失敗したセルは accuracy が null)
    """

    table: pl.DataFrame

    def pivot(self) -> pl.DataFrame:
        """行がサイズ、列がクラス体系の表"""
        return self.table.pivot(on="scheme", index="size", values="accuracy")

    def write(self, out_dir: str | Path) -> list[Path]:
        """ablation.csv と ablation_table.csv を書き出す"""
        root: Path = Path(out_dir)
        root.mkdir(parents=True, exist_ok=True)
        long_path: Path = root / "ablation.csv"
        self.table.write_csv(long_path)
        pivot_path: Path = root / "ablation_table.csv"
        self.pivot().write_csv(pivot_path)
        logger.info("Wrote ablation table to %s", root)
        return [long_path, pivot_path]


class DescriptorAblation:
    """セルごとの学習と評価"""

    @staticmethod
    def cell_seed(seed: int, size: int, scheme: str) -> int:
        # セルの順序や他のセルの成否に依存しない
        return derive_seed(seed, size, scheme)

    @staticmethod
    def run_cell(
        train_records: Sequence[DetectionRecord],
        val_records: Optional[Sequence[DetectionRecord]],
        size: int,
        scheme: TaxonomyScheme,
        model_config: ClsModelConfig,
        hyperparams: ClsTrainingConfig,
        seed: int,
        device: str = "cpu",
    ) -> float:
        """
        1セル分の分類器を学習して精度を返す

        val_records があればそれで評価し、なければ学習時の検証精度を使う。

        Raises:
            LaneCascadeError: ペアが作れない、学習できない、精度が定義できない場合
        """
        config: ClsModelConfig = replace(
            model_config, descriptor_size=size, num_outputs=scheme.num_outputs
        )
        pairs: DescriptorPairs = DetectionRecorder.to_pairs(train_records, size, scheme)
        result: ClsTrainingResult = train_classifier(
            pairs, config, hyperparams, seed=seed, device=device
        )
        if val_records is None:
            return result.best_val_accuracy

        held_out: DescriptorPairs = DetectionRecorder.to_pairs(val_records, size, scheme)
        predictions: list[tuple[int, float]] = DescriptorClassifier.classify(
            result.model, held_out.pixels
        )
        return ClassificationMetrics.classification_accuracy(
            [p for p, _ in predictions], [int(t) for t in held_out.targets]
        )

    @staticmethod
    def ablate_descriptor_sizes(
        train_records: Sequence[DetectionRecord],
        val_records: Optional[Sequence[DetectionRecord]] = None,
        sizes: Sequence[int] = DESCRIPTOR_SIZES,
        schemes: Sequence[str] = ("two_class", "three_class"),
        model_config: ClsModelConfig = ClsModelConfig(),
        hyperparams: ClsTrainingConfig = ClsTrainingConfig(),
        seed: int = 0,
        device: str = "cpu",
    ) -> AblationResult:
        """
        サイズ × クラス体系の全セルで分類器を学習して精度表を作る

        失敗したセルは警告を出して error 列にメッセージを残し、残りのセルを続ける。

        Args:
            train_records: 学習に使う検出記録
            val_records: 評価に使う検出記録 (省略時は学習データから取り分ける)
            sizes: ディスクリプタサイズ
            schemes: クラス体系の名前
            model_config: 分類器の設定 (サイズと出力数はセルごとに上書き)
            hyperparams: 学習設定
            seed: ルートシード
            device: 学習デバイス

        Returns:
            AblationResult (行はサイズの順、同じサイズ内はクラス体系の順)
        """
        resolved: list[TaxonomyScheme] = [TaxonomyScheme.from_name(s) for s in schemes]
        rows: list[dict[str, Any]] = []

        for size in sizes:
            for scheme in resolved:
                accuracy: Optional[float] = None
                error: Optional[str] = None
                try:
                    accuracy = DescriptorAblation.run_cell(
                        train_records,
                        val_records,
                        int(size),
                        scheme,
                        model_config,
                        hyperparams,
                        DescriptorAblation.cell_seed(seed, int(size), scheme.name),
                        device,
                    )
                    logger.info("ablation S=%d %s: accuracy=%.4f", size, scheme.name, accuracy)
                except (LaneCascadeError, RuntimeError) as e:
                    error = f"{type(e).__name__}: {e}"
                    logger.warning("ablation S=%d %s failed: %s", size, scheme.name, error)
                rows.append(
                    {"size": int(size), "scheme": scheme.name, "accuracy": accuracy, "error": error}
                )

        return AblationResult(pl.DataFrame(rows, schema=ABLATION_COLUMNS))


ablate_descriptor_sizes = DescriptorAblation.ablate_descriptor_sizes

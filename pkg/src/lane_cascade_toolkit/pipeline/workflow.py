"""
設定ファイルから各段の学習・推論・評価を実行する

CLI の各コマンドはここの関数を1つ呼ぶだけにしている。出力はすべて
config.output_dir の下にコマンドごとのサブディレクトリで書き出す。
"""

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from PIL import Image

from lane_cascade_toolkit.classification.descriptor import DescriptorExtractor, DescriptorSource
from lane_cascade_toolkit.classification.model import DescriptorClassifier
from lane_cascade_toolkit.classification.records import DetectionRecord, DetectionRecorder
from lane_cascade_toolkit.classification.taxonomy import TaxonomyScheme
from lane_cascade_toolkit.classification.trainer import (
    ClsTrainingResult,
    DescriptorPairs,
    train_classifier,
)
from lane_cascade_toolkit.config import PipelineConfig
from lane_cascade_toolkit.data.annotations import ClassAnnotationLoader, ClassAnnotations
from lane_cascade_toolkit.data.splitter import DatasetSplitter
from lane_cascade_toolkit.data.synthetic import SceneGenerator
from lane_cascade_toolkit.data.tusimple import TuSimpleLoader
from lane_cascade_toolkit.data.types import Sample
from lane_cascade_toolkit.errors import EmptyAssociationError, EmptyDatasetError
from lane_cascade_toolkit.i18n import I18n
from lane_cascade_toolkit.pipeline.ablation import AblationResult, DescriptorAblation
from lane_cascade_toolkit.pipeline.cascade import CascadeResult, CascadeRunner
from lane_cascade_toolkit.pipeline.evaluation import CascadeEvaluator, Evaluation
from lane_cascade_toolkit.segmentation.checkpoint import load_seg_checkpoint
from lane_cascade_toolkit.training.seg_trainer import SegmentationTrainer, SegTrainingResult
from lane_cascade_toolkit.visualization.matplotlib_charts import MatplotlibCharts
from lane_cascade_toolkit.visualization.overlay import OverlayRenderer
from lane_cascade_toolkit.visualization.plotly_charts import PlotlyCharts
from lane_cascade_toolkit.visualization.seaborn_charts import SeabornCharts

logger = logging.getLogger(__name__)

SPLITS: tuple[str, ...] = ("train", "val", "test", "all")
SEG_DIR: str = "segmentation"
CLS_DIR: str = "classification"


@dataclass(frozen=True, eq=False)
class DatasetSplits:
    train: list[Sample]
    val: list[Sample]
    test: list[Sample]

    def get(self, name: str) -> list[Sample]:
        if name == "all":
            return self.train + self.val + self.test
        if name not in SPLITS:
            raise ValueError(f"Unknown split '{name}'. Valid: {', '.join(SPLITS)}")
        return getattr(self, name)


def _i18n(config: PipelineConfig) -> I18n:
    return I18n(config.report.language)  # type: ignore[arg-type]


def _overlay_name(source_id: str) -> str:
    # TuSimple の raw_file はファイル名だけでは一意にならない
    stem: str = re.sub(r"[^\w.-]+", "_", str(Path(source_id or "image").with_suffix("")))
    return f"{stem.strip('_')}.png"


class Workflow:
    """パイプラインの各コマンド"""

    @staticmethod
    def load_samples(config: PipelineConfig) -> list[Sample]:
        """
        設定に従ってサンプルを生成または読み込む

        Raises:
            FileNotFoundError: アノテーションファイルがない場合
            EmptyDatasetError: サンプルが1つもない場合
        """
        dataset = config.dataset
        if dataset.source == "synthetic":
            spec = config.scenes.to_spec(config.subsystem_seed("data"))
            samples: list[Sample] = SceneGenerator.generate_many(spec, config.scenes.count)
        else:
            classes: Optional[ClassAnnotations] = (
                ClassAnnotationLoader.load(dataset.class_file) if dataset.class_file else None
            )
            samples = []
            for label_file in dataset.label_files:
                samples += TuSimpleLoader.load_file(
                    label_file, dataset.root, dataset.image_size, classes
                )

        if not samples:
            raise EmptyDatasetError("The configured dataset has no samples")
        return samples

    @staticmethod
    def load_splits(config: PipelineConfig) -> DatasetSplits:
        samples: list[Sample] = Workflow.load_samples(config)
        train, val, test = DatasetSplitter.split(
            samples, config.dataset.split, seed=config.subsystem_seed("data")
        )
        logger.info("Dataset split: %d train, %d val, %d test", len(train), len(val), len(test))
        return DatasetSplits(train, val, test)

    @staticmethod
    def generate_data(config: PipelineConfig, out_dir: Optional[str | Path] = None) -> Path:
        """合成データセットをTuSimple形式で書き出す"""
        root: Path = Path(out_dir) if out_dir is not None else config.output_path / "dataset"
        spec = config.scenes.to_spec(config.subsystem_seed("data"))
        samples: list[Sample] = SceneGenerator.generate_many(spec, config.scenes.count)
        return TuSimpleLoader.write_dataset(samples, root)

    @staticmethod
    def seg_checkpoint_path(config: PipelineConfig) -> Path:
        if config.seg_checkpoint:
            return Path(config.seg_checkpoint)
        return config.output_path / SEG_DIR / "best.pt"

    @staticmethod
    def cls_checkpoint_path(config: PipelineConfig) -> Path:
        if config.cls_checkpoint:
            return Path(config.cls_checkpoint)
        return config.output_path / CLS_DIR / "classifier.pt"

    @staticmethod
    def train_segmentation(
        config: PipelineConfig, resume: Optional[str | Path] = None
    ) -> SegTrainingResult:
        """
        2フェーズのカリキュラムでセグメンテーションモデルを学習

        Returns:
            SegTrainingResult (best.pt, last.pt, history.csv を segmentation/ に書く)

        Raises:
            DivergenceError: 損失が有限値でなくなった場合
        """
        splits: DatasetSplits = Workflow.load_splits(config)
        out_dir: Path = config.output_path / SEG_DIR
        trainer: SegmentationTrainer = SegmentationTrainer(
            config.segmentation,
            config.seg_training,
            config.loss,
            config.metrics,
            seed=config.seed,
            output_dir=out_dir,
            device=config.device,
        )
        result: SegTrainingResult = trainer.fit(splits.train, splits.val, resume=resume)

        if config.report.charts:
            i18n: I18n = _i18n(config)
            MatplotlibCharts.save(
                MatplotlibCharts.create_training_curve(result.history, i18n),
                out_dir / "training_curve.png",
            )
            PlotlyCharts.save(
                PlotlyCharts.create_loss_chart(result.history, i18n),
                out_dir / "training_curve.html",
            )
        logger.info(
            "Best segmentation checkpoint: %s (epoch %d)",
            result.best_checkpoint,
            result.best_epoch + 1,
        )
        return result

    @staticmethod
    def collect_records(
        config: PipelineConfig, seg_checkpoint: Optional[str | Path] = None
    ) -> tuple[list[DetectionRecord], list[DetectionRecord], str]:
        """
        学習用と検証用の検出記録を集める

        Returns:
            (学習用の記録, 検証用の記録, セグメンテーション設定のハッシュ)
        """
        path: Path = (
            Path(seg_checkpoint) if seg_checkpoint else Workflow.seg_checkpoint_path(config)
        )
        model, payload = load_seg_checkpoint(path, config.device)
        splits: DatasetSplits = Workflow.load_splits(config)

        def collect(samples: Sequence[Sample]) -> list[DetectionRecord]:
            return DetectionRecorder.collect(
                model,
                samples,
                threshold_px=config.metrics.threshold_px,
                min_points=config.metrics.min_points,
                frame=config.metrics.resolution,
                batch_size=config.seg_training.batch_size,
            )

        return collect(splits.train), collect(splits.val), payload["config_hash"]

    @staticmethod
    def dump_descriptors(
        records: Sequence[DetectionRecord], size: int, scheme: TaxonomyScheme, out_dir: Path
    ) -> int:
        """学習に使うディスクリプタをPNGで書き出す"""
        written: int = 0
        for record in records:
            if record.label is None or scheme.remap(record.label) is None:
                continue
            descriptor = DescriptorExtractor.extract_descriptor(
                record.image,
                record.pixels,
                size,
                DescriptorSource(record.source_id, record.boundary_index),
            )
            DescriptorExtractor.save(descriptor, out_dir)
            written += 1
        logger.info("Dumped %d descriptors to %s", written, out_dir)
        return written

    @staticmethod
    def train_classification(
        config: PipelineConfig, seg_checkpoint: Optional[str | Path] = None
    ) -> Path:
        """
        学習済みセグメンテーションの検出から {ディスクリプタ, クラス} を作り分類器を学習

        Returns:
            classifier.pt のパス

        Raises:
            EmptyAssociationError: 正解に対応付いた検出が1つもない場合
        """
        scheme: TaxonomyScheme = config.taxonomy
        size: int = config.descriptor.size
        train_records, val_records, seg_hash = Workflow.collect_records(config, seg_checkpoint)

        pairs: DescriptorPairs = DetectionRecorder.to_pairs(train_records, size, scheme)
        if len(pairs) == 0:
            raise EmptyAssociationError(
                f"None of {len(train_records)} detections associated with a labeled boundary "
                f"within {config.metrics.threshold_px:g} px"
            )
        counts: np.ndarray = pairs.class_counts(scheme.num_outputs)
        logger.info(
            "Descriptor pairs: %s",
            ", ".join(f"{n}={int(c)}" for n, c in zip(scheme.output_names, counts)),
        )

        val_pairs: Optional[DescriptorPairs] = DetectionRecorder.to_pairs(val_records, size, scheme)
        if len(val_pairs) == 0:
            val_pairs = None

        out_dir: Path = config.output_path / CLS_DIR
        if config.descriptor.dump:
            Workflow.dump_descriptors(train_records, size, scheme, out_dir / "descriptors")

        result: ClsTrainingResult = train_classifier(
            pairs,
            config.classifier_config,
            config.cls_training,
            seed=config.subsystem_seed("cls_init"),
            val_pairs=val_pairs,
            device=config.device,
        )
        out_dir.mkdir(parents=True, exist_ok=True)
        result.history.write_csv(out_dir / "history.csv")
        return DescriptorClassifier.save_checkpoint(
            out_dir / "classifier.pt",
            result.model,
            scheme,
            seg_config_hash=seg_hash,
            best_epoch=result.best_epoch,
            best_val_accuracy=result.best_val_accuracy,
            seed=config.seed,
        )

    @staticmethod
    def runner(config: PipelineConfig) -> CascadeRunner:
        return CascadeRunner.from_checkpoints(
            Workflow.seg_checkpoint_path(config),
            Workflow.cls_checkpoint_path(config),
            descriptor_size=config.descriptor.size,
            min_points=config.metrics.min_points,
            device=config.device,
        )

    @staticmethod
    def result_record(result: CascadeResult) -> dict[str, Any]:
        """推論結果の JSON 表現 (座標はネットワーク解像度)"""
        boundaries: list[dict[str, Any]] = []
        for b in result.boundaries:
            rows, cols = b.polyline.points()
            boundaries.append(
                {
                    "instance_id": b.instance_id,
                    "class_index": b.class_index,
                    "class_name": b.class_name,
                    "confidence": round(b.confidence, 6),
                    "rows": rows.tolist(),
                    "cols": [round(float(x), 3) for x in cols],
                }
            )
        return {
            "raw_file": result.source_id,
            "frame_size": list(result.frame_size),
            "boundaries": boundaries,
            "timings_ms": {k: round(v, 3) for k, v in result.timings.items()},
        }

    @staticmethod
    def _read_image(path: Path) -> np.ndarray:
        if not path.exists():
            raise FileNotFoundError(f"File not found: {path}")
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)

    @staticmethod
    def infer(
        config: PipelineConfig,
        images: Sequence[str | Path] = (),
        split: str = "test",
        overlays: bool = False,
    ) -> Path:
        """
        画像ファイル (省略時はデータセットの split) を推論して predictions.jsonl に書く

        Returns:
            predictions.jsonl のパス
        """
        runner: CascadeRunner = Workflow.runner(config)
        out_dir: Path = config.output_path / "inference"
        out_dir.mkdir(parents=True, exist_ok=True)

        if images:
            inputs: list[tuple[str, np.ndarray]] = [
                (Path(p).name, Workflow._read_image(Path(p))) for p in images
            ]
        else:
            inputs = [(s.source_id, s.image) for s in Workflow.load_splits(config).get(split)]

        out_path: Path = out_dir / "predictions.jsonl"
        with open(out_path, "w", encoding="utf-8") as f:
            for source_id, image in inputs:
                result: CascadeResult = runner.infer(image, source_id)
                f.write(json.dumps(Workflow.result_record(result)) + "\n")
                if overlays:
                    OverlayRenderer.save_overlay(
                        out_dir / "overlays" / _overlay_name(source_id),
                        image,
                        result,
                        config.report.overlay_mode,  # type: ignore[arg-type]
                    )

        logger.info("Wrote %d predictions to %s", len(inputs), out_path)
        return out_path

    @staticmethod
    def evaluate(config: PipelineConfig, split: str = "test") -> Evaluation:
        """
        split のサンプルを評価してレポートを evaluation/ に書く

        Raises:
            UndefinedMetricError: サンプルが空、または正解レーンがない場合
        """
        runner: CascadeRunner = Workflow.runner(config)
        samples: list[Sample] = Workflow.load_splits(config).get(split)
        evaluation: Evaluation = CascadeEvaluator.evaluate(samples, runner, config.metrics)

        out_dir: Path = config.output_path / "evaluation"
        i18n: I18n = _i18n(config)
        evaluation.report.write(out_dir, i18n)
        if config.report.charts:
            PlotlyCharts.save(
                PlotlyCharts.create_per_image_chart(evaluation.report.per_image(), i18n),
                out_dir / "per_image.html",
            )
            if evaluation.report.confusion is not None:
                MatplotlibCharts.save(
                    SeabornCharts.create_confusion_heatmap(evaluation.report.confusion, i18n),
                    out_dir / "confusion.png",
                )
        return evaluation

    @staticmethod
    def ablate(
        config: PipelineConfig, seg_checkpoint: Optional[str | Path] = None
    ) -> AblationResult:
        """ディスクリプタサイズ × クラス体系のアブレーションを ablation/ に書く"""
        train_records, val_records, _ = Workflow.collect_records(config, seg_checkpoint)
        result: AblationResult = DescriptorAblation.ablate_descriptor_sizes(
            train_records,
            val_records or None,
            sizes=config.ablation.sizes,
            schemes=config.ablation.schemes,
            model_config=config.classifier,
            hyperparams=config.cls_training,
            seed=config.subsystem_seed("cls_init"),
            device=config.device,
        )

        out_dir: Path = config.output_path / "ablation"
        result.write(out_dir)
        if config.report.charts:
            MatplotlibCharts.save(
                SeabornCharts.create_ablation_heatmap(result.pivot(), _i18n(config)),
                out_dir / "ablation.png",
            )
        return result

    @staticmethod
    def render_overlays(
        config: PipelineConfig, split: str = "test", mode: Optional[str] = None
    ) -> list[Path]:
        """split のサンプルを推論して重畳画像を overlays/ に書く"""
        runner: CascadeRunner = Workflow.runner(config)
        out_dir: Path = config.output_path / "overlays"
        paths: list[Path] = []
        for sample in Workflow.load_splits(config).get(split):
            result: CascadeResult = runner.infer(sample.image, sample.source_id)
            paths.append(
                OverlayRenderer.save_overlay(
                    out_dir / _overlay_name(sample.source_id),
                    sample.image,
                    result,
                    mode or config.report.overlay_mode,  # type: ignore[arg-type]
                )
            )
        logger.info("Wrote %d overlays to %s", len(paths), out_dir)
        return paths


train_segmentation = Workflow.train_segmentation
train_classification = Workflow.train_classification

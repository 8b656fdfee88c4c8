import json

import numpy as np
import pytest
import torch
from PIL import Image

from lane_cascade_toolkit import K_MAX
from lane_cascade_toolkit.classification import (
    THREE_CLASS,
    TWO_CLASS,
    ClsModelConfig,
    ClsTrainingConfig,
    DetectionRecord,
    build_classifier,
    save_cls_checkpoint,
)
from lane_cascade_toolkit.config import ConfigLoader
from lane_cascade_toolkit.data.synthetic import SceneGenerator, SceneSpec, scenes_with_palette
from lane_cascade_toolkit.data.types import ClassLabel, Sample
from lane_cascade_toolkit.errors import CompatibilityError, UndefinedMetricError
from lane_cascade_toolkit.geometry import Polyline, rasterize_boundaries
from lane_cascade_toolkit.pipeline import (
    CascadeEvaluator,
    CascadeResult,
    CascadeRunner,
    ClassifiedBoundary,
    DescriptorAblation,
    Workflow,
)
from lane_cascade_toolkit.pipeline.cascade import STAGES
from lane_cascade_toolkit.segmentation.checkpoint import load_seg_checkpoint, save_seg_checkpoint
from lane_cascade_toolkit.segmentation.models import build_model
from lane_cascade_toolkit.visualization.overlay import (
    GREEN,
    INSTANCE_COLORS,
    RED,
    OverlayRenderer,
)

TINY_CLASSIFIER = ClsModelConfig(conv_blocks=(8, 16), fc_widths=(16,))


def _gt_records(samples: list[Sample]) -> list[DetectionRecord]:
    """正解境界をそのまま検出とみなした記録"""
    records: list[DetectionRecord] = []
    for sample in samples:
        data = rasterize_boundaries(sample.boundaries, 3, sample.image_size).data
        for k, label in enumerate(sample.classes):
            pixels = np.argwhere(data == k + 1)[:, ::-1]
            if len(pixels):
                records.append(
                    DetectionRecord(
                        sample.source_id, k, sample.image, pixels, sample.boundaries[k], label
                    )
                )
    return records


def _ground_truth_logits(sample: Sample) -> torch.Tensor:
    """正解ラスタをそのままセグメンテーション出力にしたロジット (1×C×H×W)"""
    data = rasterize_boundaries(sample.boundaries, 3, sample.image_size).data
    one_hot = torch.nn.functional.one_hot(torch.from_numpy(data).long(), K_MAX + 1)
    return one_hot.permute(2, 0, 1)[None].float() * 10.0


class TestCascade:
    def test_one_call_per_stage_per_image(self, runner):
        samples = SceneGenerator.generate_many(SceneSpec(image_size=(128, 64)), 50, seed=4)
        current: list[Sample] = []
        cls_forwards: list[int] = []
        # 偶数番目の画像は正解ラスタを出力させ、境界が必ず検出されるようにする
        runner.seg_model.register_forward_hook(
            lambda module, args, output: _ground_truth_logits(current[-1])
            if len(current) % 2
            else output
        )
        runner.cls_model.register_forward_hook(
            lambda module, args, output: cls_forwards.append(args[0].shape[0])
        )

        with_boundaries = 0
        for sample in samples:
            current.append(sample)
            result = runner.infer(sample.image, sample.source_id)
            with_boundaries += len(result) > 0

            assert len(result) <= K_MAX
            assert all(b.polyline.num_points >= 3 for b in result.boundaries)
            assert all(b.class_name in TWO_CLASS.output_names for b in result.boundaries)
            assert all(0.0 <= b.confidence <= 1.0 for b in result.boundaries)
            ids = [b.instance_id for b in result.boundaries]
            assert ids == sorted(ids)
        assert with_boundaries >= 25
        assert len(cls_forwards) == with_boundaries
        assert all(n > 0 for n in cls_forwards)
        assert runner.calls == {"segmentation": 50, "classification": with_boundaries}

    def test_deterministic(self, runner, scenes):
        first = [runner.infer(s.image) for s in scenes]
        second = [runner.infer(s.image) for s in scenes]
        for a, b in zip(first, second):
            assert [x.polyline for x in a.boundaries] == [y.polyline for y in b.boundaries]
            assert [x.class_index for x in a.boundaries] == [y.class_index for y in b.boundaries]

    def test_timings_are_positive(self, runner, scenes):
        result = runner.infer(scenes[0].image)
        assert set(STAGES) <= set(result.timings)
        assert all(v > 0 for v in result.timings.values())

    def test_any_input_resolution(self, runner):
        result = runner.infer(np.zeros((720, 1280, 3), dtype=np.uint8))
        assert result.frame_size == (128, 64)
        runner.reset_counters()
        assert runner.calls["segmentation"] == 0

    def test_binary_head_is_rejected(self, mini_config, cls_model):
        seg = build_model(mini_config, head_channels=2)
        with pytest.raises(CompatibilityError, match="instance head"):
            CascadeRunner(seg, cls_model, TWO_CLASS)

    def test_output_count_mismatch(self, seg_model, cls_model):
        with pytest.raises(CompatibilityError):
            CascadeRunner(seg_model, cls_model, THREE_CLASS)

    def test_descriptor_size_mismatch(self, seg_model, cls_model):
        with pytest.raises(CompatibilityError):
            CascadeRunner.check_compatible(seg_model, cls_model, TWO_CLASS, descriptor_size=32)

    def test_from_checkpoints(self, tmp_path, seg_model, cls_model):
        seg_path = save_seg_checkpoint(tmp_path / "seg.pt", seg_model, "instance", 0)
        seg_hash = load_seg_checkpoint(seg_path)[1]["config_hash"]
        cls_path = save_cls_checkpoint(tmp_path / "cls.pt", cls_model, TWO_CLASS, seg_hash)

        runner = CascadeRunner.from_checkpoints(seg_path, cls_path, descriptor_size=16)
        assert runner.scheme is TWO_CLASS
        assert runner.input_size == (128, 64)

    def test_classifier_from_another_segmentation_model(self, tmp_path, seg_model, cls_model):
        seg_path = save_seg_checkpoint(tmp_path / "seg.pt", seg_model, "instance", 0)
        cls_path = save_cls_checkpoint(tmp_path / "cls.pt", cls_model, TWO_CLASS, "f" * 16)
        with pytest.raises(CompatibilityError, match="different segmentation model"):
            CascadeRunner.from_checkpoints(seg_path, cls_path)

    def test_missing_checkpoint(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            CascadeRunner.from_checkpoints(tmp_path / "a.pt", tmp_path / "b.pt")


class TestEvaluation:
    def test_empty_dataset(self, runner):
        with pytest.raises(UndefinedMetricError):
            CascadeEvaluator.evaluate([], runner)

    def test_report_covers_every_image(self, runner, scenes):
        evaluation = CascadeEvaluator.evaluate(scenes[:4], runner)
        report = evaluation.report
        assert len(evaluation.results) == 4
        assert report.per_image().height == 4
        assert 0.0 <= report.accuracy <= 1.0
        assert 0.0 <= report.fn_rate <= 1.0
        assert report.confusion.columns == ["actual", "continuous", "dashed"]


class TestAblation:
    @pytest.fixture(scope="class")
    def records(self) -> list[DetectionRecord]:
        palette = (
            ClassLabel.SINGLE_WHITE_CONTINUOUS,
            ClassLabel.DASHED,
            ClassLabel.DOUBLE_DASHED,
        )
        samples = scenes_with_palette(SceneSpec(seed=3, image_size=(128, 64)), palette, 6)
        return _gt_records(samples)

    def _run(self, records, seed=0, sizes=(16, 32)):
        return DescriptorAblation.ablate_descriptor_sizes(
            records,
            sizes=sizes,
            schemes=("two_class", "three_class"),
            model_config=TINY_CLASSIFIER,
            hyperparams=ClsTrainingConfig(epochs=1, batch_size=8),
            seed=seed,
        )

    def test_table_shape(self, records):
        result = self._run(records)
        assert result.table.height == 4
        assert result.table["size"].to_list() == [16, 16, 32, 32]
        assert result.table["scheme"].to_list() == ["two_class", "three_class"] * 2
        assert result.table["error"].null_count() == 4

        pivot = result.pivot()
        assert pivot.columns == ["size", "two_class", "three_class"]
        assert pivot.height == 2

    def test_reproducible(self, records):
        assert self._run(records, seed=5).table.equals(self._run(records, seed=5).table)

    def test_cell_seed_ignores_grid(self):
        assert DescriptorAblation.cell_seed(1, 32, "two_class") != DescriptorAblation.cell_seed(
            1, 16, "two_class"
        )
        assert DescriptorAblation.cell_seed(1, 32, "two_class") == DescriptorAblation.cell_seed(
            1, 32, "two_class"
        )

    def test_failed_cell_does_not_stop_the_grid(self, records):
        result = self._run(records, sizes=(18, 16))
        errors = result.table["error"].to_list()
        assert errors[0] is not None and "ConfigError" in errors[0]
        assert result.table["accuracy"].to_list()[0] is None
        assert errors[2] is None

    def test_runtime_error_in_one_cell(self, monkeypatch, records):
        def run_cell(train, val, size, scheme, *args):
            if size == 16:
                raise RuntimeError("CUDA out of memory")
            return 0.5

        monkeypatch.setattr(DescriptorAblation, "run_cell", staticmethod(run_cell))
        result = self._run(records)
        assert result.table["error"].to_list()[:2] == ["RuntimeError: CUDA out of memory"] * 2
        assert result.table["accuracy"].to_list() == [None, None, 0.5, 0.5]

    def test_write(self, tmp_path, records):
        paths = self._run(records, sizes=(16,)).write(tmp_path)
        assert [p.name for p in paths] == ["ablation.csv", "ablation_table.csv"]


class TestOverlay:
    def _result(self, class_name: str, instance_id: int = 1) -> CascadeResult:
        polyline = Polyline(np.arange(0, 64, 4), np.full(16, 20.0))
        boundary = ClassifiedBoundary(instance_id, polyline, 1, class_name, 0.9)
        return CascadeResult((boundary,), (128, 64))

    def test_empty_result_returns_a_copy(self):
        image = np.full((64, 128, 3), 9, dtype=np.uint8)
        rendered = OverlayRenderer.render_overlay(image, CascadeResult((), (128, 64)))
        np.testing.assert_array_equal(rendered, image)
        assert rendered is not image

    def test_class_colors(self):
        image = np.zeros((64, 128, 3), dtype=np.uint8)
        dashed = OverlayRenderer.render_overlay(image, self._result("dashed"))
        solid = OverlayRenderer.render_overlay(image, self._result("continuous"))
        assert tuple(dashed[30, 20]) == GREEN
        assert tuple(solid[30, 20]) == RED
        assert image.sum() == 0

    def test_scales_to_source_resolution(self):
        image = np.zeros((256, 512, 3), dtype=np.uint8)
        rendered = OverlayRenderer.render_overlay(image, self._result("dashed"))
        assert tuple(rendered[120, 80]) == GREEN

    def test_instance_mode(self, tmp_path):
        image = np.zeros((64, 128, 3), dtype=np.uint8)
        path = OverlayRenderer.save_overlay(
            tmp_path / "sub" / "o.png", image, self._result("dashed", 2), mode="instance"
        )
        with Image.open(path) as saved:
            assert saved.getpixel((20, 30)) == INSTANCE_COLORS[1]


class TestWorkflow:
    def test_train_infer_evaluate(self, tmp_path):
        config = ConfigLoader.load(
            None,
            [
                f"output_dir={json.dumps(str(tmp_path))}",
                "scenes.count=10",
                "segmentation.architecture=mini",
                "segmentation.input_size=[128, 64]",
                "segmentation.width_multiplier=0.25",
                "seg_training.epochs=2",
                "seg_training.switch_epoch=1",
                "seg_training.batch_size=4",
                "descriptor.size=16",
                "classifier.conv_blocks=[8, 16]",
                "classifier.fc_widths=[16]",
                "report.charts=false",
            ],
        )
        result = Workflow.train_segmentation(config)
        assert result.best_checkpoint.exists()
        assert result.history.height == 2

        seg_model, payload = load_seg_checkpoint(result.best_checkpoint)
        assert payload["phase"] == "instance"
        torch.manual_seed(0)
        classifier = build_classifier(config.classifier_config)
        save_cls_checkpoint(
            Workflow.cls_checkpoint_path(config), classifier, TWO_CLASS, payload["config_hash"]
        )

        predictions = Workflow.infer(config, split="all")
        lines = predictions.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 10
        assert set(json.loads(lines[0])) == {"raw_file", "frame_size", "boundaries", "timings_ms"}

        evaluation = Workflow.evaluate(config, split="all")
        assert (tmp_path / "evaluation" / "metrics.txt").exists()
        assert len(evaluation.results) == 10

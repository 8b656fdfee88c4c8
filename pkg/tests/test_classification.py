import math
from fractions import Fraction

import numpy as np
import pytest
import torch

from lane_cascade_toolkit.classification import (
    FULL,
    THREE_CLASS,
    TWO_CLASS,
    ClassifierTrainer,
    ClsModelConfig,
    ClsTrainingConfig,
    DescriptorClassifier,
    DescriptorExtractor,
    DescriptorPairs,
    DetectionRecord,
    DetectionRecorder,
    GroundTruthAssociation,
    TaxonomyScheme,
    remap_class,
)
from lane_cascade_toolkit.data.synthetic import SceneSpec, scenes_with_palette
from lane_cascade_toolkit.data.types import ClassLabel, Sample
from lane_cascade_toolkit.errors import (
    CompatibilityError,
    ConfigError,
    DescriptorError,
    EmptyDatasetError,
    ShapeMismatchError,
)
from lane_cascade_toolkit.geometry import Polyline, rasterize_boundaries
from lane_cascade_toolkit.segmentation.decode import DetectedBoundary

C = ClassLabel

EXPECTED_TWO_CLASS: dict[ClassLabel, int | None] = {
    C.SINGLE_WHITE_CONTINUOUS: 0,
    C.DOUBLE_WHITE_CONTINUOUS: 0,
    C.SINGLE_YELLOW_CONTINUOUS: 0,
    C.DOUBLE_YELLOW_CONTINUOUS: 0,
    C.DASHED: 1,
    C.DOUBLE_DASHED: 1,
    C.BOTTS_DOTS: 1,
    C.UNKNOWN: None,
}

EXPECTED_THREE_CLASS: dict[ClassLabel, int | None] = {
    **EXPECTED_TWO_CLASS,
    C.DOUBLE_DASHED: 2,
}


def _nearest_indices(length: int, size: int) -> list[int]:
    count = size * size
    if count == 1:
        return [0]
    return [
        math.floor(Fraction(k * (length - 1), count - 1) + Fraction(1, 2)) for k in range(count)
    ]


def _gt_pixels(sample: Sample, width_px: int = 3) -> list[np.ndarray]:
    """正解境界ごとのピクセル (x, y) をラスタ順で"""
    data = rasterize_boundaries(sample.boundaries, width_px, sample.image_size).data
    return [np.argwhere(data == k)[:, ::-1] for k in range(1, len(sample.boundaries) + 1)]


def _descriptor_pairs(
    samples: list[Sample], size: int, scheme: TaxonomyScheme
) -> DescriptorPairs:
    pairs: list[tuple[np.ndarray, int]] = []
    for sample in samples:
        for pixels, label in zip(_gt_pixels(sample), sample.classes):
            target = scheme.remap(label)
            if len(pixels) == 0 or target is None:
                continue
            descriptor = DescriptorExtractor.extract_descriptor(sample.image, pixels, size)
            pairs.append((descriptor.pixels, target))
    return DescriptorPairs.from_pairs(pairs, size)


class TestTaxonomy:
    @pytest.mark.parametrize("label", list(ClassLabel))
    def test_two_class_table(self, label):
        assert remap_class(label, "two_class") == EXPECTED_TWO_CLASS[label]

    @pytest.mark.parametrize("label", list(ClassLabel))
    def test_three_class_table(self, label):
        assert remap_class(label, THREE_CLASS) == EXPECTED_THREE_CLASS[label]

    def test_full_is_identity(self):
        assert [FULL.remap(label) for label in ClassLabel] == list(range(8))
        assert FULL.num_outputs == 8

    def test_output_names(self):
        assert TWO_CLASS.output_names == ("continuous", "dashed")
        assert THREE_CLASS.output_names == ("continuous", "dashed", "double_dashed")

    def test_unknown_scheme(self):
        with pytest.raises(ConfigError):
            TaxonomyScheme.from_name("four_class")


class TestDescriptor:
    def test_exact_size_is_a_reshape(self, rng):
        image = rng.integers(0, 256, size=(20, 20, 3), dtype=np.uint8)
        ys, xs = np.divmod(np.arange(16), 20)
        pixels = np.stack([xs + 2, ys + 5], axis=1)

        descriptor = DescriptorExtractor.extract_descriptor(image, pixels, 4)
        expected = image[pixels[:, 1], pixels[:, 0]].reshape(4, 4, 3)
        np.testing.assert_array_equal(descriptor.pixels, expected)
        assert descriptor.indices.tolist() == list(range(16))

    def test_matches_nearest_index_oracle(self, rng):
        for _ in range(1000):
            length = int(rng.integers(1, 5000))
            size = int(rng.choice([1, 2, 4, 16, 32]))
            indices = DescriptorExtractor.sample_indices(length, size)
            assert indices.tolist() == _nearest_indices(length, size)
            assert np.all(np.diff(indices) >= 0)

    def test_half_length_repeats_pixels(self):
        indices = DescriptorExtractor.sample_indices(8, 4)
        assert np.bincount(indices).tolist() == [2] * 8

    def test_constant_image(self):
        image = np.full((10, 10, 3), 77, dtype=np.uint8)
        pixels = np.array([[1, 1], [2, 2], [3, 3]])
        descriptor = DescriptorExtractor.extract_descriptor(image, pixels, 8)
        assert descriptor.pixels.shape == (8, 8, 3)
        assert np.all(descriptor.pixels == 77)

    def test_repainting_off_boundary_pixels(self, rng, scenes):
        sample = scenes[0]
        pixels = _gt_pixels(sample)[1]
        before = DescriptorExtractor.extract_descriptor(sample.image, pixels, 16)

        repainted = rng.integers(0, 256, size=sample.image.shape, dtype=np.uint8)
        repainted[pixels[:, 1], pixels[:, 0]] = sample.image[pixels[:, 1], pixels[:, 0]]
        after = DescriptorExtractor.extract_descriptor(repainted, pixels, 16)
        np.testing.assert_array_equal(before.pixels, after.pixels)

    def test_raster_order(self):
        pixels = np.array([[5, 2], [1, 3], [0, 2]])
        assert DescriptorExtractor.raster_order(pixels).tolist() == [[0, 2], [5, 2], [1, 3]]

    def test_raw_pixels_are_put_in_raster_order(self, rng, scenes):
        sample = scenes[0]
        pixels = _gt_pixels(sample)[0]
        shuffled = pixels[rng.permutation(len(pixels))]
        batch = DescriptorExtractor.batch_descriptors(sample.image, [shuffled], 16)
        ordered = DescriptorExtractor.extract_descriptor(sample.image, pixels, 16)
        np.testing.assert_array_equal(batch.descriptors[0].pixels, ordered.pixels)

    @pytest.mark.parametrize(
        "pixels, size",
        [(np.zeros((0, 2)), 4), (np.array([[1, 1]]), 0), (np.array([[10, 1]]), 4)],
    )
    def test_invalid_input(self, pixels, size):
        with pytest.raises(DescriptorError):
            DescriptorExtractor.extract_descriptor(np.zeros((5, 5, 3), np.uint8), pixels, size)

    def test_batch_matches_single_extraction(self, scenes):
        sample = scenes[1]
        boundaries = [
            DetectedBoundary(k + 1, Polyline.empty(), pixels)
            for k, pixels in enumerate(_gt_pixels(sample))
        ]
        batch = DescriptorExtractor.batch_descriptors(sample.image, boundaries, 8, "x.png")

        assert len(batch) == len(boundaries)
        for descriptor, boundary in zip(batch.descriptors, boundaries):
            single = DescriptorExtractor.extract_descriptor(sample.image, boundary.pixels, 8)
            np.testing.assert_array_equal(descriptor.pixels, single.pixels)
        assert batch.descriptors[2].source.boundary_index == 2

    def test_empty_batch(self):
        batch = DescriptorExtractor.batch_descriptors(np.zeros((4, 4, 3), np.uint8), [], 8)
        assert batch.pixels.shape == (0, 8, 8, 3)

    def test_batch_error_names_boundary(self):
        image = np.zeros((4, 4, 3), np.uint8)
        with pytest.raises(DescriptorError, match="boundary 1") as info:
            DescriptorExtractor.batch_descriptors(image, [np.array([[0, 0]]), np.zeros((0, 2))], 2)
        assert info.value.boundary_index == 1

    def test_dump_name(self, tmp_path):
        image = np.zeros((4, 4, 3), np.uint8)
        batch = DescriptorExtractor.batch_descriptors(
            image, [np.array([[0, 0]])], 2, "synthetic/00000007.png"
        )
        path = DescriptorExtractor.save(batch.descriptors[0], tmp_path)
        assert path.name == "synthetic_00000007_0_2.png"
        assert path.exists()


class TestAssociation:
    def test_picks_nearest(self):
        detected = Polyline([0, 10], [50.0, 50.0])
        gt = [
            (Polyline([0, 10], [10.0, 10.0]), C.DASHED),
            (Polyline([0, 10], [55.0, 55.0]), C.BOTTS_DOTS),
        ]
        assert GroundTruthAssociation.associate_to_gt(detected, gt, 20.0) == C.BOTTS_DOTS

    def test_distance_at_threshold_is_rejected(self):
        detected = Polyline([0], [30.0])
        gt = [(Polyline([0], [10.0]), C.DASHED)]
        assert GroundTruthAssociation.associate_to_gt(detected, gt, 20.0) is None

    def test_tie_goes_to_lower_index(self):
        assert GroundTruthAssociation.nearest([None, 3.0, 3.0]) == (1, 3.0)
        assert GroundTruthAssociation.nearest([None, None]) is None

    def test_across_frames(self):
        detected = Polyline([0, 25], [25.0, 25.0])
        gt = [(Polyline([0, 100], [100.0, 100.0]), C.DASHED)]
        label = GroundTruthAssociation.associate_across_frames(
            detected, (128, 64), gt, (512, 256), 2.0
        )
        assert label == C.DASHED


class TestClassifierModel:
    def test_classify_shapes(self, cls_model, rng):
        batch = rng.integers(0, 256, size=(3, 16, 16, 3), dtype=np.uint8)
        predictions = DescriptorClassifier.classify(cls_model, batch)
        assert len(predictions) == 3
        assert all(0 <= index < 2 and 0.5 <= conf <= 1.0 for index, conf in predictions)

    def test_empty_batch(self, cls_model):
        assert DescriptorClassifier.classify(cls_model, np.zeros((0, 16, 16, 3), np.uint8)) == []

    def test_wrong_descriptor_size(self, cls_model):
        with pytest.raises(ShapeMismatchError):
            DescriptorClassifier.classify(cls_model, np.zeros((1, 32, 32, 3), np.uint8))

    def test_size_must_divide(self):
        with pytest.raises(ConfigError):
            DescriptorClassifier.build_classifier(ClsModelConfig(descriptor_size=20))

    def test_num_outputs_at_least_two(self):
        with pytest.raises(ConfigError):
            ClsModelConfig(num_outputs=1)

    def test_checkpoint_round_trip(self, tmp_path, cls_model):
        path = DescriptorClassifier.save_checkpoint(
            tmp_path / "cls.pt", cls_model, TWO_CLASS, seg_config_hash="abc"
        )
        model, scheme, payload = DescriptorClassifier.load_checkpoint(path)
        assert scheme is TWO_CLASS
        assert payload["seg_config_hash"] == "abc"
        assert model.config == cls_model.config

    def test_checkpoint_scheme_mismatch(self, tmp_path, cls_model):
        path = DescriptorClassifier.save_checkpoint(tmp_path / "cls.pt", cls_model, TWO_CLASS)
        payload = torch.load(path, weights_only=False)
        payload["scheme"] = "three_class"
        torch.save(payload, path)
        with pytest.raises(CompatibilityError):
            DescriptorClassifier.load_checkpoint(path)


class TestClassifierTrainer:
    def test_weights_only_when_a_class_is_missing(self):
        assert ClassifierTrainer.class_weights(np.array([3, 5])) is None
        weights = ClassifierTrainer.class_weights(np.array([4, 0, 2]))
        assert weights.tolist() == pytest.approx([0.75, 0.0, 1.5])

    def test_split_falls_back_to_training_set(self):
        pairs = DescriptorPairs(np.zeros((2, 4, 4, 3), np.uint8), np.array([0, 1]))
        train, val = ClassifierTrainer.split(pairs, 0.2, seed=0)
        assert train is pairs and val is pairs

    def test_empty_pairs(self, small_cls_config):
        pairs = DescriptorPairs.from_pairs([], 16)
        with pytest.raises(EmptyDatasetError):
            ClassifierTrainer.train_classifier(pairs, small_cls_config)

    def test_short_run(self, small_cls_config, rng):
        pixels = np.concatenate(
            [np.full((8, 16, 16, 3), 20, np.uint8), np.full((8, 16, 16, 3), 230, np.uint8)]
        )
        pairs = DescriptorPairs(pixels, np.array([0] * 8 + [1] * 8))
        result = ClassifierTrainer.train_classifier(
            pairs, small_cls_config, ClsTrainingConfig(epochs=3, batch_size=4), seed=2
        )
        assert result.history.height == 3
        assert result.history.columns == ["epoch", "lr", "train_loss", "val_accuracy"]
        assert 0 <= result.best_epoch < 3
        assert not result.model.training


class TestDetectionRecords:
    def test_to_pairs_skips_unlabeled_and_ignored(self):
        image = np.full((8, 8, 3), 100, np.uint8)
        pixels = np.array([[1, 1], [1, 2], [1, 3]])
        records = [
            DetectionRecord("a", i, image, pixels, Polyline.empty(), label)
            for i, label in enumerate([C.DASHED, None, C.UNKNOWN, C.SINGLE_WHITE_CONTINUOUS])
        ]
        pairs = DetectionRecorder.to_pairs(records, 4, TWO_CLASS)
        assert pairs.targets.tolist() == [1, 0]
        assert pairs.pixels.shape == (2, 4, 4, 3)

    def test_collect_keeps_sample_order(self, seg_model, scenes):
        records = DetectionRecorder.collect(seg_model, scenes[:3], batch_size=2)
        order = [s.source_id for s in scenes[:3]]
        seen = [r.source_id for r in records]
        assert seen == sorted(seen, key=order.index)
        assert all(r.image.shape == (64, 128, 3) for r in records)


@pytest.mark.slow
class TestClassifierGate:
    @pytest.mark.parametrize(
        "scheme, palette, floor",
        [
            (TWO_CLASS, (C.SINGLE_WHITE_CONTINUOUS, C.DASHED), 0.95),
            (THREE_CLASS, (C.SINGLE_WHITE_CONTINUOUS, C.DASHED, C.DOUBLE_DASHED), 0.90),
        ],
    )
    def test_separable_synthetic_descriptors(self, scheme, palette, floor):
        train = scenes_with_palette(SceneSpec(seed=10, image_size=(128, 64)), palette, 80)
        held_out = scenes_with_palette(SceneSpec(seed=20, image_size=(128, 64)), palette, 25)
        config = ClsModelConfig(descriptor_size=32, num_outputs=scheme.num_outputs)

        result = ClassifierTrainer.train_classifier(
            _descriptor_pairs(train, 32, scheme),
            config,
            ClsTrainingConfig(epochs=20, batch_size=32),
            seed=0,
        )
        test_pairs = _descriptor_pairs(held_out, 32, scheme)
        predictions = DescriptorClassifier.classify(result.model, test_pairs.pixels)
        accuracy = np.mean([p == t for (p, _), t in zip(predictions, test_pairs.targets)])
        assert accuracy >= floor

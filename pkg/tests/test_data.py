import json

import numpy as np
import pytest

from lane_cascade_toolkit import K_MAX
from lane_cascade_toolkit.data.annotations import ClassAnnotationLoader, ClassAnnotations
from lane_cascade_toolkit.data.augment import SampleAugmenter
from lane_cascade_toolkit.data.splitter import DatasetSplitter
from lane_cascade_toolkit.data.synthetic import SceneGenerator, SceneSpec, scenes_with_palette
from lane_cascade_toolkit.data.tusimple import TuSimpleLoader
from lane_cascade_toolkit.data.types import ClassLabel, Sample
from lane_cascade_toolkit.errors import (
    AnnotationError,
    ConfigError,
    EmptyDatasetError,
    InstanceBudgetError,
    MalformedRecordError,
)
from lane_cascade_toolkit.geometry import Polyline

H_SAMPLES: list[int] = list(range(160, 720, 10))


def _random_record(rng: np.random.Generator, index: int) -> str:
    lanes: list[list[int]] = []
    for _ in range(int(rng.integers(0, K_MAX + 1))):
        xs = rng.integers(0, 1280, len(H_SAMPLES))
        missing = rng.random(len(H_SAMPLES)) < 0.3
        lanes.append(np.where(missing, -2, xs).tolist())
    return json.dumps(
        {"lanes": lanes, "h_samples": H_SAMPLES, "raw_file": f"clips/{index:04d}/20.jpg"}
    )


class TestClassLabel:
    def test_codes_are_fixed(self):
        assert [int(c) for c in ClassLabel] == list(range(8))
        assert ClassLabel.from_token("double-dashed") == ClassLabel.DOUBLE_DASHED

    def test_unknown_token_lists_valid_ones(self):
        with pytest.raises(AnnotationError, match="botts_dots"):
            ClassLabel.from_token("zebra")


class TestTuSimple:
    def test_round_trip_fuzz(self, rng):
        for index in range(500):
            line = _random_record(rng, index)
            sample = TuSimpleLoader.parse_line(line)
            again = TuSimpleLoader.parse_line(TuSimpleLoader.serialize(sample))

            assert json.loads(TuSimpleLoader.serialize(again)) == json.loads(line)
            assert all(a == b for a, b in zip(sample.boundaries, again.boundaries))
            assert len(sample.boundaries) <= K_MAX

    def test_only_minus_two_is_missing(self):
        line = json.dumps({"lanes": [[-1, -2, 5]], "h_samples": [1, 2, 3], "raw_file": "a.jpg"})
        boundary = TuSimpleLoader.parse_line(line).boundaries[0]
        assert boundary.num_points == 2

    @pytest.mark.parametrize(
        "line, reason",
        [
            ("{not json", "invalid JSON"),
            ("[1, 2]", "JSON object"),
            ('{"lanes": [], "raw_file": "a.jpg"}', "missing keys"),
            ('{"lanes": [[1, 2]], "h_samples": [1, 2, 3], "raw_file": "a.jpg"}', "lane 0"),
            ('{"lanes": 3, "h_samples": [], "raw_file": "a.jpg"}', "must be lists"),
        ],
    )
    def test_malformed_records(self, line, reason):
        with pytest.raises(MalformedRecordError, match=reason):
            TuSimpleLoader.parse_line(line, record_name="label.json:1")

    def test_extra_lanes_drop_empty_first(self):
        lanes = [[100, 110], [-2, -2], [500, 510], [700, 710], [1100, 1110]]
        line = json.dumps({"lanes": lanes, "h_samples": [600, 700], "raw_file": "a.jpg"})
        sample = TuSimpleLoader.parse_line(line)
        assert [b.cols[0] for b in sample.boundaries] == [100, 500, 700, 1100]

    def test_extra_lanes_keep_nearest_to_center(self):
        lanes = [[20, 10], [400, 400], [600, 600], [700, 700], [900, 900]]
        line = json.dumps({"lanes": lanes, "h_samples": [600, 700], "raw_file": "a.jpg"})
        sample = TuSimpleLoader.parse_line(line)
        assert [b.cols[-1] for b in sample.boundaries] == [400, 600, 700, 900]

    def test_classes_follow_kept_lanes(self):
        lanes = [[-2], [300], [500], [700], [900]]
        line = json.dumps({"lanes": lanes, "h_samples": [700], "raw_file": "a.jpg"})
        classes = ClassAnnotations(
            {("a.jpg", i): label for i, label in enumerate(ClassLabel) if i < 5}
        )
        sample = TuSimpleLoader.parse_line(line, classes=classes)
        assert sample.classes == tuple(ClassLabel(i) for i in range(1, 5))

    def test_write_and_load_dataset(self, tmp_path, scenes):
        label_path = TuSimpleLoader.write_dataset(scenes[:3], tmp_path)
        classes = ClassAnnotationLoader.load(tmp_path / "label_classes.json")
        loaded = TuSimpleLoader.load_file(label_path, image_size=(128, 64), classes=classes)

        assert [s.source_id for s in loaded] == [s.source_id for s in scenes[:3]]
        assert loaded[0].classes == scenes[0].classes
        assert not loaded[0].is_materialized
        np.testing.assert_array_equal(loaded[0].image, scenes[0].image)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            TuSimpleLoader.load_file(tmp_path / "nope.json")


class TestAnnotations:
    def test_csv_conversion(self, tmp_path):
        csv_path = tmp_path / "classes.csv"
        csv_path.write_text(
            "raw_file,boundary_index,class\na.jpg,0,dashed\na.jpg,2,botts_dots\n",
            encoding="utf-8",
        )
        jsonl_path = tmp_path / "classes.jsonl"
        assert ClassAnnotationLoader.convert_csv(csv_path, jsonl_path) == 2

        record = json.loads(jsonl_path.read_text(encoding="utf-8"))
        assert record == {"raw_file": "a.jpg", "classes": ["dashed", "unknown", "botts_dots"]}

    def test_duplicate_entry(self, tmp_path):
        csv_path = tmp_path / "classes.csv"
        csv_path.write_text(
            "raw_file,boundary_index,class\na.jpg,0,dashed\na.jpg,0,dashed\n", encoding="utf-8"
        )
        with pytest.raises(AnnotationError, match="Duplicate"):
            ClassAnnotationLoader.load(csv_path)

    def test_missing_annotation_is_unknown(self):
        assert ClassAnnotations().lookup("a.jpg", 3) == ClassLabel.UNKNOWN


class TestSynthetic:
    def test_same_spec_same_sample(self, scene_spec):
        a = SceneGenerator.generate(scene_spec)
        b = SceneGenerator.generate(scene_spec)
        np.testing.assert_array_equal(a.image, b.image)
        assert all(x == y for x, y in zip(a.boundaries, b.boundaries))
        assert a.classes == b.classes

    def test_scene_shape_and_budget(self, scene_spec):
        sample = SceneGenerator.generate(scene_spec)
        assert sample.image.shape == (64, 128, 3)
        assert sample.image.dtype == np.uint8
        assert len(sample.boundaries) == scene_spec.lane_count <= K_MAX
        assert sample.source_id == "synthetic/00000007.png"

    def test_generate_many_is_independent_of_count(self):
        spec = SceneSpec(image_size=(64, 32))
        few = SceneGenerator.generate_many(spec, 2, seed=3)
        many = SceneGenerator.generate_many(spec, 4, seed=3)
        assert [s.source_id for s in few] == [s.source_id for s in many[:2]]

    def test_palette_restricts_classes(self):
        samples = scenes_with_palette(SceneSpec(), [ClassLabel.DASHED], 3)
        assert all(set(s.classes) == {ClassLabel.DASHED} for s in samples)

    def test_lane_count_over_budget(self):
        with pytest.raises(InstanceBudgetError):
            SceneSpec(lane_count=K_MAX + 1)

    def test_empty_palette(self):
        with pytest.raises(ConfigError):
            SceneSpec(class_palette=())


class TestSample:
    def test_class_count_must_match(self):
        with pytest.raises(ValueError):
            Sample((Polyline([0], [1.0]),), (), "a", (0,), (10, 10))

    def test_too_many_boundaries(self):
        lines = tuple(Polyline([0], [1.0]) for _ in range(K_MAX + 1))
        with pytest.raises(InstanceBudgetError):
            Sample(lines, (ClassLabel.UNKNOWN,) * len(lines), "a", (0,), (10, 10))

    def test_image_without_path(self):
        sample = Sample((), (), "a", (), (10, 10))
        with pytest.raises(FileNotFoundError):
            _ = sample.image


class TestAugment:
    def test_hflip_reverses_order(self):
        image = np.zeros((4, 10, 3), dtype=np.uint8)
        image[:, 0] = 255
        left = Polyline([0, 3], [1.0, 1.0])
        right = Polyline([0, 3], [8.0, 8.0])

        flipped, boundaries = SampleAugmenter.hflip(image, [left, right])
        assert flipped[0, 9, 0] == 255
        assert [b.cols[0] for b in boundaries] == [1.0, 8.0]

    def test_brightness_keeps_dtype(self, rng):
        image = np.full((2, 2, 3), 250, dtype=np.uint8)
        shifted = SampleAugmenter.brightness(image, rng, 0.2)
        assert shifted.dtype == np.uint8


class TestSplitter:
    def test_partition(self):
        items = list(range(50))
        train, val, test = DatasetSplitter.split(items, (0.6, 0.2, 0.2), seed=5)
        assert (len(train), len(val), len(test)) == (30, 10, 10)
        assert sorted(train + val + test) == items

    def test_seeded(self):
        items = list(range(20))
        assert DatasetSplitter.split(items, seed=1) == DatasetSplitter.split(items, seed=1)

    def test_empty(self):
        with pytest.raises(EmptyDatasetError):
            DatasetSplitter.split([])

    def test_bad_fractions(self):
        with pytest.raises(ValueError):
            DatasetSplitter.split([1, 2], (0.5, 0.5, 0.5))

from pathlib import Path

import pytest
import yaml

from lane_cascade_toolkit.classification import THREE_CLASS
from lane_cascade_toolkit.cli import build_parser, collect_overrides, main
from lane_cascade_toolkit.config import SNAPSHOT_NAME, ConfigLoader, PipelineConfig
from lane_cascade_toolkit.errors import ConfigError
from lane_cascade_toolkit.seeding import SUBSYSTEMS, derive_seed, subsystem_seeds

CONFIG_DIR: Path = Path(__file__).resolve().parents[1] / "configs"


class TestConfigLoader:
    @pytest.mark.parametrize("name", ["default.yaml", "desk.yaml"])
    def test_bundled_configs_load(self, name):
        config = ConfigLoader.load(CONFIG_DIR / name)
        assert config.classifier_config.descriptor_size == config.descriptor.size

    def test_defaults(self):
        config = ConfigLoader.load()
        assert config == PipelineConfig()
        assert config.metrics.threshold_px == 20.0
        assert config.seg_training.switch_epoch == 50

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="bogus"):
            ConfigLoader.build(PipelineConfig, {"bogus": 1})

    def test_unknown_nested_key(self):
        with pytest.raises(ConfigError, match="seg_training"):
            ConfigLoader.build(PipelineConfig, {"seg_training": {"epocs": 3}})

    def test_invalid_value_is_a_config_error(self):
        with pytest.raises(ConfigError):
            ConfigLoader.build(PipelineConfig, {"metrics": {"threshold_px": -1}})

    def test_overrides(self):
        config = ConfigLoader.load(
            overrides=["seg_training.epochs=7", "scheme=three_class", "descriptor.size=32"]
        )
        assert config.seg_training.epochs == 7
        assert config.taxonomy is THREE_CLASS
        assert config.classifier_config.num_outputs == 3
        assert config.classifier_config.descriptor_size == 32

    def test_list_values_become_tuples(self):
        config = ConfigLoader.load(overrides=["ablation.sizes=[16, 32]"])
        assert config.ablation.sizes == (16, 32)

    @pytest.mark.parametrize("text", ["seed", "=3"])
    def test_malformed_override(self, text):
        with pytest.raises(ConfigError):
            ConfigLoader.parse_override(text)

    def test_override_into_a_scalar(self):
        with pytest.raises(ConfigError, match="not a section"):
            ConfigLoader.load(overrides=["seed=3", "seed.value=3"])

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            ConfigLoader.load(tmp_path / "none.yaml")

    def test_top_level_must_be_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            ConfigLoader.load(path)

    def test_snapshot_round_trip(self, tmp_path):
        source = tmp_path / "run.yaml"
        source.write_text("seed: 3\nscenes:\n  count: 5\n", encoding="utf-8")
        config = ConfigLoader.load(source, ["seg_training.epochs=4"])

        written = ConfigLoader.write_snapshot(config, tmp_path / "out", source)
        assert [p.name for p in written] == [SNAPSHOT_NAME, "input_run.yaml"]
        assert written[1].read_text(encoding="utf-8") == source.read_text(encoding="utf-8")
        assert ConfigLoader.load(written[0]) == config
        assert yaml.safe_load(written[0].read_text(encoding="utf-8"))["seed"] == 3


class TestSeeding:
    def test_subsystems_are_independent(self):
        seeds = subsystem_seeds(0)
        assert set(seeds) == set(SUBSYSTEMS)
        assert len(set(seeds.values())) == len(SUBSYSTEMS)

    def test_derived_seed_is_stable(self):
        assert derive_seed(7, "data") == derive_seed(7, "data")
        assert derive_seed(7, "data") != derive_seed(8, "data")

    def test_unknown_subsystem(self):
        with pytest.raises(ConfigError):
            PipelineConfig().subsystem_seed("augment")


class TestCli:
    def test_flags_become_overrides(self):
        args = build_parser().parse_args(
            ["train-seg", "--epochs", "3", "--output", "out dir", "--set", "seed=9"]
        )
        assert collect_overrides(args) == [
            'output_dir="out dir"',
            "seg_training.epochs=3",
            "seed=9",
        ]

    def test_classifier_flags(self):
        args = build_parser().parse_args(
            ["train-cls", "--epochs", "2", "--scheme", "full", "--descriptor-size", "16"]
        )
        assert collect_overrides(args) == [
            "cls_training.epochs=2",
            "descriptor.size=16",
            'scheme="full"',
        ]

    def test_missing_config_exits_with_2(self, tmp_path):
        assert main(["eval", "--config", str(tmp_path / "none.yaml")]) == 2

    def test_invalid_config_exits_with_1(self, tmp_path):
        assert main(["gen-data", "--output", str(tmp_path), "--set", "scheme=five"]) == 1

    def test_gen_data(self, tmp_path):
        code = main(
            [
                "gen-data",
                "--output",
                str(tmp_path),
                "--log-level",
                "warning",
                "--set",
                "scenes.count=3",
                "--set",
                "scenes.image_size=[64, 32]",
            ]
        )
        assert code == 0
        assert (tmp_path / SNAPSHOT_NAME).exists()
        lines = (tmp_path / "dataset" / "label_data.json").read_text(encoding="utf-8")
        assert len(lines.splitlines()) == 3
        assert (tmp_path / "dataset" / "label_classes.json").exists()

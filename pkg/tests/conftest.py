"""テスト共通のフィクスチャ (小さな合成シーンと軽量モデル)"""

import numpy as np
import pytest
import torch

from lane_cascade_toolkit.classification.model import ClsModel, ClsModelConfig, build_classifier
from lane_cascade_toolkit.classification.taxonomy import TWO_CLASS
from lane_cascade_toolkit.data.synthetic import SceneGenerator, SceneSpec
from lane_cascade_toolkit.data.types import Sample
from lane_cascade_toolkit.pipeline.cascade import CascadeRunner
from lane_cascade_toolkit.segmentation.models import SegModel, SegModelConfig, build_model

SCENE_SIZE: tuple[int, int] = (128, 64)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def scene_spec() -> SceneSpec:
    return SceneSpec(seed=7, image_size=SCENE_SIZE)


@pytest.fixture
def scenes() -> list[Sample]:
    return SceneGenerator.generate_many(SceneSpec(image_size=SCENE_SIZE), 8, seed=11)


@pytest.fixture
def mini_config() -> SegModelConfig:
    return SegModelConfig(input_size=SCENE_SIZE, architecture="mini", width_multiplier=0.25)


@pytest.fixture
def small_cls_config() -> ClsModelConfig:
    return ClsModelConfig(
        descriptor_size=16, num_outputs=2, conv_blocks=(8, 16), fc_widths=(16,)
    )


@pytest.fixture
def seg_model(mini_config: SegModelConfig) -> SegModel:
    torch.manual_seed(0)
    return build_model(mini_config).eval()


@pytest.fixture
def cls_model(small_cls_config: ClsModelConfig) -> ClsModel:
    torch.manual_seed(0)
    return build_classifier(small_cls_config).eval()


@pytest.fixture
def runner(seg_model: SegModel, cls_model: ClsModel) -> CascadeRunner:
    return CascadeRunner(seg_model, cls_model, TWO_CLASS, min_points=3)

"""データセットの読み込み、合成シーンの生成、分割モジュール"""

from .annotations import ClassAnnotationLoader, ClassAnnotations, load_class_annotations
from .augment import SampleAugmenter
from .splitter import DatasetSplitter, split_dataset
from .synthetic import SceneGenerator, SceneSpec, generate_scene, scenes_with_palette
from .tusimple import TuSimpleLoader, parse_tusimple, serialize_tusimple
from .types import ClassLabel, Sample

__all__ = [
    "ClassAnnotationLoader",
    "ClassAnnotations",
    "ClassLabel",
    "DatasetSplitter",
    "Sample",
    "SampleAugmenter",
    "SceneGenerator",
    "SceneSpec",
    "TuSimpleLoader",
    "generate_scene",
    "load_class_annotations",
    "parse_tusimple",
    "scenes_with_palette",
    "serialize_tusimple",
    "split_dataset",
]

"""カスケードの第2段: 境界ディスクリプタの抽出とクラス分類"""

from .association import GroundTruthAssociation, associate_to_gt
from .descriptor import (
    DESCRIPTOR_SIZES,
    Descriptor,
    DescriptorBatch,
    DescriptorExtractor,
    DescriptorSource,
    batch_descriptors,
    extract_descriptor,
)
from .model import (
    ClsModel,
    ClsModelConfig,
    DescriptorClassifier,
    build_classifier,
    classify,
    load_cls_checkpoint,
    save_cls_checkpoint,
)
from .records import DetectionRecord, DetectionRecorder, collect_detections
from .taxonomy import FULL, SCHEMES, THREE_CLASS, TWO_CLASS, TaxonomyScheme, remap_class
from .trainer import (
    ClassifierTrainer,
    ClsTrainingConfig,
    ClsTrainingResult,
    DescriptorPairs,
    train_classifier,
)

__all__ = [
    "DESCRIPTOR_SIZES",
    "FULL",
    "SCHEMES",
    "THREE_CLASS",
    "TWO_CLASS",
    "ClassifierTrainer",
    "ClsModel",
    "ClsModelConfig",
    "ClsTrainingConfig",
    "ClsTrainingResult",
    "Descriptor",
    "DescriptorBatch",
    "DescriptorClassifier",
    "DescriptorExtractor",
    "DescriptorPairs",
    "DescriptorSource",
    "DetectionRecord",
    "DetectionRecorder",
    "GroundTruthAssociation",
    "TaxonomyScheme",
    "associate_to_gt",
    "batch_descriptors",
    "build_classifier",
    "classify",
    "collect_detections",
    "extract_descriptor",
    "load_cls_checkpoint",
    "remap_class",
    "save_cls_checkpoint",
    "train_classifier",
]

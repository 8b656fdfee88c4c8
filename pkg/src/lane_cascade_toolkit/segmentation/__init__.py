"""カスケードの第1段: レーン境界のインスタンスセグメンテーション"""

from .checkpoint import load_seg_checkpoint, save_seg_checkpoint
from .decode import DetectedBoundary, InstanceDecoder, decode_instances
from .inference import SegmentationInference, SegOutput, forward
from .models import SegModel, SegModelConfig, build_model, count_parameters

__all__ = [
    "DetectedBoundary",
    "InstanceDecoder",
    "SegModel",
    "SegModelConfig",
    "SegOutput",
    "SegmentationInference",
    "build_model",
    "count_parameters",
    "decode_instances",
    "forward",
    "load_seg_checkpoint",
    "save_seg_checkpoint",
]

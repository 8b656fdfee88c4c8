"""ポリライン、ラスタライズ、距離計算の幾何モジュール"""

from .polyline import (
    MISSING_X,
    LaneGeometry,
    Polyline,
    align_to_gt,
    average_distance,
    point_match_count,
    resample_rows,
    row_average,
)
from .raster import BoundaryRasterizer, InstanceMap, rasterize_boundaries

__all__ = [
    "MISSING_X",
    "BoundaryRasterizer",
    "InstanceMap",
    "LaneGeometry",
    "Polyline",
    "align_to_gt",
    "average_distance",
    "point_match_count",
    "rasterize_boundaries",
    "resample_rows",
    "row_average",
]

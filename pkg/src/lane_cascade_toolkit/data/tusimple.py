"""TuSimple形式 (JSON-lines) のレーンアノテーションの読み書き"""

import json
import logging
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from PIL import Image

from lane_cascade_toolkit import K_MAX
from lane_cascade_toolkit.data.annotations import ClassAnnotationLoader, ClassAnnotations
from lane_cascade_toolkit.data.types import ClassLabel, Sample
from lane_cascade_toolkit.errors import MalformedRecordError
from lane_cascade_toolkit.geometry import MISSING_X, Polyline, resample_rows
from lane_cascade_toolkit.geometry.polyline import Size

logger = logging.getLogger(__name__)

# TuSimpleで x が存在しないことを示す値
TUSIMPLE_MISSING: int = -2
TUSIMPLE_IMAGE_SIZE: Size = (1280, 720)


class TuSimpleLoader:
    """TuSimpleのアノテーションファイルをSampleに変換するクラス"""

    REQUIRED_KEYS: tuple[str, ...] = ("lanes", "h_samples", "raw_file")

    @staticmethod
    def parse_line(
        line: str,
        root: Optional[str | Path] = None,
        image_size: Size = TUSIMPLE_IMAGE_SIZE,
        classes: Optional[ClassAnnotations] = None,
        record_name: Optional[str] = None,
    ) -> Sample:
        """
        JSON-lines の1レコードをSampleに変換 (画像は遅延読み込み)

        Args:
            line: 1行分のJSONテキスト
            root: 画像パスの基準ディレクトリ
            image_size: アノテーション座標系の画像サイズ (W, H)
            classes: クラスアノテーション (Noneなら全て unknown)
            record_name: エラーメッセージ用のレコード名

        Returns:
            Sample

        Raises:
            MalformedRecordError: JSONとして読めない、キー不足、長さ不一致の場合
        """
        name: str = record_name or "<record>"

        try:
            record: Any = json.loads(line)
        except json.JSONDecodeError as e:
            raise MalformedRecordError(name, f"invalid JSON ({e.msg})") from e

        if not isinstance(record, dict):
            raise MalformedRecordError(name, "record must be a JSON object")

        missing: list[str] = [k for k in TuSimpleLoader.REQUIRED_KEYS if k not in record]
        if missing:
            raise MalformedRecordError(name, f"missing keys {missing}")

        raw_file: str = str(record["raw_file"])
        name = record_name or raw_file
        lanes: Any = record["lanes"]
        h_samples: Any = record["h_samples"]

        if not isinstance(lanes, list) or not isinstance(h_samples, list):
            raise MalformedRecordError(name, "'lanes' and 'h_samples' must be lists")

        polylines: list[Polyline] = []
        for index, lane in enumerate(lanes):
            if not isinstance(lane, list) or len(lane) != len(h_samples):
                length: Any = len(lane) if isinstance(lane, list) else type(lane).__name__
                raise MalformedRecordError(
                    name,
                    f"lane {index} has {length} x-values but h_samples has {len(h_samples)}",
                )
            try:
                xs: np.ndarray = np.asarray(lane, dtype=np.float64)
                # -2 のみを欠損として扱う
                xs = np.where(xs == TUSIMPLE_MISSING, MISSING_X, xs)
                polylines.append(Polyline(h_samples, xs))
            except (TypeError, ValueError) as e:
                raise MalformedRecordError(name, f"lane {index}: {e}") from e

        labels: list[ClassLabel] = (
            classes.classes_for(raw_file, len(polylines))
            if classes is not None
            else [ClassLabel.UNKNOWN] * len(polylines)
        )

        kept: list[int] = TuSimpleLoader._select_lanes(polylines, image_size[0], name)

        image_path: Optional[Path] = Path(root) / raw_file if root is not None else None

        return Sample(
            boundaries=tuple(polylines[i] for i in kept),
            classes=tuple(labels[i] for i in kept),
            source_id=raw_file,
            h_samples=tuple(int(h) for h in h_samples),
            image_size=image_size,
            image_path=image_path,
        )

    @staticmethod
    def _select_lanes(polylines: Sequence[Polyline], width: int, name: str) -> list[int]:
        """
        K_MAX本を超える場合に残すレーンのインデックスを選ぶ

        空のレーンを先に落とし、それでも多ければ最下点が画像中央から遠いものを落とす。
        残ったレーンは元の順序を保つ。
        """
        indices: list[int] = list(range(len(polylines)))
        if len(indices) <= K_MAX:
            return indices

        indices = [i for i in indices if not polylines[i].is_empty]
        if len(indices) > K_MAX:

            def center_offset(i: int) -> float:
                rows, cols = polylines[i].points()
                return abs(float(cols[-1]) - width / 2.0)

            nearest: list[int] = sorted(indices, key=center_offset)[:K_MAX]
            indices = sorted(nearest)

        logger.warning(
            "%s: %d lanes exceed the instance cap, kept %s", name, len(polylines), indices
        )
        return indices

    @staticmethod
    def serialize(sample: Sample) -> str:
        """
        SampleをTuSimpleのJSON-lines 1行に変換

        Args:
            sample: 変換するサンプル

        Returns:
            改行を含まないJSONテキスト
        """
        h_samples: list[int] = list(sample.h_samples)
        lanes: list[list[int | float]] = []

        for boundary in sample.boundaries:
            if list(boundary.rows) != h_samples:
                boundary = resample_rows(boundary, h_samples)
            lane: list[int | float] = []
            for x in boundary.cols.tolist():
                if x == MISSING_X:
                    lane.append(TUSIMPLE_MISSING)
                elif float(x).is_integer():
                    lane.append(int(x))
                else:
                    lane.append(float(x))
            lanes.append(lane)

        return json.dumps({"lanes": lanes, "h_samples": h_samples, "raw_file": sample.source_id})

    @staticmethod
    def load_file(
        path: str | Path,
        root: Optional[str | Path] = None,
        image_size: Size = TUSIMPLE_IMAGE_SIZE,
        classes: Optional[ClassAnnotations] = None,
    ) -> list[Sample]:
        """
        TuSimpleのアノテーションファイルを読み込む

        Args:
            path: JSON-lines ファイルのパス
            root: 画像パスの基準ディレクトリ (Noneならファイルと同じディレクトリ)
            image_size: アノテーション座標系の画像サイズ
            classes: クラスアノテーション

        Returns:
            Sampleのリスト

        Raises:
            FileNotFoundError: ファイルが存在しない場合
            MalformedRecordError: 壊れたレコードがある場合
        """
        file_path: Path = Path(path)
        if not file_path.exists():
            raise FileNotFoundError(f"File not found: {path}")

        base: Path = Path(root) if root is not None else file_path.parent
        samples: list[Sample] = []

        with open(file_path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                samples.append(
                    TuSimpleLoader.parse_line(
                        line,
                        root=base,
                        image_size=image_size,
                        classes=classes,
                        record_name=f"{file_path.name}:{line_no}",
                    )
                )

        logger.info("Loaded %d samples from %s", len(samples), file_path)
        return samples

    @staticmethod
    def write_dataset(
        samples: Sequence[Sample],
        out_dir: str | Path,
        label_name: str = "label_data.json",
        class_name: str = "label_classes.json",
    ) -> Path:
        """
        サンプル群をTuSimpleと同じ構成 (PNG画像 + JSON-lines + クラスサイドカー) で保存

        Returns:
            アノテーションファイルのパス
        """
        root: Path = Path(out_dir)
        root.mkdir(parents=True, exist_ok=True)

        label_path: Path = root / label_name
        entries: dict[tuple[str, int], ClassLabel] = {}

        with open(label_path, "w", encoding="utf-8") as f:
            for sample in samples:
                image_path: Path = root / sample.source_id
                image_path.parent.mkdir(parents=True, exist_ok=True)
                Image.fromarray(sample.image).save(image_path, format="PNG")

                f.write(TuSimpleLoader.serialize(sample) + "\n")
                for index, label in enumerate(sample.classes):
                    entries[(sample.source_id, index)] = label

        ClassAnnotationLoader.save_jsonl(entries, root / class_name)
        logger.info("Wrote %d samples to %s", len(samples), root)
        return label_path


parse_tusimple = TuSimpleLoader.parse_line
serialize_tusimple = TuSimpleLoader.serialize

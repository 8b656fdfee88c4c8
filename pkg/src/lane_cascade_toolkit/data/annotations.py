"""レーン境界クラスのサイドカーアノテーションの読み書き"""

import json
import logging
from pathlib import Path
from typing import Iterator, Mapping

import polars as pl

from lane_cascade_toolkit.data.types import ClassLabel
from lane_cascade_toolkit.errors import AnnotationError

logger = logging.getLogger(__name__)

AnnotationKey = tuple[str, int]


class ClassAnnotations(Mapping[AnnotationKey, ClassLabel]):
    """(source_id, boundary_index) からクラスへの写像。未登録は unknown"""

    def __init__(self, entries: Mapping[AnnotationKey, ClassLabel] | None = None) -> None:
        self._entries: dict[AnnotationKey, ClassLabel] = dict(entries or {})

    def __getitem__(self, key: AnnotationKey) -> ClassLabel:
        return self._entries[key]

    def __iter__(self) -> Iterator[AnnotationKey]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def lookup(self, source_id: str, boundary_index: int) -> ClassLabel:
        """アノテーションがなければ unknown を返す"""
        return self._entries.get((source_id, boundary_index), ClassLabel.UNKNOWN)

    def classes_for(self, source_id: str, count: int) -> list[ClassLabel]:
        return [self.lookup(source_id, i) for i in range(count)]


class ClassAnnotationLoader:
    """JSON-lines または CSV 形式のクラスアノテーションを扱うクラス"""

    CSV_COLUMNS: tuple[str, ...] = ("raw_file", "boundary_index", "class")

    @staticmethod
    def load(path: str | Path) -> ClassAnnotations:
        """
        サイドカーファイルを読み込む (拡張子で形式を判定)

        Args:
            path: .json / .jsonl / .csv ファイル

        Returns:
            クラスアノテーション

        Raises:
            FileNotFoundError: ファイルが存在しない場合
            AnnotationError: 未知のトークン、重複キー、スキーマ不一致
        """
        file_path: Path = Path(path)
        if not file_path.exists():
            raise FileNotFoundError(f"File not found: {path}")

        suffix: str = file_path.suffix.lower()
        if suffix in (".json", ".jsonl"):
            return ClassAnnotationLoader._load_jsonl(file_path)
        elif suffix == ".csv":
            return ClassAnnotationLoader._load_csv(file_path)
        else:
            raise AnnotationError(f"Unsupported annotation file extension: {file_path.suffix}")

    @staticmethod
    def _insert(
        entries: dict[AnnotationKey, ClassLabel], key: AnnotationKey, token: str
    ) -> None:
        if key in entries:
            raise AnnotationError(f"Duplicate annotation for {key[0]} boundary {key[1]}")
        entries[key] = ClassLabel.from_token(token)

    @staticmethod
    def _load_jsonl(path: Path) -> ClassAnnotations:
        """1行1クリップの {"raw_file": str, "classes": [token, ...]} を読み込む"""
        entries: dict[AnnotationKey, ClassLabel] = {}

        with open(path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    record: dict = json.loads(line)
                    raw_file: str = record["raw_file"]
                    tokens: list[str] = record["classes"]
                except (json.JSONDecodeError, KeyError, TypeError) as e:
                    raise AnnotationError(f"{path.name}:{line_no}: invalid entry ({e})") from e

                for index, token in enumerate(tokens):
                    ClassAnnotationLoader._insert(entries, (raw_file, index), token)

        return ClassAnnotations(entries)

    @staticmethod
    def _load_csv(path: Path) -> ClassAnnotations:
        """raw_file,boundary_index,class の3列CSVを読み込む"""
        df: pl.DataFrame = pl.read_csv(path, infer_schema_length=0)

        missing: set[str] = set(ClassAnnotationLoader.CSV_COLUMNS) - set(df.columns)
        if missing:
            raise AnnotationError(f"Missing required columns: {sorted(missing)}")

        entries: dict[AnnotationKey, ClassLabel] = {}
        for row in df.iter_rows(named=True):
            key: AnnotationKey = (row["raw_file"], int(row["boundary_index"]))
            ClassAnnotationLoader._insert(entries, key, row["class"])

        return ClassAnnotations(entries)

    @staticmethod
    def save_jsonl(annotations: Mapping[AnnotationKey, ClassLabel], path: str | Path) -> None:
        """
        アノテーションをサイドカーJSON-lines形式で保存

        抜けているインデックスは unknown で埋める。
        """
        by_clip: dict[str, dict[int, ClassLabel]] = {}
        for (raw_file, index), label in annotations.items():
            by_clip.setdefault(raw_file, {})[index] = label

        with open(path, "w", encoding="utf-8") as f:
            for raw_file in sorted(by_clip):
                labels: dict[int, ClassLabel] = by_clip[raw_file]
                tokens: list[str] = [
                    labels.get(i, ClassLabel.UNKNOWN).token for i in range(max(labels) + 1)
                ]
                f.write(json.dumps({"raw_file": raw_file, "classes": tokens}) + "\n")

    @staticmethod
    def convert_csv(csv_path: str | Path, jsonl_path: str | Path) -> int:
        """
        CSVアノテーションをサイドカーJSON-linesに変換

        Returns:
            変換したエントリ数
        """
        annotations: ClassAnnotations = ClassAnnotationLoader.load(csv_path)
        ClassAnnotationLoader.save_jsonl(annotations, jsonl_path)
        logger.info("Converted %d class annotations to %s", len(annotations), jsonl_path)
        return len(annotations)


load_class_annotations = ClassAnnotationLoader.load

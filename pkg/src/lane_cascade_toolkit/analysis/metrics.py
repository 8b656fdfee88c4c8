"""
TuSimple方式のレーン検出指標と境界クラス分類の精度

accuracy = Σ C_i / Σ S_i   (C_i: 閾値未満で一致した点数、S_i: 正解点数)
FP       = F_pred / N_pred (誤検出レーン数 / 予測レーン数、0/0 は 0)
FN       = M_pred / N_gt   (未検出レーン数 / 正解レーン数)
"""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterator, Literal, Optional, Sequence

import numpy as np
import polars as pl

from lane_cascade_toolkit.errors import ConfigError, UndefinedMetricError
from lane_cascade_toolkit.geometry import Polyline, align_to_gt, point_match_count
from lane_cascade_toolkit.geometry.polyline import Size
from lane_cascade_toolkit.i18n import I18n, get_i18n

logger = logging.getLogger(__name__)

Strategy = Literal["exhaustive", "greedy"]
Resolution = Literal["network", "source"]


@dataclass(frozen=True)
class MetricsConfig:
    """
    評価の設定

    Attributes:
        threshold_px: 点が一致したとみなす水平距離 (未満)
        min_points: 予測レーンとして残す最小の行数
        fp_cutoff: レーンを検出成功とみなす一致点の割合
        resolution: "network" (ネットワーク解像度) または "source" (アノテーション解像度)
        strategy: "exhaustive" (全探索) または "greedy" (GT順の貪欲法)
    """

    threshold_px: float = 20.0
    min_points: int = 3
    fp_cutoff: float = 0.85
    resolution: str = "network"
    strategy: str = "exhaustive"

    def __post_init__(self) -> None:
        if self.threshold_px <= 0:
            raise ConfigError(f"threshold_px must be positive, got {self.threshold_px}")
        if self.min_points < 1:
            raise ConfigError(f"min_points must be >= 1, got {self.min_points}")
        if not 0.0 < self.fp_cutoff <= 1.0:
            raise ConfigError(f"fp_cutoff must be in (0, 1], got {self.fp_cutoff}")
        if self.resolution not in ("network", "source"):
            raise ConfigError(f"resolution must be 'network' or 'source', got {self.resolution}")
        if self.strategy not in ("exhaustive", "greedy"):
            raise ConfigError(f"strategy must be 'exhaustive' or 'greedy', got {self.strategy}")


@dataclass(frozen=True)
class ImageCounts:
    """1画像分の集計"""

    source_id: str
    matched_points: int
    gt_points: int
    pred_lanes: int
    gt_lanes: int
    false_positives: int
    missed: int

    @property
    def accuracy(self) -> Optional[float]:
        return self.matched_points / self.gt_points if self.gt_points else None


@dataclass(frozen=True)
class EvalCounts:
    """
    画像ごとの集計の列。merge は結合的なので並列評価の結果をどの順でまとめてもよい
    """

    images: tuple[ImageCounts, ...] = ()

    def merge(self, other: "EvalCounts") -> "EvalCounts":
        return EvalCounts(self.images + other.images)

    __add__ = merge

    def _total(self, name: str) -> int:
        return int(sum(getattr(img, name) for img in self.images))

    @property
    def matched_points(self) -> int:
        return self._total("matched_points")

    @property
    def gt_points(self) -> int:
        return self._total("gt_points")

    @property
    def pred_lanes(self) -> int:
        return self._total("pred_lanes")

    @property
    def gt_lanes(self) -> int:
        return self._total("gt_lanes")

    @property
    def false_positives(self) -> int:
        return self._total("false_positives")

    @property
    def missed(self) -> int:
        return self._total("missed")

    def stats(self) -> dict[str, int]:
        """エラーメッセージに添える集計値"""
        return {
            "images": len(self.images),
            "gt_points": self.gt_points,
            "pred_lanes": self.pred_lanes,
            "gt_lanes": self.gt_lanes,
        }


@dataclass(frozen=True)
class LaneAssignment:
    """
    予測レーンと正解レーンの対応付け

    Attributes:
        pairs: (予測インデックス, 正解インデックス) のタプル
        matched: pairs と同順の一致点数
        hits: 一致率が fp_cutoff 以上のペア数
        counts: この画像の集計
    """

    pairs: tuple[tuple[int, int], ...]
    matched: tuple[int, ...]
    hits: int
    counts: ImageCounts


class LaneMetrics:
    """レーン単位の対応付けとTuSimple指標の計算"""

    @staticmethod
    def _assignments(n_pred: int, n_gt: int) -> Iterator[tuple[int, ...]]:
        """正解ごとに予測インデックス (-1 は未割り当て) を選ぶ単射をすべて列挙"""

        def extend(prefix: tuple[int, ...], used: frozenset[int]) -> Iterator[tuple[int, ...]]:
            if len(prefix) == n_gt:
                yield prefix
                return
            yield from extend(prefix + (-1,), used)
            for i in range(n_pred):
                if i not in used:
                    yield from extend(prefix + (i,), used | {i})

        yield from extend((), frozenset())

    @staticmethod
    def _exhaustive(matched: np.ndarray, hit: np.ndarray) -> tuple[tuple[int, ...], int]:
        """
        (一致点の総数, 検出成功ペア数) を辞書式に最大化する対応付けとその成功ペア数を求める

        FP/FN は返した対応付けのペアだけから決まる。
        """
        n_pred, n_gt = matched.shape
        best: tuple[int, ...] = (-1,) * n_gt
        best_score: tuple[int, int] = (-1, -1)

        for assignment in LaneMetrics._assignments(n_pred, n_gt):
            total: int = 0
            hits: int = 0
            for j, i in enumerate(assignment):
                if i >= 0:
                    total += int(matched[i, j])
                    hits += int(hit[i, j])
            if (total, hits) > best_score:
                best, best_score = assignment, (total, hits)

        return best, best_score[1]

    @staticmethod
    def _greedy(matched: np.ndarray, hit: np.ndarray) -> tuple[tuple[int, ...], int]:
        """正解の順に、未使用で一致点が最多の予測を割り当てる (同数なら小さいインデックス)"""
        n_pred, n_gt = matched.shape
        used: set[int] = set()
        assignment: list[int] = []
        hits: int = 0

        for j in range(n_gt):
            choice: int = -1
            for i in range(n_pred):
                if i in used or matched[i, j] == 0:
                    continue
                if choice < 0 or matched[i, j] > matched[choice, j]:
                    choice = i
            if choice >= 0:
                used.add(choice)
                hits += int(hit[choice, j])
            assignment.append(choice)

        return tuple(assignment), hits

    @staticmethod
    def assign(
        matched: np.ndarray,
        gt_points: Sequence[int],
        fp_cutoff: float = 0.85,
        strategy: str = "exhaustive",
        source_id: str = "",
    ) -> LaneAssignment:
        """
        一致点数の行列 (予測×正解) から対応付けと集計を求める

        Args:
            matched: matched[i, j] = 予測iと正解jの一致点数
            gt_points: 正解ごとの点数 (0 のレーンは数えない)
            fp_cutoff: 検出成功とみなす一致率
            strategy: "exhaustive" または "greedy"
            source_id: 集計に記録する画像ID

        Returns:
            LaneAssignment
        """
        matched = np.asarray(matched, dtype=np.int64)
        gt_pts: np.ndarray = np.asarray(gt_points, dtype=np.int64)
        n_pred: int = matched.shape[0]

        live: np.ndarray = np.flatnonzero(gt_pts > 0)
        live_matched: np.ndarray = matched[:, live]
        fraction: np.ndarray = live_matched / np.maximum(gt_pts[live], 1)[None, :]
        hit: np.ndarray = fraction >= fp_cutoff

        if strategy == "exhaustive":
            assignment, hits = LaneMetrics._exhaustive(live_matched, hit)
        elif strategy == "greedy":
            assignment, hits = LaneMetrics._greedy(live_matched, hit)
        else:
            raise ConfigError(f"Unknown matching strategy: {strategy}")

        pairs: list[tuple[int, int]] = []
        pair_matched: list[int] = []
        for j, i in enumerate(assignment):
            if i >= 0:
                pairs.append((i, int(live[j])))
                pair_matched.append(int(live_matched[i, j]))

        counts: ImageCounts = ImageCounts(
            source_id=source_id,
            matched_points=int(sum(pair_matched)),
            gt_points=int(gt_pts.sum()),
            pred_lanes=n_pred,
            gt_lanes=int(live.size),
            false_positives=n_pred - hits,
            missed=int(live.size) - hits,
        )
        return LaneAssignment(tuple(pairs), tuple(pair_matched), hits, counts)

    @staticmethod
    def match_lanes(
        pred: Sequence[Polyline],
        gt: Sequence[Polyline],
        threshold_px: float = 20.0,
        fp_cutoff: float = 0.85,
        strategy: str = "exhaustive",
        source_id: str = "",
    ) -> LaneAssignment:
        """
        同じ座標系・同じ行にそろえた予測と正解を対応付ける

        Args:
            pred: 予測レーン (行平均と最小点数フィルタ済み)
            gt: 正解レーン
            threshold_px: 点一致の距離閾値
            fp_cutoff: 検出成功とみなす一致率
            strategy: "exhaustive" または "greedy"
            source_id: 画像ID

        Returns:
            LaneAssignment
        """
        matched: np.ndarray = np.zeros((len(pred), len(gt)), dtype=np.int64)
        for i, p in enumerate(pred):
            for j, g in enumerate(gt):
                matched[i, j] = point_match_count(p, g, threshold_px)[0]
        gt_points: list[int] = [g.num_points for g in gt]
        return LaneMetrics.assign(matched, gt_points, fp_cutoff, strategy, source_id)

    @staticmethod
    def evaluate_image(
        pred: Sequence[Polyline],
        pred_size: Size,
        gt: Sequence[Polyline],
        gt_size: Size,
        config: MetricsConfig = MetricsConfig(),
        source_id: str = "",
    ) -> LaneAssignment:
        """
        ネットワーク解像度の予測を正解の行で再サンプリングしてから対応付ける

        Args:
            pred: ネットワーク出力から復号したレーン
            pred_size: ネットワーク入力サイズ (W, H)
            gt: アノテーション座標系の正解
            gt_size: アノテーション座標系の画像サイズ (W, H)
            config: 評価設定 (resolution で比較する座標系を選ぶ)
            source_id: 画像ID
        """
        kept: list[Polyline] = [p for p in pred if p.num_points >= config.min_points]
        matched: np.ndarray = np.zeros((len(kept), len(gt)), dtype=np.int64)
        for i, p in enumerate(kept):
            for j, g in enumerate(gt):
                aligned_pred, aligned_gt = align_to_gt(p, pred_size, g, gt_size, config.resolution)
                matched[i, j] = point_match_count(aligned_pred, aligned_gt, config.threshold_px)[0]
        gt_points: list[int] = [g.num_points for g in gt]
        return LaneMetrics.assign(matched, gt_points, config.fp_cutoff, config.strategy, source_id)

    @staticmethod
    def accuracy(counts: EvalCounts) -> float:
        """
        Σ C_i / Σ S_i

        Raises:
            UndefinedMetricError: 正解点が1つもない場合
        """
        if counts.gt_points == 0:
            raise UndefinedMetricError(
                "accuracy is undefined without ground-truth points", counts.stats()
            )
        return counts.matched_points / counts.gt_points

    @staticmethod
    def fp_rate(counts: EvalCounts) -> float:
        """F_pred / N_pred (予測が0本なら0)"""
        if counts.pred_lanes == 0:
            return 0.0
        return counts.false_positives / counts.pred_lanes

    @staticmethod
    def fn_rate(counts: EvalCounts) -> float:
        """
        M_pred / N_gt

        Raises:
            UndefinedMetricError: 正解レーンが1本もない場合
        """
        if counts.gt_lanes == 0:
            raise UndefinedMetricError(
                "fn_rate is undefined without ground-truth lanes", counts.stats()
            )
        return counts.missed / counts.gt_lanes


class ClassificationMetrics:
    """境界クラス分類の評価"""

    @staticmethod
    def classification_accuracy(
        predictions: Sequence[Optional[int]], labels: Sequence[Optional[int]]
    ) -> float:
        """
        完全一致の割合。正解が None (無視クラス) の要素は数えない

        Args:
            predictions: 予測した出力インデックス
            labels: 正解の出力インデックス (remap_class の結果)

        Raises:
            UndefinedMetricError: 数える要素が残らない場合
        """
        if len(predictions) != len(labels):
            raise ValueError(f"{len(predictions)} predictions for {len(labels)} labels")
        kept: list[tuple[Optional[int], int]] = [
            (p, y) for p, y in zip(predictions, labels) if y is not None
        ]
        if not kept:
            raise UndefinedMetricError(
                "classification accuracy is undefined for an empty set", {"total": len(labels)}
            )
        return sum(1 for p, y in kept if p == y) / len(kept)

    @staticmethod
    def confusion_matrix(
        predictions: Sequence[Optional[int]],
        labels: Sequence[Optional[int]],
        names: Sequence[str],
    ) -> pl.DataFrame:
        """
        混同行列 (行: 正解、列: 予測)

        Returns:
            "actual" 列と names の各列を持つデータフレーム
        """
        size: int = len(names)
        table: np.ndarray = np.zeros((size, size), dtype=np.int64)
        for p, y in zip(predictions, labels):
            if y is None or p is None:
                continue
            table[y, p] += 1

        columns: dict[str, Any] = {"actual": list(names)}
        for k, name in enumerate(names):
            columns[name] = table[:, k].tolist()
        return pl.DataFrame(columns)


@dataclass(frozen=True, eq=False)
class MetricsReport:
    """
    評価結果

    Attributes:
        accuracy: TuSimple精度
        fp_rate: 誤検出率
        fn_rate: 未検出率
        counts: 画像ごとの集計
        config: 評価に使った設定
        classification_accuracy: 分類精度 (分類を評価しない場合 None)
        confusion: 混同行列
    """

    accuracy: float
    fp_rate: float
    fn_rate: float
    counts: EvalCounts
    config: MetricsConfig
    classification_accuracy: Optional[float] = None
    confusion: Optional[pl.DataFrame] = field(default=None, repr=False)

    @classmethod
    def from_counts(
        cls,
        counts: EvalCounts,
        config: MetricsConfig,
        classification_accuracy: Optional[float] = None,
        confusion: Optional[pl.DataFrame] = None,
    ) -> "MetricsReport":
        return cls(
            accuracy=LaneMetrics.accuracy(counts),
            fp_rate=LaneMetrics.fp_rate(counts),
            fn_rate=LaneMetrics.fn_rate(counts),
            counts=counts,
            config=config,
            classification_accuracy=classification_accuracy,
            confusion=confusion,
        )

    def to_frame(self) -> pl.DataFrame:
        """metric, value の2列の表"""
        rows: list[tuple[str, float]] = [
            ("accuracy", self.accuracy),
            ("fp_rate", self.fp_rate),
            ("fn_rate", self.fn_rate),
        ]
        if self.classification_accuracy is not None:
            rows.append(("classification_accuracy", self.classification_accuracy))
        return pl.DataFrame(
            {"metric": [r[0] for r in rows], "value": [float(r[1]) for r in rows]}
        )

    def per_image(self) -> pl.DataFrame:
        """画像ごとの内訳"""
        schema: dict[str, Any] = {
            "source_id": pl.Utf8,
            "matched_points": pl.Int64,
            "gt_points": pl.Int64,
            "pred_lanes": pl.Int64,
            "gt_lanes": pl.Int64,
            "false_positives": pl.Int64,
            "missed": pl.Int64,
        }
        records: list[dict[str, Any]] = [asdict(img) for img in self.counts.images]
        df: pl.DataFrame = pl.DataFrame(records, schema=schema)
        return df.with_columns(
            pl.when(pl.col("gt_points") > 0)
            .then(pl.col("matched_points") / pl.col("gt_points"))
            .otherwise(None)
            .alias("accuracy")
        )

    def to_text(self, i18n: Optional[I18n] = None) -> str:
        """ラベルを翻訳したテキストレポート"""
        t: I18n = i18n or get_i18n()
        counts: EvalCounts = self.counts
        lines: list[str] = [
            t.get("report_title"),
            "",
            f"[{t.get('report_config')}]",
            f"  {t.get('threshold_px')}: {self.config.threshold_px:g}",
            f"  {t.get('min_points')}: {self.config.min_points}",
            f"  {t.get('fp_cutoff')}: {self.config.fp_cutoff:g}",
            f"  {t.get('resolution')}: {self.config.resolution}",
            f"  {t.get('strategy')}: {self.config.strategy}",
            "",
            f"[{t.get('report_summary')}]",
            f"  {t.get('images')}: {len(counts.images)}",
            f"  {t.get('gt_lanes')}: {counts.gt_lanes}",
            f"  {t.get('pred_lanes')}: {counts.pred_lanes}",
            f"  {t.get('matched_points')}: {counts.matched_points} / {counts.gt_points}",
            f"  {t.get('accuracy')}: {self.accuracy:.4f}",
            f"  {t.get('fp_rate')}: {self.fp_rate:.4f}",
            f"  {t.get('fn_rate')}: {self.fn_rate:.4f}",
        ]
        if self.classification_accuracy is not None:
            lines += [
                "",
                f"[{t.get('report_classification')}]",
                f"  {t.get('classification_accuracy')}: {self.classification_accuracy:.4f}",
            ]
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | Path, i18n: Optional[I18n] = None) -> list[Path]:
        """
        metrics.txt, metrics.csv, per_image.csv (と confusion.csv) を書き出す

        Returns:
            書き出したファイルのパス
        """
        root: Path = Path(out_dir)
        root.mkdir(parents=True, exist_ok=True)

        text_path: Path = root / "metrics.txt"
        text_path.write_text(self.to_text(i18n), encoding="utf-8")
        table_path: Path = root / "metrics.csv"
        self.to_frame().write_csv(table_path)
        per_image_path: Path = root / "per_image.csv"
        self.per_image().write_csv(per_image_path)
        written: list[Path] = [text_path, table_path, per_image_path]

        if self.confusion is not None:
            confusion_path: Path = root / "confusion.csv"
            self.confusion.write_csv(confusion_path)
            written.append(confusion_path)

        logger.info("Wrote metrics report to %s", root)
        return written


match_lanes = LaneMetrics.match_lanes
accuracy = LaneMetrics.accuracy
fp_rate = LaneMetrics.fp_rate
fn_rate = LaneMetrics.fn_rate
classification_accuracy = ClassificationMetrics.classification_accuracy

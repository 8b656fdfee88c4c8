"""
コマンドラインツール

    lane-cascade gen-data  --config CFG [--output DIR]
    lane-cascade train-seg --config CFG [--epochs N] [--resume last.pt]
    lane-cascade train-cls --config CFG [--epochs N] [--descriptor-size S] [--scheme NAME]
    lane-cascade infer     --config CFG [IMAGE ...] [--overlays]
    lane-cascade eval      --config CFG [--split test] [--threshold-px PX]
    lane-cascade ablate    --config CFG
    lane-cascade overlay   --config CFG [--split test] [--mode class|instance]
"""

import argparse
import json
import logging
import sys
from typing import Optional, Sequence

from lane_cascade_toolkit.config import LOG_LEVELS, ConfigLoader, PipelineConfig
from lane_cascade_toolkit.errors import LaneCascadeError
from lane_cascade_toolkit.i18n import I18n
from lane_cascade_toolkit.pipeline.workflow import SPLITS, Workflow

logger = logging.getLogger("lane_cascade_toolkit")

LOG_FORMAT: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML設定ファイル")
    parser.add_argument("--seed", type=int, help="ルートシード")
    parser.add_argument("--output", help="出力ディレクトリ")
    parser.add_argument("--device", help="torchのデバイス (cpu, cuda など)")
    parser.add_argument("--log-level", choices=LOG_LEVELS, type=str.upper, help="ログレベル")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="設定の上書き (例: seg_training.epochs=5)。複数指定可",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lane-cascade",
        description="カスケードCNNによるレーン境界の検出と分類",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="合成データセットをTuSimple形式で書き出す")
    _common(gen)

    seg = sub.add_parser("train-seg", help="セグメンテーションモデルを学習")
    _common(seg)
    seg.add_argument("--epochs", type=int, help="総エポック数")
    seg.add_argument("--resume", help="再開する last.pt")

    cls = sub.add_parser("train-cls", help="ディスクリプタ分類器を学習")
    _common(cls)
    cls.add_argument("--epochs", type=int, help="分類器のエポック数")
    cls.add_argument("--descriptor-size", type=int, help="ディスクリプタの一辺")
    cls.add_argument("--scheme", help="クラス体系 (two_class, three_class, full)")
    cls.add_argument("--threshold-px", type=float, help="正解との対応付けの距離閾値")
    cls.add_argument("--seg-checkpoint", help="セグメンテーションのチェックポイント")

    infer = sub.add_parser("infer", help="画像を推論して predictions.jsonl を書く")
    _common(infer)
    infer.add_argument("images", nargs="*", help="画像ファイル (省略時はデータセットの split)")
    infer.add_argument("--split", choices=SPLITS, default="test")
    infer.add_argument("--overlays", action="store_true", help="重畳画像も書き出す")

    ev = sub.add_parser("eval", help="TuSimple方式の指標で評価")
    _common(ev)
    ev.add_argument("--split", choices=SPLITS, default="test")
    ev.add_argument("--threshold-px", type=float, help="点一致の距離閾値")

    ab = sub.add_parser("ablate", help="ディスクリプタサイズのアブレーション")
    _common(ab)
    ab.add_argument("--epochs", type=int, help="各セルの分類器のエポック数")
    ab.add_argument("--seg-checkpoint", help="セグメンテーションのチェックポイント")

    ov = sub.add_parser("overlay", help="推論結果を画像に重ねて保存")
    _common(ov)
    ov.add_argument("--split", choices=SPLITS, default="test")
    ov.add_argument("--mode", choices=("class", "instance"), help="配色")

    return parser


def collect_overrides(args: argparse.Namespace) -> list[str]:
    """コマンドごとのフラグをドット区切りの上書きに変換 (--set が最後に勝つ)"""
    overrides: list[str] = []
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.output is not None:
        overrides.append(f"output_dir={json.dumps(args.output)}")
    if args.device is not None:
        overrides.append(f"device={json.dumps(args.device)}")
    if args.log_level is not None:
        overrides.append(f"log_level={args.log_level}")

    epochs: Optional[int] = getattr(args, "epochs", None)
    if epochs is not None:
        section: str = "seg_training" if args.command == "train-seg" else "cls_training"
        overrides.append(f"{section}.epochs={epochs}")
    if getattr(args, "descriptor_size", None) is not None:
        overrides.append(f"descriptor.size={args.descriptor_size}")
    if getattr(args, "scheme", None) is not None:
        overrides.append(f"scheme={json.dumps(args.scheme)}")
    if getattr(args, "threshold_px", None) is not None:
        overrides.append(f"metrics.threshold_px={args.threshold_px}")

    return overrides + list(args.overrides)


def setup_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, level.upper()), format=LOG_FORMAT, force=True)


def run(args: argparse.Namespace) -> int:
    config: PipelineConfig = ConfigLoader.load(args.config, collect_overrides(args))
    setup_logging(config.log_level)
    ConfigLoader.write_snapshot(config, config.output_path, args.config)

    command: str = args.command
    if command == "gen-data":
        Workflow.generate_data(config)
    elif command == "train-seg":
        Workflow.train_segmentation(config, resume=args.resume)
    elif command == "train-cls":
        Workflow.train_classification(config, args.seg_checkpoint)
    elif command == "infer":
        Workflow.infer(config, args.images, args.split, args.overlays)
    elif command == "eval":
        report = Workflow.evaluate(config, args.split).report
        print(report.to_text(I18n(config.report.language)), end="")  # type: ignore[arg-type]
    elif command == "ablate":
        print(Workflow.ablate(config, args.seg_checkpoint).pivot())
    elif command == "overlay":
        Workflow.render_overlays(config, args.split, args.mode)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser: argparse.ArgumentParser = build_parser()
    args: argparse.Namespace = parser.parse_args(argv)
    try:
        return run(args)
    except FileNotFoundError as e:
        logger.error("%s", e)
        return 2
    except LaneCascadeError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return 1


if __name__ == "__main__":
    sys.exit(main())

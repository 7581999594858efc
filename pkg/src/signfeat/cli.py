"""Command-line entry point: signfeat <command> --config <path> [...].

Commands mirror the pipeline stages (extract, codebook, encode, train,
eval, predict, pipeline). Exit code 0 on success, 1 on usage or config
errors, 2 on data or model errors.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .config import load_config
from .errors import ConfigError, SignFeatError
from .pipeline import STAGE_ORDER, run_pipeline, run_predict, run_stage

logger = logging.getLogger(__name__)


class _ArgumentParser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors by default; this tool reserves 2
    for data errors, so usage problems exit 1 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _ArgumentParser:
    parser = _ArgumentParser(
        prog="signfeat",
        description="Hand-sign image classification with handcrafted "
                    "binary features, a visual-word codebook, and a "
                    "decision tree.",
    )
    parser.add_argument("--version", action="version",
                        version=f"signfeat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="command")
    descriptions = {
        "extract": "detect keypoints and write per-class descriptor CSVs",
        "codebook": "fit the k-means codebook over pooled descriptors",
        "encode": "quantize each image into a histogram feature row",
        "train": "tune tree depth and fit the classifier",
        "eval": "score the tree on the held-out split and write reports",
        "predict": "classify a single image with the saved artifacts",
        "pipeline": "run every stage in order, skipping up-to-date ones",
    }
    for name in (*STAGE_ORDER, "predict", "pipeline"):
        p = sub.add_parser(name, help=descriptions[name],
                           description=descriptions[name])
        p.add_argument("--config", required=True,
                       help="path to the JSON configuration file")
        p.add_argument("--dataset", help="dataset root (overrides config)")
        p.add_argument("--workdir", help="work directory (overrides config)")
        if name == "predict":
            p.add_argument("--image", required=True,
                           help="image file to classify")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config).with_overrides(dataset=args.dataset,
                                                      workdir=args.workdir)
        if args.command == "predict":
            name, proba = run_predict(cfg, args.image)
            print(name)
            print(" ".join(f"{p:.6f}" for p in proba))
        elif args.command == "pipeline":
            results = run_pipeline(cfg)
            acc = results.get("eval", {}).get("accuracy")
            if acc is not None:
                print(f"accuracy: {acc:.4f}")
        else:
            result = run_stage(cfg, args.command)
            if args.command == "eval":
                print(f"accuracy: {result['accuracy']:.4f}")
            elif args.command == "train":
                print(f"best depth: {result['best_depth']}")
    except ConfigError as exc:
        print(f"signfeat: config error: {exc}", file=sys.stderr)
        return 1
    except (SignFeatError, FileNotFoundError, ValueError) as exc:
        print(f"signfeat: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

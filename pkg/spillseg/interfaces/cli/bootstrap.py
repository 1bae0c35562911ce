#!/usr/bin/env python3
"""Canonical CLI bootstrap entrypoint."""

import argparse
import logging
import sys

from spillseg.config.settings import get_settings
from spillseg.core.errors import EXIT_USAGE, classify_error
from spillseg.interfaces.cli.ui import ICONS, VERSION, console, print_error

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s %(message)s"


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit 1 like every other rejected invocation."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print_error(f"{self.prog}: {message}")
        sys.exit(EXIT_USAGE)


def show_version():
    console.print(
        f"""
[bold cyan]spillseg[/bold cyan] v{VERSION}

[dim]Two-branch oil-spill segmentation for SAR tiles[/dim]
"""
    )


def _configure_logging(verbose: bool, level: int) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else level,
        format=LOG_FORMAT,
        force=True,
    )


def build_parser(default_workers: int = 4) -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="spillseg",
        description="spillseg - SAR oil-spill segmentation with a fused SegNet/DeepLab network",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=f"""
{ICONS["star"]} Examples:

  # Generate 40 synthetic 64x64 scenes (32 train / 8 test)
  spillseg synth --out data/toy --count 40 --seed 7

  # Train with the packaged defaults, or a config file
  spillseg train --data data/toy --out runs/toy
  spillseg train --config configs/overfit.json --data data/toy --out runs/toy --force

  # Evaluate the best checkpoint, comparing false alarms with an Otsu threshold
  spillseg evaluate --checkpoint runs/toy/checkpoint --data data/toy --compare-baseline

  # Segment one image
  spillseg predict --checkpoint runs/toy/checkpoint --image scene.png --out mask.png --prob-out prob.png

  # Verify every backward pass against finite differences
  spillseg gradcheck --seed 0

{ICONS["check"]} Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure
        """,
    )
    parser.add_argument(
        "--version", "-V", action="store_true", help="Show version information"
    )
    parser.add_argument(
        "--verbose", "-v", action="store_true", help="Log at DEBUG level (default: SPILLSEG_LOG_LEVEL or INFO)"
    )

    subparsers = parser.add_subparsers(dest="command", metavar="<command>")

    synth = subparsers.add_parser(
        "synth",
        help="Generate a synthetic speckled SAR dataset",
    )
    synth.add_argument("--out", required=True, help="Output dataset directory")
    synth.add_argument("--count", type=int, required=True, help="Number of scenes (>= 2)")
    synth.add_argument("--seed", type=int, default=None, help="Scene seed (default: data.scene.seed, 0)")
    synth.add_argument("--size", type=int, default=None, help="Tile side in pixels (default: data.scene.size, 64)")
    synth.add_argument("--config", default=None, help="Config file supplying data.scene and data.split_ratio")
    synth.add_argument("--force", action="store_true", help="Overwrite a non-empty output directory")
    synth.add_argument("--workers", type=int, default=default_workers, help=f"Render threads (default: {default_workers})")

    train = subparsers.add_parser(
        "train",
        help="Train the segmenter and keep the best-IoU checkpoint",
    )
    train.add_argument("--config", default=None, help="JSON/YAML config (default: packaged defaults)")
    train.add_argument("--data", required=True, help="Dataset directory (images/, masks/, manifest.json)")
    train.add_argument("--out", required=True, help="Run directory for checkpoint/ and train_log.csv")
    train.add_argument("--force", action="store_true", help="Overwrite outputs of a previous run")
    train.add_argument("--workers", type=int, default=default_workers, help=f"Tile loading threads (default: {default_workers})")

    evaluate = subparsers.add_parser(
        "evaluate",
        help="Write metrics.csv and roc.csv for a checkpoint",
    )
    evaluate.add_argument("--checkpoint", required=True, help="Checkpoint directory")
    evaluate.add_argument("--data", required=True, help="Dataset directory")
    evaluate.add_argument("--split", default="test", choices=["train", "test"], help="Split to evaluate (default: test)")
    evaluate.add_argument(
        "--threshold", type=float, default=None, help="Binarisation threshold (default: fusion.threshold, 0.5)"
    )
    evaluate.add_argument(
        "--out", default=None, help="Output directory (default: eval_<split> next to the checkpoint)"
    )
    evaluate.add_argument(
        "--compare-baseline",
        action="store_true",
        help="Also evaluate an Otsu threshold baseline and report false-alarm reduction",
    )
    evaluate.add_argument("--workers", type=int, default=default_workers, help=f"Tile loading threads (default: {default_workers})")

    predict = subparsers.add_parser(
        "predict",
        help="Segment a single image",
    )
    predict.add_argument("--checkpoint", required=True, help="Checkpoint directory")
    predict.add_argument("--image", required=True, help="8-bit grayscale PNG/PGM input")
    predict.add_argument("--out", required=True, help="Mask output path ({0,255} PNG)")
    predict.add_argument("--prob-out", default=None, help="Optional probability map output (round(255*p))")
    predict.add_argument(
        "--threshold", type=float, default=None, help="Binarisation threshold (default: fusion.threshold, 0.5)"
    )
    predict.add_argument("--time", action="store_true", help="Report forward-pass wall time")

    gradcheck = subparsers.add_parser(
        "gradcheck",
        help="Finite-difference check of every differentiable operator",
    )
    gradcheck.add_argument("--seed", type=int, default=0, help="First seed (default: 0)")
    gradcheck.add_argument("--seeds", type=int, default=10, help="Number of consecutive seeds per check (default: 10)")

    return parser


def _dispatch(args) -> int:
    from spillseg.interfaces.cli import commands

    if args.command == "synth":
        return commands.cmd_synth(
            args.out,
            args.count,
            seed=args.seed,
            size=args.size,
            config_path=args.config,
            force=args.force,
            workers=args.workers,
        )
    if args.command == "train":
        return commands.cmd_train(
            args.data, args.out, config_path=args.config, force=args.force, workers=args.workers
        )
    if args.command == "evaluate":
        return commands.cmd_evaluate(
            args.checkpoint,
            args.data,
            split=args.split,
            threshold=args.threshold,
            out=args.out,
            compare_baseline=args.compare_baseline,
            workers=args.workers,
        )
    if args.command == "predict":
        return commands.cmd_predict(
            args.checkpoint,
            args.image,
            args.out,
            prob_out=args.prob_out,
            threshold=args.threshold,
            timed=args.time,
        )
    if args.command == "gradcheck":
        return commands.cmd_gradcheck(seed=args.seed, seeds=args.seeds)
    raise AssertionError(f"unhandled command {args.command}")


def main(argv=None) -> int:
    try:
        settings = get_settings()
    except ValueError as exc:
        print_error(str(exc))
        return EXIT_USAGE

    parser = build_parser(settings.workers)
    args = parser.parse_args(argv)

    if args.version:
        show_version()
        return 0

    if args.command is None:
        parser.print_help()
        return EXIT_USAGE

    _configure_logging(args.verbose, settings.log_level_number)
    try:
        return _dispatch(args)
    except Exception as exc:
        info = classify_error(exc)
        logger.debug("command %s failed", args.command, exc_info=True)
        print_error(f"{info['error_type']} error: {info['error']}")
        return info["exit_code"]


if __name__ == "__main__":
    sys.exit(main())

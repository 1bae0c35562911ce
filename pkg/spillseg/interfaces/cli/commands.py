"""CLI command implementations.

Each command returns a process exit code. Deliberate failures propagate as
``SpillSegError`` subclasses and are classified by the bootstrap.
"""

from __future__ import annotations

import logging
import shutil
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from spillseg.config.loader import dump_resolved_config, load_global_config
from spillseg.config.schema.validator import validate_global_config
from spillseg.core.errors import EXIT_NUMERIC, EXIT_OK, ConfigError, SpillSegError
from spillseg.core.ops import bilinear_resize
from spillseg.data.dataset import (
    IMAGES_DIR,
    MANIFEST_NAME,
    MASKS_DIR,
    SPLITS,
    load_or_create_manifest,
    load_split,
)
from spillseg.data.synth import generate_dataset
from spillseg.domain.diagnostics import ALL_CASES, run_gradcheck_suite
from spillseg.domain.evaluation import (
    FalseAlarmComparison,
    compare_false_alarms,
    evaluate_baseline,
    evaluate_model,
)
from spillseg.domain.training.trainer import CHECKPOINT_DIR, LOG_NAME, train
from spillseg.infra.checkpoint import load_checkpoint
from spillseg.infra.imageio import load_tile, resize_tile, save_mask, save_tile
from spillseg.infra.reports import write_metrics_csv, write_roc_csv
from spillseg.interfaces.cli.ui import (
    ICONS,
    console,
    create_gradcheck_table,
    create_metrics_table,
    create_progress_context,
    print_command_header,
    print_info,
    print_success,
    print_warning,
)
from spillseg.models.fusion import binarize

logger = logging.getLogger(__name__)

METRICS_NAME = "metrics.csv"
ROC_NAME = "roc.csv"
BASELINE_METRICS_NAME = "baseline_metrics.csv"


def _check_output_dir(directory: Path, force: bool, produced: Sequence[str]) -> None:
    """Refuse to write into a directory that already holds outputs unless forced.

    With *force*, the entries named in *produced* are removed first so a rerun
    leaves the same tree as a fresh run.
    """
    if directory.exists() and not directory.is_dir():
        raise SpillSegError(f"{directory}: exists and is not a directory")
    if directory.is_dir() and any(directory.iterdir()):
        if not force:
            raise SpillSegError(f"{directory}: output directory is not empty (use --force to overwrite)")
        for name in produced:
            target = directory / name
            if target.is_dir():
                shutil.rmtree(target)
            elif target.exists():
                target.unlink()
        logger.info("overwriting outputs in %s", directory)
    directory.mkdir(parents=True, exist_ok=True)


def _check_threshold(threshold: Optional[float]) -> None:
    if threshold is not None and not 0.0 < threshold < 1.0:
        raise ConfigError(f"threshold must lie strictly between 0 and 1, got {threshold}")


# ── synth ─────────────────────────────────────────────────────────────────────


def cmd_synth(
    out: str | Path,
    count: int,
    *,
    seed: Optional[int] = None,
    size: Optional[int] = None,
    config_path: str | Path | None = None,
    force: bool = False,
    workers: int = 4,
) -> int:
    if count < 2:
        raise ConfigError(f"--count must be >= 2 for a train/test split, got {count}")
    base = load_global_config(config_path)
    scene = base.data.scene.model_dump()
    if seed is not None:
        scene["seed"] = seed
    if size is not None:
        scene["size"] = size
    raw = base.model_dump(mode="json")
    raw["data"]["scene"] = scene
    config = validate_global_config(raw)
    spec = config.data.scene

    out = Path(out)
    _check_output_dir(out, force, (IMAGES_DIR, MASKS_DIR, MANIFEST_NAME))
    print_command_header(
        "synth",
        {"Output": out, "Scenes": count, "Size": f"{spec.size}x{spec.size}", "Seed": spec.seed},
    )

    with create_progress_context() as progress:
        task = progress.add_task("Rendering scenes", total=count, status="")
        manifest = generate_dataset(
            out,
            count,
            spec,
            ratio=config.data.split_ratio,
            workers=workers,
            on_item=lambda i: progress.update(task, advance=1, status=f"scene {i}"),
        )
    dump_resolved_config(config, out)

    counts = manifest.counts()
    print_success(f"Wrote {count} scenes to {out} ({counts['train']} train / {counts['test']} test)")
    return EXIT_OK


# ── train ─────────────────────────────────────────────────────────────────────


def cmd_train(
    data: str | Path,
    out: str | Path,
    *,
    config_path: str | Path | None = None,
    force: bool = False,
    workers: int = 4,
) -> int:
    config = load_global_config(config_path)
    out = Path(out)
    _check_output_dir(out, force, (CHECKPOINT_DIR, LOG_NAME))
    dump_resolved_config(config, out)

    manifest = load_or_create_manifest(data, config.data.split_ratio, config.train.seed)
    epochs = config.train.epochs
    print_command_header(
        "train",
        {
            "Data": data,
            "Output": out,
            "Branches": ", ".join(config.fusion.branches),
            "Epochs": epochs,
            "Seed": config.train.seed,
        },
    )

    with create_progress_context() as progress:
        task = progress.add_task("Training", total=epochs, status="")

        def _on_epoch(record):
            marker = f" {ICONS['star']}" if record.improved else ""
            progress.update(
                task,
                advance=1,
                status=f"loss {record.train_loss:.4f} iou {record.val_iou:.4f}{marker}",
            )

        result = train(config, data, manifest, out, workers=workers, on_epoch=_on_epoch)

    print_success(
        f"Best val IoU {result.best_iou:.4f} at epoch {result.best_epoch}; "
        f"checkpoint in {result.checkpoint_dir}"
    )
    print_info(f"Training log: {result.log_path}")
    return EXIT_OK


# ── evaluate ──────────────────────────────────────────────────────────────────


def _print_false_alarms(cmp: FalseAlarmComparison) -> None:
    def _pct(value):
        return "n/a" if value is None else f"{value * 100:.1f}%"

    console.print()
    console.print("[bold]False-positive pixel rate[/bold]")
    console.print(
        f"  all scenes       model {cmp.model_fpr:.5f}  baseline {cmp.baseline_fpr:.5f}  "
        f"reduction {_pct(cmp.reduction)}"
    )
    console.print(
        f"  look-alike only  model {cmp.model_fpr_empty:.5f}  baseline {cmp.baseline_fpr_empty:.5f}  "
        f"reduction {_pct(cmp.reduction_empty)}  [dim]({cmp.empty_scenes} scenes)[/dim]"
    )


def cmd_evaluate(
    checkpoint: str | Path,
    data: str | Path,
    *,
    split: str = "test",
    threshold: Optional[float] = None,
    out: str | Path | None = None,
    compare_baseline: bool = False,
    workers: int = 4,
) -> int:
    if split not in SPLITS:
        raise ConfigError(f"unknown split '{split}' (expected one of {', '.join(SPLITS)})")
    _check_threshold(threshold)
    checkpoint = Path(checkpoint)
    ckpt = load_checkpoint(checkpoint)
    config = ckpt.config
    model = ckpt.build_model()
    threshold = model.threshold if threshold is None else threshold
    out = Path(out) if out is not None else checkpoint.parent / f"eval_{split}"
    out.mkdir(parents=True, exist_ok=True)

    manifest = load_or_create_manifest(data, config.data.split_ratio, config.train.seed)
    tiles = load_split(data, manifest, split, config.data.tile_size, workers)
    print_command_header(
        "evaluate",
        {
            "Checkpoint": f"{checkpoint} (epoch {ckpt.metadata.epoch})",
            "Split": f"{split} ({len(tiles)} tiles)",
            "Threshold": threshold,
        },
    )

    result = evaluate_model(
        model, ckpt.params, tiles.images, tiles.masks, threshold, config.train.batch_size
    )
    write_metrics_csv(out / METRICS_NAME, result.report)
    if result.curve is not None:
        write_roc_csv(out / ROC_NAME, result.curve)
    else:
        print_warning("ROC-AUC undefined: the split has a single class; roc.csv not written")
    dump_resolved_config(config, out)

    rows = {"model": result.report}
    if compare_baseline:
        baseline = evaluate_baseline(tiles.images, tiles.masks)
        write_metrics_csv(out / BASELINE_METRICS_NAME, baseline.report)
        rows["otsu baseline"] = baseline.report
    console.print(create_metrics_table(f"Evaluation on {split}", rows))
    if compare_baseline:
        _print_false_alarms(compare_false_alarms(result, baseline))

    print_success(f"Metrics written to {out}")
    return EXIT_OK


# ── predict ───────────────────────────────────────────────────────────────────


def cmd_predict(
    checkpoint: str | Path,
    image: str | Path,
    out: str | Path,
    *,
    prob_out: str | Path | None = None,
    threshold: Optional[float] = None,
    timed: bool = False,
) -> int:
    _check_threshold(threshold)
    ckpt = load_checkpoint(checkpoint)
    model = ckpt.build_model()
    threshold = model.threshold if threshold is None else threshold

    x = load_tile(image)
    h, w = x.shape[2:]
    divisor = ckpt.config.spatial_divisor
    resized = h % divisor != 0 or w % divisor != 0
    if resized:
        tile = ckpt.config.data.tile_size
        logger.info("resizing %dx%d input to %dx%d for inference", h, w, tile, tile)
        x = resize_tile(x, tile)

    start = time.perf_counter()
    prob = model.forward(x, ckpt.params)
    elapsed = time.perf_counter() - start

    if resized:
        prob = np.clip(bilinear_resize(prob, h, w), 0.0, 1.0)
    save_mask(out, binarize(prob, threshold))
    if prob_out is not None:
        save_tile(prob_out, prob)

    print_success(f"Mask written to {out}")
    if prob_out is not None:
        print_info(f"Probability map written to {prob_out}")
    if timed:
        print_info(f"Forward pass: {elapsed:.3f} s")
    return EXIT_OK


# ── gradcheck ─────────────────────────────────────────────────────────────────


def cmd_gradcheck(*, seed: int = 0, seeds: int = 10) -> int:
    if seeds < 1:
        raise ConfigError(f"--seeds must be >= 1, got {seeds}")
    seed_list = list(range(seed, seed + seeds))
    print_command_header("gradcheck", {"Checks": len(ALL_CASES), "Seeds": f"{seed}..{seed + seeds - 1}"})

    with create_progress_context() as progress:
        task = progress.add_task("Checking gradients", total=len(ALL_CASES), status="")
        rows = run_gradcheck_suite(
            seed_list,
            on_case=lambda row: progress.update(task, advance=1, status=row.name),
        )

    console.print(create_gradcheck_table(rows))
    failed = [row.name for row in rows if not row.passed]
    if failed:
        print_warning(f"Gradient check failed for: {', '.join(failed)}")
        return EXIT_NUMERIC
    print_success(f"All {len(rows)} gradient checks passed")
    return EXIT_OK

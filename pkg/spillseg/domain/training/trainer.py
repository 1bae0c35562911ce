"""Epoch loop: seeded batches, hybrid loss, Adam at a cosine rate, best-IoU checkpoints."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from spillseg.config.schema.models import GlobalConfig
from spillseg.core.errors import DataError, NumericError
from spillseg.core.tensor import ParamStore
from spillseg.data.augment import augment_batch
from spillseg.data.dataset import DatasetManifest, TileSet, load_split
from spillseg.domain.evaluation import validation_iou
from spillseg.domain.losses import loss_and_grad
from spillseg.domain.training.optimizer import AdamState, adam_step
from spillseg.domain.training.schedule import cosine_lr
from spillseg.infra.checkpoint import CheckpointMeta, save_checkpoint
from spillseg.infra.reports import write_training_log
from spillseg.models.network import FusionSegmenter

logger = logging.getLogger(__name__)

LOG_NAME = "train_log.csv"
CHECKPOINT_DIR = "checkpoint"


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    val_iou: float
    improved: bool = False


@dataclass
class TrainingResult:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    best_iou: float = -math.inf
    params: Optional[ParamStore] = None
    checkpoint_dir: Optional[Path] = None
    log_path: Optional[Path] = None


class Trainer:
    """Runs the optimisation protocol for one configuration.

    Parameter initialisation and the shuffle/augmentation stream use
    separate generators derived from ``train.seed``.
    """

    def __init__(
        self,
        config: GlobalConfig,
        *,
        on_epoch: Optional[Callable[[EpochRecord], None]] = None,
    ):
        self.config = config
        self.model = FusionSegmenter(config)
        self.loss_cfg = config.effective_loss()
        self.on_epoch = on_epoch

    def train_step(
        self, params: ParamStore, state: AdamState, images, masks, lr: float
    ) -> float:
        params.zero_grad()
        prob = self.model.forward(images, params)
        loss, dprob = loss_and_grad(prob, masks, self.loss_cfg)
        if not math.isfinite(loss):
            raise NumericError(f"non-finite loss {loss}")
        self.model.backward(dprob, params)
        adam_step(params, state, lr, self.config.train)
        return loss

    def _run_epoch(
        self,
        epoch: int,
        params: ParamStore,
        state: AdamState,
        data: TileSet,
        rng: np.random.Generator,
        lr: float,
    ) -> float:
        cfg = self.config
        batch_size = cfg.train.batch_size
        order = rng.permutation(len(data))
        total = 0.0
        for batch, start in enumerate(range(0, len(data), batch_size)):
            idx = order[start : start + batch_size]
            images, masks = data.images[idx], data.masks[idx]
            if cfg.data.augment:
                images, masks = augment_batch(images, masks, cfg.data.augmentation, rng)
            try:
                loss = self.train_step(params, state, images, masks, lr)
            except NumericError as exc:
                raise NumericError(f"epoch {epoch} batch {batch}: {exc}") from None
            total += loss * len(idx)
        return total / len(data)

    def fit(self, train: TileSet, val: TileSet, out_dir: str | Path) -> TrainingResult:
        if len(train) == 0:
            raise DataError("train split is empty")
        if len(val) == 0:
            raise DataError("test split is empty")

        cfg = self.config
        seed = cfg.train.seed
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        params = self.model.init_params(np.random.default_rng([seed, 0]))
        batch_rng = np.random.default_rng([seed, 1])
        state = AdamState.zeros(params)
        result = TrainingResult(
            checkpoint_dir=out_dir / CHECKPOINT_DIR, log_path=out_dir / LOG_NAME
        )
        logger.info(
            "training on %d tiles, validating on %d (%d parameters)",
            len(train),
            len(val),
            params.num_elements(),
        )

        for epoch in range(cfg.train.epochs):
            lr = cosine_lr(epoch, cfg.train)
            train_loss = self._run_epoch(epoch, params, state, train, batch_rng, lr)

            # validate exactly the weights a checkpoint would store
            stored = params.quantized()
            val_iou = validation_iou(
                self.model, stored, val.images, val.masks, 0.5, cfg.train.batch_size
            )
            improved = val_iou > result.best_iou
            record = EpochRecord(epoch, lr, train_loss, val_iou, improved)
            result.records.append(record)
            logger.info(
                "epoch=%d lr=%.6g train_loss=%.6f val_iou=%.6f", epoch, lr, train_loss, val_iou
            )

            if improved:
                result.best_iou = val_iou
                result.best_epoch = epoch
                result.params = stored
                save_checkpoint(
                    result.checkpoint_dir,
                    stored,
                    cfg,
                    CheckpointMeta(epoch=epoch, val_iou=val_iou, seed=seed),
                )
                logger.info("new best checkpoint at epoch %d (val_iou=%.6f)", epoch, val_iou)

            write_training_log(result.log_path, result.records)
            if self.on_epoch is not None:
                self.on_epoch(record)

        return result


def train(
    config: GlobalConfig,
    root: str | Path,
    manifest: DatasetManifest,
    out_dir: str | Path,
    *,
    workers: int = 4,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
) -> TrainingResult:
    """Load both splits of *manifest* and train; validation uses the test split."""
    tile = config.data.tile_size
    train_set = load_split(root, manifest, "train", tile, workers)
    val_set = load_split(root, manifest, "test", tile, workers)
    return Trainer(config, on_epoch=on_epoch).fit(train_set, val_set, out_dir)

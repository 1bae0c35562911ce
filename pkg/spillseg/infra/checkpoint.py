"""Checkpoint storage: ``manifest.json`` plus a little-endian float32 ``weights.bin``."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from spillseg.config.schema.models import GlobalConfig
from spillseg.config.schema.validator import validate_global_config
from spillseg.core.errors import CheckpointError, ConfigError
from spillseg.core.tensor import ParamStore
from spillseg.models.network import FusionSegmenter

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
WEIGHTS_NAME = "weights.bin"
STORAGE_DTYPE = np.dtype("<f4")


class TensorEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    shape: list[int]
    offset: int
    nbytes: int


class CheckpointMeta(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epoch: int
    val_iou: float
    seed: int


class CheckpointManifest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format_version: int
    config: dict
    tensors: list[TensorEntry]
    metadata: CheckpointMeta


@dataclass
class Checkpoint:
    params: ParamStore
    config: GlobalConfig
    metadata: CheckpointMeta

    def build_model(self) -> FusionSegmenter:
        return FusionSegmenter(self.config)


def save_checkpoint(
    directory: str | Path,
    params: ParamStore,
    config: GlobalConfig,
    meta: CheckpointMeta,
) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    tensors: list[TensorEntry] = []
    chunks: list[bytes] = []
    offset = 0
    for name, value in params.items():
        data = value.astype(STORAGE_DTYPE).tobytes()
        tensors.append(TensorEntry(name=name, shape=list(value.shape), offset=offset, nbytes=len(data)))
        chunks.append(data)
        offset += len(data)

    manifest = CheckpointManifest(
        format_version=FORMAT_VERSION,
        config=config.model_dump(mode="json"),
        tensors=tensors,
        metadata=meta,
    )
    (directory / WEIGHTS_NAME).write_bytes(b"".join(chunks))
    (directory / MANIFEST_NAME).write_text(
        json.dumps(manifest.model_dump(mode="json"), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    logger.debug("saved %d tensors (%d bytes) to %s", len(tensors), offset, directory)
    return directory


def _read_manifest(directory: Path) -> CheckpointManifest:
    path = directory / MANIFEST_NAME
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CheckpointError(f"{path}: checkpoint manifest not found") from None
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: invalid JSON ({exc.msg})") from None

    version = raw.get("format_version") if isinstance(raw, dict) else None
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint format version {version!r} "
            f"(expected {FORMAT_VERSION})"
        )
    try:
        return CheckpointManifest.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = ".".join(str(p) for p in first["loc"])
        raise CheckpointError(f"{path}: invalid manifest at {loc}: {first['msg']}") from None


def load_checkpoint(directory: str | Path) -> Checkpoint:
    directory = Path(directory)
    manifest = _read_manifest(directory)
    try:
        config = validate_global_config(manifest.config)
    except ConfigError as exc:
        raise CheckpointError(f"{directory}: stored config is invalid ({exc})") from None

    weights_path = directory / WEIGHTS_NAME
    try:
        blob = weights_path.read_bytes()
    except FileNotFoundError:
        raise CheckpointError(f"{weights_path}: weights file not found") from None

    expected = sum(entry.nbytes for entry in manifest.tensors)
    if len(blob) != expected:
        raise CheckpointError(
            f"{weights_path}: blob has {len(blob)} bytes, manifest lists {expected}"
        )

    params = ParamStore()
    offset = 0
    for entry in manifest.tensors:
        count = int(np.prod(entry.shape)) if entry.shape else 1
        if entry.offset != offset or entry.nbytes != count * STORAGE_DTYPE.itemsize:
            raise CheckpointError(
                f"{directory}: tensor {entry.name} has inconsistent offset/size "
                f"({entry.offset}/{entry.nbytes} for shape {tuple(entry.shape)})"
            )
        values = np.frombuffer(blob, dtype=STORAGE_DTYPE, count=count, offset=offset)
        params.add(entry.name, values.astype(np.float64).reshape(entry.shape))
        offset += entry.nbytes

    _check_architecture(directory, config, params)
    return Checkpoint(params=params, config=config, metadata=manifest.metadata)


def _check_architecture(directory: Path, config: GlobalConfig, params: ParamStore) -> None:
    """Stored tensors must match what the stored config would build."""
    reference = FusionSegmenter(config).init_params(0)
    expected = {name: value.shape for name, value in reference.items()}
    found = {name: value.shape for name, value in params.items()}
    for name in sorted(set(expected) | set(found)):
        if name not in found:
            raise CheckpointError(f"{directory}: missing tensor {name}")
        if name not in expected:
            raise CheckpointError(f"{directory}: unexpected tensor {name}")
        if expected[name] != found[name]:
            raise CheckpointError(
                f"{directory}: tensor {name} has shape {found[name]}, "
                f"architecture expects {expected[name]}"
            )

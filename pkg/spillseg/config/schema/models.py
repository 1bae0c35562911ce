"""Typed configuration sections.

Every section rejects unknown keys and carries the documented default for
each omitted field, so an empty document resolves to the full default
configuration.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

BranchName = Literal["segnet", "deeplab"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# ── Architecture ──────────────────────────────────────────────────────────────


class SegNetConfig(_Section):
    in_channels: int = Field(1, ge=1)
    stage_channels: tuple[int, ...] = (16, 32, 64)
    kernel_size: int = Field(3, ge=1)
    out_channels: int = Field(16, ge=1)

    @field_validator("stage_channels")
    @classmethod
    def non_empty_stages(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        if not v:
            raise ValueError("stage_channels must list at least one stage")
        if any(c < 1 for c in v):
            raise ValueError("stage_channels entries must be >= 1")
        return v

    @field_validator("kernel_size")
    @classmethod
    def odd_kernel(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError("kernel_size must be odd")
        return v

    @property
    def depth(self) -> int:
        return len(self.stage_channels)

    @property
    def divisor(self) -> int:
        return 2**self.depth


class ASPPConfig(_Section):
    in_channels: int = Field(1, ge=1)
    dilation_rates: tuple[int, ...] = (1, 2, 4)
    branch_channels: int = Field(16, ge=1)
    entry_channels: int = Field(32, ge=1)
    output_stride: int = Field(4, ge=1)
    out_channels: int = Field(16, ge=1)

    @field_validator("dilation_rates")
    @classmethod
    def distinct_rates(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        if not v:
            raise ValueError("dilation_rates must not be empty")
        if any(r < 1 for r in v):
            raise ValueError("dilation rates must be >= 1")
        if len(set(v)) != len(v):
            raise ValueError("dilation rates must be distinct")
        return v

    @field_validator("output_stride")
    @classmethod
    def power_of_two(cls, v: int) -> int:
        if v & (v - 1):
            raise ValueError("output_stride must be a power of 2")
        return v

    @property
    def entry_layers(self) -> int:
        return self.output_stride.bit_length() - 1


class FusionConfig(_Section):
    threshold: float = Field(0.5, gt=0.0, lt=1.0)
    r: int = Field(4, ge=1)
    branches: tuple[BranchName, ...] = ("segnet", "deeplab")
    attention: bool = True

    @field_validator("branches")
    @classmethod
    def distinct_branches(cls, v: tuple[str, ...]) -> tuple[str, ...]:
        if not v:
            raise ValueError("at least one branch must be enabled")
        if len(set(v)) != len(v):
            raise ValueError("branches must not repeat")
        return v


# ── Objective and optimisation ────────────────────────────────────────────────


class LossConfig(_Section):
    alpha: float = Field(0.5, ge=0.0, le=1.0)
    dice_smooth: float = Field(1.0, gt=0.0)
    prob_clamp: float = Field(1e-7, gt=0.0, lt=0.5)


class TrainConfig(_Section):
    lr0: float = Field(1e-4, gt=0.0)
    weight_decay: float = Field(1e-5, ge=0.0)
    batch_size: int = Field(16, ge=1)
    epochs: int = Field(50, ge=1)
    alpha: Optional[float] = Field(None, ge=0.0, le=1.0)
    seed: int = Field(0, ge=0, lt=2**64)
    lr_min: float = Field(0.0, ge=0.0)

    @model_validator(mode="after")
    def lr_bounds(self) -> "TrainConfig":
        if not self.lr0 > self.lr_min:
            raise ValueError("lr0 must be greater than lr_min")
        return self


# ── Data ──────────────────────────────────────────────────────────────────────


def _check_count_range(v: tuple[int, int], label: str) -> tuple[int, int]:
    lo, hi = v
    if lo < 0 or hi < lo:
        raise ValueError(f"{label} must satisfy 0 <= lo <= hi")
    return v


def _check_multiplier(v: float, label: str) -> float:
    if not 0.0 < v < 1.0:
        raise ValueError(f"{label} must lie strictly between 0 and 1")
    return v


class AugmentationConfig(_Section):
    rotate_90s: bool = True
    hflip_p: float = Field(0.5, ge=0.0, le=1.0)
    vflip_p: float = Field(0.5, ge=0.0, le=1.0)
    contrast_range: tuple[float, float] = (0.9, 1.1)
    max_rotation_deg: float = Field(0.0, ge=0.0, le=180.0)

    @field_validator("contrast_range")
    @classmethod
    def ordered_contrast(cls, v: tuple[float, float]) -> tuple[float, float]:
        lo, hi = v
        if not 0.0 < lo <= hi:
            raise ValueError("contrast_range must satisfy 0 < lo <= hi")
        return v

    @classmethod
    def disabled(cls) -> "AugmentationConfig":
        return cls(rotate_90s=False, hflip_p=0.0, vflip_p=0.0, contrast_range=(1.0, 1.0))


class SceneSpec(_Section):
    size: int = Field(64, ge=8)
    slick_count_range: tuple[int, int] = (0, 3)
    slick_darkening: float = 0.3
    wake_count_range: tuple[int, int] = (0, 2)
    wake_darkening: float = 0.45
    speckle_looks: int = Field(4, ge=1)
    background_level: float = Field(0.6, gt=0.0, le=1.0)
    seed: int = Field(0, ge=0, lt=2**64)

    @field_validator("slick_count_range")
    @classmethod
    def slick_range(cls, v: tuple[int, int]) -> tuple[int, int]:
        return _check_count_range(v, "slick_count_range")

    @field_validator("wake_count_range")
    @classmethod
    def wake_range(cls, v: tuple[int, int]) -> tuple[int, int]:
        return _check_count_range(v, "wake_count_range")

    @field_validator("slick_darkening")
    @classmethod
    def slick_multiplier(cls, v: float) -> float:
        return _check_multiplier(v, "slick_darkening")

    @field_validator("wake_darkening")
    @classmethod
    def wake_multiplier(cls, v: float) -> float:
        return _check_multiplier(v, "wake_darkening")


class DataConfig(_Section):
    tile_size: int = Field(64, ge=8)
    augment: bool = True
    augmentation: AugmentationConfig = Field(default_factory=AugmentationConfig)
    scene: SceneSpec = Field(default_factory=SceneSpec)
    split_ratio: float = Field(0.8, gt=0.0, lt=1.0)


# ── Whole document ────────────────────────────────────────────────────────────


class GlobalConfig(_Section):
    segnet: SegNetConfig = Field(default_factory=SegNetConfig)
    deeplab: ASPPConfig = Field(default_factory=ASPPConfig)
    fusion: FusionConfig = Field(default_factory=FusionConfig)
    loss: LossConfig = Field(default_factory=LossConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    data: DataConfig = Field(default_factory=DataConfig)

    @model_validator(mode="after")
    def consistent_architecture(self) -> "GlobalConfig":
        fused = self.fused_channels
        if fused % self.fusion.r:
            raise ValueError(
                f"fused channel count {fused} is not divisible by fusion.r={self.fusion.r}"
            )
        tile = self.data.tile_size
        if tile % self.spatial_divisor:
            raise ValueError(
                f"data.tile_size {tile} must be divisible by {self.spatial_divisor}"
            )
        return self

    @property
    def fused_channels(self) -> int:
        widths = {"segnet": self.segnet.out_channels, "deeplab": self.deeplab.out_channels}
        return sum(widths[name] for name in self.fusion.branches)

    @property
    def spatial_divisor(self) -> int:
        """Smallest side length every enabled branch accepts."""
        divisor = 1
        if "segnet" in self.fusion.branches:
            divisor = max(divisor, self.segnet.divisor)
        if "deeplab" in self.fusion.branches:
            divisor = max(divisor, self.deeplab.output_stride)
        return divisor

    def effective_loss(self) -> LossConfig:
        """Loss section with ``train.alpha`` applied when it is set."""
        if self.train.alpha is None:
            return self.loss
        return self.loss.model_copy(update={"alpha": self.train.alpha})

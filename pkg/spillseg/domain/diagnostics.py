"""Finite-difference suite over every operator, branch, the fusion head and the loss."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from spillseg.config.schema.models import ASPPConfig, FusionConfig, LossConfig, SegNetConfig
from spillseg.core import ops
from spillseg.core.gradcheck import GradCheckResult, check_gradients, grad_check
from spillseg.core.tensor import ParamStore
from spillseg.domain.losses import total_loss, total_loss_grad
from spillseg.models.base import Branch
from spillseg.models.deeplab import DeepLabBranch
from spillseg.models.fusion import FusionHead
from spillseg.models.segnet import SegNetBranch

logger = logging.getLogger(__name__)

SMOOTH_TOL = 1e-6
DEFAULT_TOL = 1e-4
# coordinates sampled per tensor for the composite checks
COMPOSITE_COORDS = 12

SUITE_SEGNET = SegNetConfig(stage_channels=(3, 4), out_channels=2)
SUITE_DEEPLAB = ASPPConfig(
    dilation_rates=(1, 2), branch_channels=2, entry_channels=3, output_stride=4, out_channels=2
)


@dataclass(frozen=True)
class GradCheckCase:
    name: str
    tol: float
    run: Callable[[np.random.Generator], GradCheckResult]


@dataclass(frozen=True)
class SuiteRow:
    name: str
    tol: float
    max_rel_error: float
    seeds: int
    passed: bool


def _rand(rng: np.random.Generator, *shape) -> np.ndarray:
    return rng.standard_normal(shape)


def _conv(rng):
    return grad_check(
        ops.Conv2d(stride=1, dilation=2, padding=2),
        [_rand(rng, 1, 2, 5, 5), _rand(rng, 3, 2, 3, 3), _rand(rng, 3)],
        rng=rng,
    )


def _maxpool(rng):
    return grad_check(ops.MaxPool2x2(), [_rand(rng, 1, 2, 6, 6)], rng=rng)


def _maxunpool(rng):
    _, idx = ops.maxpool2x2(_rand(rng, 1, 2, 6, 6))
    return grad_check(ops.MaxUnpool2x2(), [_rand(rng, 1, 2, 3, 3), idx], wrt=[0], rng=rng)


def _gap(rng):
    return grad_check(ops.GlobalAvgPool(), [_rand(rng, 2, 3, 4, 4)], rng=rng)


def _upsample(rng):
    return grad_check(ops.BilinearUpsample(2), [_rand(rng, 1, 2, 3, 4)], rng=rng)


def _resize(rng):
    return grad_check(ops.BilinearResize(7, 5), [_rand(rng, 1, 1, 4, 6)], rng=rng)


def _relu(rng):
    return grad_check(ops.ReLU(), [_rand(rng, 1, 2, 4, 4)], rng=rng)


def _sigmoid(rng):
    return grad_check(ops.Sigmoid(), [_rand(rng, 1, 2, 4, 4)], rng=rng)


def _concat(rng):
    return grad_check(ops.ConcatChannels(), [_rand(rng, 1, 2, 3, 3), _rand(rng, 1, 3, 3, 3)], rng=rng)


def _linear(rng):
    return grad_check(ops.Linear(), [_rand(rng, 2, 6), _rand(rng, 3, 6)], rng=rng)


def _channel_scale(rng):
    return grad_check(ops.ChannelScale(), [_rand(rng, 2, 3, 4, 4), _rand(rng, 2, 3)], rng=rng)


def _broadcast(rng):
    return grad_check(ops.BroadcastSpatial(3, 5), [_rand(rng, 2, 3, 1, 1)], rng=rng)


def _param_tensors(params: ParamStore, names: Sequence[str]) -> dict[str, np.ndarray]:
    return {name: params[name] for name in names}


def _branch_check(branch: Branch, name: str, rng: np.random.Generator) -> GradCheckResult:
    params = ParamStore()
    branch.init_params(params, rng)
    x = rng.uniform(0.0, 1.0, size=(1, 1, 16, 16))
    names = params.names()
    tensors = {"x": x, **_param_tensors(params, names)}

    def backward(dout):
        params.zero_grad()
        dx = branch.backward(dout, params)
        return {"x": dx, **{n: params.grad(n) for n in names}}

    return check_gradients(
        lambda: branch.forward(x, params),
        backward,
        tensors,
        name=name,
        tol=DEFAULT_TOL,
        max_coords=COMPOSITE_COORDS,
        rng=rng,
    )


def _segnet(rng):
    return _branch_check(SegNetBranch(SUITE_SEGNET), "segnet", rng)


def _deeplab(rng):
    return _branch_check(DeepLabBranch(SUITE_DEEPLAB), "deeplab", rng)


def _fusion(rng):
    cfg = FusionConfig(r=2)
    head = FusionHead(4, cfg.r, cfg.attention)
    params = ParamStore()
    head.init_params(params, rng)
    f_seg = rng.uniform(-0.5, 1.5, size=(2, 2, 6, 6))
    f_dl = rng.uniform(-0.5, 1.5, size=(2, 2, 6, 6))
    names = params.names()
    tensors = {"f_seg": f_seg, "f_dl": f_dl, **_param_tensors(params, names)}

    def backward(dout):
        params.zero_grad()
        d_seg, d_dl = head.backward(dout, params)
        return {"f_seg": d_seg, "f_dl": d_dl, **{n: params.grad(n) for n in names}}

    return check_gradients(
        lambda: head.forward([f_seg, f_dl], params),
        backward,
        tensors,
        name="fusion",
        tol=DEFAULT_TOL,
        max_coords=COMPOSITE_COORDS * 2,
        rng=rng,
    )


def _total_loss(rng):
    cfg = LossConfig()
    p = rng.uniform(0.05, 0.95, size=(2, 1, 4, 4))
    g = (rng.random((2, 1, 4, 4)) < 0.4).astype(np.float64)
    return check_gradients(
        lambda: np.asarray(total_loss(p, g, cfg)),
        lambda dout: {"p": float(dout) * total_loss_grad(p, g, cfg)},
        {"p": p},
        name="total_loss",
        tol=DEFAULT_TOL,
        rng=rng,
    )


OPERATOR_CASES: tuple[GradCheckCase, ...] = (
    GradCheckCase("conv2d", DEFAULT_TOL, _conv),
    GradCheckCase("maxpool2x2", DEFAULT_TOL, _maxpool),
    GradCheckCase("maxunpool2x2", SMOOTH_TOL, _maxunpool),
    GradCheckCase("global_avg_pool", SMOOTH_TOL, _gap),
    GradCheckCase("bilinear_upsample", SMOOTH_TOL, _upsample),
    GradCheckCase("bilinear_resize", SMOOTH_TOL, _resize),
    GradCheckCase("relu", DEFAULT_TOL, _relu),
    GradCheckCase("sigmoid", SMOOTH_TOL, _sigmoid),
    GradCheckCase("concat_channels", SMOOTH_TOL, _concat),
    GradCheckCase("linear", SMOOTH_TOL, _linear),
    GradCheckCase("channel_scale", SMOOTH_TOL, _channel_scale),
    GradCheckCase("broadcast_spatial", SMOOTH_TOL, _broadcast),
)

COMPOSITE_CASES: tuple[GradCheckCase, ...] = (
    GradCheckCase("segnet", DEFAULT_TOL, _segnet),
    GradCheckCase("deeplab", DEFAULT_TOL, _deeplab),
    GradCheckCase("fusion", DEFAULT_TOL, _fusion),
    GradCheckCase("total_loss", DEFAULT_TOL, _total_loss),
)

ALL_CASES = OPERATOR_CASES + COMPOSITE_CASES


def run_case(case: GradCheckCase, seeds: Sequence[int]) -> SuiteRow:
    worst = 0.0
    passed = True
    for seed in seeds:
        result = case.run(np.random.default_rng([seed, 7]))
        worst = max(worst, result.max_rel_error)
        if not result.passed(case.tol):
            passed = False
            logger.debug(
                "%s failed at seed %d: error=%.3e skipped=%d/%d",
                case.name,
                seed,
                result.max_rel_error,
                result.skipped_kinks,
                result.checked,
            )
    return SuiteRow(case.name, case.tol, worst, len(seeds), passed)


def run_gradcheck_suite(
    seeds: Sequence[int] = tuple(range(10)),
    cases: Sequence[GradCheckCase] = ALL_CASES,
    on_case: Callable[[SuiteRow], None] | None = None,
) -> list[SuiteRow]:
    rows = []
    for case in cases:
        row = run_case(case, seeds)
        rows.append(row)
        if on_case is not None:
            on_case(row)
    return rows

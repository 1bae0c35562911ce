import math

import numpy as np
import pytest

from spillseg.config.schema.models import TrainConfig
from spillseg.core.errors import ConfigError, NumericError
from spillseg.core.tensor import ParamStore
from spillseg.domain.training.optimizer import BETA1, BETA2, EPS, AdamState, adam_step
from spillseg.domain.training.schedule import cosine_lr

NO_DECAY = TrainConfig(weight_decay=0.0)


def _scalar_store(value: float) -> ParamStore:
    params = ParamStore()
    params.add("x", np.array([value]))
    return params


def test_first_step_moves_by_learning_rate():
    params = _scalar_store(0.0)
    params.accumulate("x", np.array([1.0]))

    adam_step(params, AdamState.zeros(params), 0.01, NO_DECAY)

    assert params["x"][0] == pytest.approx(-0.01 / (1.0 + 1e-8), abs=1e-15)


def test_zero_gradient_without_decay_leaves_parameter():
    params = _scalar_store(0.7)
    state = AdamState.zeros(params)

    for _ in range(3):
        adam_step(params, state, 0.1, NO_DECAY)

    assert params["x"][0] == 0.7


def test_quadratic_trajectory_matches_reference_adam():
    params = _scalar_store(1.0)
    state = AdamState.zeros(params)
    lr = 0.1

    x, m, v = 1.0, 0.0, 0.0
    for t in range(1, 6):
        g = x
        m = BETA1 * m + (1 - BETA1) * g
        v = BETA2 * v + (1 - BETA2) * g * g
        x -= lr * (m / (1 - BETA1**t)) / (math.sqrt(v / (1 - BETA2**t)) + EPS)

        params.zero_grad()
        params.accumulate("x", params["x"].copy())
        adam_step(params, state, lr, NO_DECAY)

        assert abs(params["x"][0] - x) < 1e-12


def test_coupled_decay_shrinks_toward_zero():
    params = _scalar_store(1.0)
    state = AdamState.zeros(params)
    cfg = TrainConfig(weight_decay=1e-2)

    previous = 1.0
    for _ in range(20):
        adam_step(params, state, 0.01, cfg)
        current = abs(params["x"][0])
        assert current < previous
        previous = current


def test_non_finite_gradient_rejects_step_untouched():
    params = ParamStore()
    params.add("a", np.ones(2))
    params.add("b", np.ones(2))
    params.accumulate("a", np.ones(2))
    params.accumulate("b", np.array([1.0, np.nan]))
    state = AdamState.zeros(params)

    with pytest.raises(NumericError, match="parameter b"):
        adam_step(params, state, 0.1, NO_DECAY)

    assert np.array_equal(params["a"], np.ones(2))
    assert state.step == 0


def test_cosine_schedule_endpoints_and_midpoint():
    cfg = TrainConfig(lr0=1e-3, lr_min=1e-4, epochs=5)

    assert cosine_lr(0, cfg) == 1e-3
    assert cosine_lr(4, cfg) == 1e-4
    assert cosine_lr(2, cfg) == pytest.approx((1e-3 + 1e-4) / 2)


def test_cosine_schedule_is_non_increasing():
    cfg = TrainConfig(epochs=50)

    rates = [cosine_lr(e, cfg) for e in range(cfg.epochs)]

    assert all(a >= b for a, b in zip(rates, rates[1:]))
    assert rates[0] == cfg.lr0
    assert rates[-1] == cfg.lr_min


def test_single_epoch_schedule_uses_initial_rate():
    assert cosine_lr(0, TrainConfig(epochs=1)) == 1e-4


@pytest.mark.parametrize("epoch", [-1, 5])
def test_cosine_schedule_rejects_out_of_range_epoch(epoch):
    with pytest.raises(ConfigError, match="outside"):
        cosine_lr(epoch, TrainConfig(epochs=5))

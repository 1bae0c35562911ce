import numpy as np
import pytest

from spillseg.config.schema.models import SegNetConfig
from spillseg.core.errors import ShapeError
from spillseg.core.gradcheck import check_gradients
from spillseg.core.tensor import ParamStore
from spillseg.models.segnet import SegNetBranch, segnet_decode, segnet_encode

CFG = SegNetConfig(stage_channels=(2, 4), out_channels=3)


def _branch_and_params(rng):
    branch = SegNetBranch(CFG)
    params = ParamStore()
    branch.init_params(params, rng)
    return branch, params


def test_parameter_layout(rng):
    _, params = _branch_and_params(rng)

    assert params["segnet.enc0.weight"].shape == (2, 1, 3, 3)
    assert params["segnet.enc1.weight"].shape == (4, 2, 3, 3)
    assert params["segnet.dec1.weight"].shape == (2, 4, 3, 3)
    assert params["segnet.dec0.weight"].shape == (2, 2, 3, 3)
    assert params["segnet.head.weight"].shape == (3, 2, 1, 1)
    assert all(name.startswith("segnet.") for name in params)


def test_forward_keeps_spatial_size(rng):
    branch, params = _branch_and_params(rng)

    y = branch.forward(rng.random((2, 1, 16, 12)), params)

    assert y.shape == (2, 3, 16, 12)
    assert np.all(np.isfinite(y))


def test_encode_returns_one_index_map_per_stage(rng):
    _, params = _branch_and_params(rng)

    bottleneck, indices = segnet_encode(rng.random((1, 1, 16, 16)), params, CFG)

    assert bottleneck.shape == (1, 4, 4, 4)
    assert [idx.input_hw for idx in indices] == [(16, 16), (8, 8)]


def test_unpooled_maps_are_zero_off_the_recorded_indices(rng):
    branch, params = _branch_and_params(rng)
    _, indices = branch.encode(rng.random((1, 1, 16, 16)), params)
    bottleneck = rng.random((1, 4, 4, 4)) + 0.1

    branch.decode(bottleneck, indices, params)

    # decoder runs deepest stage first
    for unpooled, idx in zip(branch.unpooled, reversed(indices)):
        n, c, h, w = unpooled.shape
        flat = unpooled.reshape(n, c, -1).copy()
        np.put_along_axis(flat, idx.indices.reshape(n, c, -1), 0.0, axis=2)
        assert not np.any(flat)
    first = branch.unpooled[0].reshape(1, 4, -1)
    kept = np.take_along_axis(first, indices[-1].indices.reshape(1, 4, -1), axis=2)
    assert np.array_equal(kept, bottleneck.reshape(1, 4, -1))


def test_decode_rejects_wrong_index_depth(rng):
    _, params = _branch_and_params(rng)
    _, indices = segnet_encode(rng.random((1, 1, 16, 16)), params, CFG)

    with pytest.raises(ShapeError, match="index stack depth"):
        segnet_decode(np.zeros((1, 4, 4, 4)), indices[:1], params, CFG)


def test_decode_rejects_wrong_bottleneck_channels(rng):
    _, params = _branch_and_params(rng)
    _, indices = segnet_encode(rng.random((1, 1, 16, 16)), params, CFG)

    with pytest.raises(ShapeError, match="bottleneck"):
        segnet_decode(np.zeros((1, 3, 4, 4)), indices, params, CFG)


def test_rejects_input_not_divisible_by_stage_count(rng):
    branch, params = _branch_and_params(rng)

    with pytest.raises(ShapeError, match="height 18"):
        branch.forward(np.zeros((1, 1, 18, 16)), params)


def test_rejects_multichannel_input(rng):
    branch, params = _branch_and_params(rng)

    with pytest.raises(ShapeError, match="channel"):
        branch.forward(np.zeros((1, 2, 16, 16)), params)


def test_backward_fills_every_parameter_gradient(rng):
    branch, params = _branch_and_params(rng)
    x = rng.random((1, 1, 8, 8))
    y = branch.forward(x, params)

    dx = branch.backward(np.ones_like(y), params)

    assert dx.shape == x.shape
    assert np.any(params.grad("segnet.head.weight"))
    assert np.any(params.grad("segnet.head.bias"))


def _zero_biases(params):
    for name in params:
        if name.endswith(".bias"):
            params.set(name, np.zeros_like(params[name]))


def test_zero_input_gives_zero_bottleneck(rng):
    _, params = _branch_and_params(rng)
    _zero_biases(params)

    bottleneck, _ = segnet_encode(np.zeros((1, 1, 16, 16)), params, CFG)

    assert not np.any(bottleneck)


def test_zero_bottleneck_decodes_to_zero(rng):
    _, params = _branch_and_params(rng)
    _zero_biases(params)
    _, indices = segnet_encode(rng.random((1, 1, 16, 16)), params, CFG)

    y = segnet_decode(np.zeros((1, 4, 4, 4)), indices, params, CFG)

    assert y.shape == (1, 3, 16, 16)
    assert not np.any(y)


def test_backward_reaches_the_first_encoder_stage(rng):
    branch, params = _branch_and_params(rng)
    x = rng.uniform(0.0, 1.0, size=(1, 1, 16, 16))
    names = ["segnet.enc0.weight", "segnet.dec0.weight"]

    def backward(dout):
        params.zero_grad()
        dx = branch.backward(dout, params)
        return {"x": dx, **{name: params.grad(name) for name in names}}

    result = check_gradients(
        lambda: branch.forward(x, params),
        backward,
        {"x": x, **{name: params[name] for name in names}},
        name="segnet",
        max_coords=40,
        rng=rng,
    )

    assert result.passed(1e-4)
    assert np.any(params.grad("segnet.enc0.weight"))

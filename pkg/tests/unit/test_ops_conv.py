import numpy as np
import pytest

from spillseg.core import ops
from spillseg.core.errors import ShapeError


def _direct_conv(x, w, b, stride=1, dilation=1, padding=0):
    n, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = (h + 2 * padding - dilation * (kh - 1) - 1) // stride + 1
    wo = (wd + 2 * padding - dilation * (kw - 1) - 1) // stride + 1
    out = np.zeros((n, cout, ho, wo))
    for i in range(n):
        for co in range(cout):
            for r in range(ho):
                for c in range(wo):
                    acc = b[co]
                    for ci in range(cin):
                        for a in range(kh):
                            for bb in range(kw):
                                acc += (
                                    xp[i, ci, r * stride + a * dilation, c * stride + bb * dilation]
                                    * w[co, ci, a, bb]
                                )
                    out[i, co, r, c] = acc
    return out


def test_identity_kernel_returns_input():
    x = np.ones((1, 1, 3, 3))
    w = np.zeros((1, 1, 3, 3))
    w[0, 0, 1, 1] = 1.0

    y = ops.conv2d(x, w, np.zeros(1), padding=1)

    assert np.array_equal(y, x)


def test_dilated_all_ones_kernel_sums_nine_ones():
    y = ops.conv2d(np.ones((1, 1, 5, 5)), np.ones((1, 1, 3, 3)), np.zeros(1), dilation=2)

    assert y.shape == (1, 1, 1, 1)
    assert y[0, 0, 0, 0] == 9.0


def test_conv_matches_nested_loop_oracle(rng):
    x = rng.standard_normal((2, 3, 8, 8))
    w = rng.standard_normal((4, 3, 3, 3))
    b = rng.standard_normal(4)

    y = ops.conv2d(x, w, b, padding=1)

    assert y.shape == (2, 4, 8, 8)
    assert np.max(np.abs(y - _direct_conv(x, w, b, padding=1))) < 1e-12


@pytest.mark.parametrize("stride,dilation,padding", [(2, 1, 1), (1, 3, 3), (2, 2, 0)])
def test_conv_strided_and_dilated_match_oracle(rng, stride, dilation, padding):
    x = rng.standard_normal((1, 2, 9, 7))
    w = rng.standard_normal((3, 2, 3, 3))
    b = rng.standard_normal(3)

    y = ops.conv2d(x, w, b, stride=stride, dilation=dilation, padding=padding)

    assert np.max(np.abs(y - _direct_conv(x, w, b, stride, dilation, padding))) < 1e-12


def test_dilation_equals_zero_inflated_kernel(rng):
    x = rng.standard_normal((1, 2, 10, 10))
    w = rng.standard_normal((3, 2, 3, 3))
    b = rng.standard_normal(3)
    inflated = np.zeros((3, 2, 5, 5))
    inflated[:, :, ::2, ::2] = w

    dilated = ops.conv2d(x, w, b, dilation=2, padding=2)
    plain = ops.conv2d(x, inflated, b, dilation=1, padding=2)

    assert np.max(np.abs(dilated - plain)) < 1e-12


def test_output_size_formula():
    conv = ops.Conv2d(stride=2, dilation=2, padding=1)

    assert conv.output_size(16, 15, 3, 3) == ((16 + 2 - 4 - 1) // 2 + 1, (15 + 2 - 4 - 1) // 2 + 1)


def test_conv_rejects_channel_mismatch():
    with pytest.raises(ShapeError, match="channel"):
        ops.conv2d(np.zeros((1, 2, 5, 5)), np.zeros((1, 3, 3, 3)), np.zeros(1))


def test_conv_rejects_even_kernel():
    with pytest.raises(ShapeError, match="odd"):
        ops.conv2d(np.zeros((1, 1, 5, 5)), np.zeros((1, 1, 2, 2)), np.zeros(1))


def test_conv_rejects_bias_length():
    with pytest.raises(ShapeError, match="bias"):
        ops.conv2d(np.zeros((1, 1, 5, 5)), np.zeros((2, 1, 3, 3)), np.zeros(3))


def test_conv_rejects_kernel_larger_than_padded_input():
    with pytest.raises(ShapeError, match="height"):
        ops.conv2d(np.zeros((1, 1, 3, 9)), np.zeros((1, 1, 3, 3)), np.zeros(1), dilation=2)


def test_conv_backward_shapes(rng):
    conv = ops.Conv2d(stride=2, padding=1)
    x = rng.standard_normal((2, 3, 8, 8))
    w = rng.standard_normal((4, 3, 3, 3))
    y = conv.forward(x, w, np.zeros(4))

    dx, dw, db = conv.backward(np.ones_like(y))

    assert dx.shape == x.shape
    assert dw.shape == w.shape
    assert db.shape == (4,)
    assert np.all(db == y.shape[0] * y.shape[2] * y.shape[3])

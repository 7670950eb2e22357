import numpy as np
import pytest

from stylenas import nn
from stylenas.errors import DimensionError

from oracles import conv3x3_loops, directional_grad_check


def random_layer(rng, c_in, c_out, scale=0.5):
    return nn.ConvLayer(
        weights=scale * rng.standard_normal((c_out, c_in, 3, 3)).astype(np.float32),
        bias=scale * rng.standard_normal(c_out).astype(np.float32),
    )


def identity_layer(channels):
    w = np.zeros((channels, channels, 3, 3), np.float32)
    for c in range(channels):
        w[c, c, 1, 1] = 1.0
    return nn.ConvLayer(weights=w, bias=np.zeros(channels, np.float32))


# --- convolution -----------------------------------------------------------


def test_conv_identity_kernel():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, (3, 5, 6)).astype(np.float32)
    assert np.array_equal(nn.conv_forward(identity_layer(3), x), x)


def test_conv_zero_weights_give_bias_map():
    layer = nn.ConvLayer(
        weights=np.zeros((2, 3, 3, 3), np.float32), bias=np.array([0.5, -1.0], np.float32)
    )
    y = nn.conv_forward(layer, np.ones((3, 4, 4), np.float32))
    assert np.array_equal(y[0], np.full((4, 4), 0.5, np.float32))
    assert np.array_equal(y[1], np.full((4, 4), -1.0, np.float32))


def test_conv_matches_loop_oracle():
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 1, (2, 4, 4)).astype(np.float32)
    layer = random_layer(rng, 2, 3)
    y = nn.conv_forward(layer, x)
    ref = conv3x3_loops(x, layer.weights, layer.bias)
    assert np.abs(y - ref).max() < 1e-5


def test_conv_channel_mismatch():
    rng = np.random.default_rng(2)
    layer = random_layer(rng, 2, 3)
    with pytest.raises(DimensionError):
        nn.conv_forward(layer, np.zeros((4, 4, 4), np.float32))


def test_conv_linearity_in_input():
    rng = np.random.default_rng(3)
    layer = random_layer(rng, 3, 2)
    x, y = (rng.uniform(-1, 1, (3, 6, 6)).astype(np.float32) for _ in range(2))
    a, b = 0.7, -1.3
    bias_map = nn.conv_forward(layer, np.zeros_like(x))
    lhs = nn.conv_forward(layer, a * x + b * y)
    rhs = a * nn.conv_forward(layer, x) + b * nn.conv_forward(layer, y) - (a + b - 1) * bias_map
    assert np.abs(lhs - rhs).max() < 1e-4


def test_conv_backward_zero_grad():
    rng = np.random.default_rng(4)
    layer = random_layer(rng, 2, 2)
    x = rng.uniform(-1, 1, (2, 4, 4)).astype(np.float32)
    gx, gw, gb = nn.conv_backward(layer, x, np.zeros((2, 4, 4), np.float32))
    assert not gx.any() and not gw.any() and not gb.any()


def test_conv_backward_1x1_identity():
    go = np.array([[[2.5]], [[-1.0]]], np.float32)
    x = np.array([[[0.3]], [[0.7]]], np.float32)
    gx, _, _ = nn.conv_backward(identity_layer(2), x, go)
    assert np.array_equal(gx, go)


def test_conv_backward_finite_differences():
    rng = np.random.default_rng(5)
    layer = random_layer(rng, 2, 3)
    x = rng.uniform(-1, 1, (2, 4, 4)).astype(np.float32)
    u = rng.standard_normal((3, 4, 4))
    gx, gw, gb = nn.conv_backward(layer, x, u.astype(np.float32))

    def loss_x(xv):
        return float((nn.conv_forward(layer, xv).astype(np.float64) * u).sum())

    directional_grad_check(loss_x, x, gx, rng, probes=20)

    def loss_w(wv):
        probe = nn.ConvLayer(weights=wv, bias=layer.bias)
        return float((nn.conv_forward(probe, x).astype(np.float64) * u).sum())

    directional_grad_check(loss_w, layer.weights, gw, rng, probes=20)

    def loss_b(bv):
        probe = nn.ConvLayer(weights=layer.weights, bias=bv)
        return float((nn.conv_forward(probe, x).astype(np.float64) * u).sum())

    directional_grad_check(loss_b, layer.bias, gb, rng, probes=10)


# --- relu -------------------------------------------------------------------


def test_relu_basic():
    assert np.array_equal(
        nn.relu(np.array([-1.0, 0.0, 2.0], np.float32)), np.array([0.0, 0.0, 2.0], np.float32)
    )


def test_relu_all_negative():
    x = -np.abs(np.random.default_rng(6).standard_normal((2, 3, 3))).astype(np.float32) - 0.1
    assert not nn.relu(x).any()
    assert not nn.relu_backward(x, np.ones_like(x)).any()


def test_relu_finite_differences_away_from_zero():
    rng = np.random.default_rng(7)
    x = rng.uniform(-1, 1, (3, 5, 5)).astype(np.float32)
    x[np.abs(x) <= 1e-2] = 0.5
    u = rng.standard_normal(x.shape)
    g = nn.relu_backward(x, u.astype(np.float32))

    def loss(xv):
        return float((nn.relu(xv).astype(np.float64) * u).sum())

    directional_grad_check(loss, x, g, rng, probes=30, skip_if=np.abs(x) <= 1e-2)


# --- pooling / upsampling ---------------------------------------------------


def test_maxpool_constant_map():
    x = np.full((1, 4, 4), 3.0, np.float32)
    rec = nn.maxpool2(x)
    assert np.array_equal(rec.pooled, np.full((1, 2, 2), 3.0, np.float32))
    # ties break toward the window-first (smallest flat index) cell
    assert np.array_equal(rec.argmax_indices[0], np.array([[0, 2], [8, 10]]))
    up = nn.unpool(rec)
    expected = np.zeros((1, 4, 4), np.float32)
    expected[0, ::2, ::2] = 3.0
    assert np.array_equal(up, expected)


def test_maxpool_2x2_single_window():
    x = np.array([[[1.0, 2.0], [3.0, 4.0]]], np.float32)
    rec = nn.maxpool2(x)
    assert rec.pooled[0, 0, 0] == 4.0
    assert rec.argmax_indices[0, 0, 0] == 3


def test_maxpool_odd_dims_rejected():
    with pytest.raises(DimensionError):
        nn.maxpool2(np.zeros((1, 3, 4), np.float32))


def test_unpool_preserves_window_maxima():
    rng = np.random.default_rng(8)
    x = rng.uniform(0, 1, (3, 4, 4)).astype(np.float32)
    rec = nn.maxpool2(x)
    up = nn.unpool(rec)
    for c in range(3):
        for i in range(2):
            for j in range(2):
                win = x[c, 2 * i : 2 * i + 2, 2 * j : 2 * j + 2]
                uwin = up[c, 2 * i : 2 * i + 2, 2 * j : 2 * j + 2]
                assert uwin.max() == win.max()
                assert (uwin != 0).sum() == 1
    assert (up <= x + 1e-7).all()


def test_argmax_indices_stay_in_window():
    rng = np.random.default_rng(9)
    x = rng.standard_normal((2, 6, 8)).astype(np.float32)
    rec = nn.maxpool2(x)
    c, h, w = x.shape
    for ci in range(c):
        for i in range(h // 2):
            for j in range(w // 2):
                idx = rec.argmax_indices[ci, i, j]
                r, cc = divmod(int(idx), w)
                assert 2 * i <= r < 2 * i + 2
                assert 2 * j <= cc < 2 * j + 2


def test_upsample_nearest_duplicates_blocks():
    x = np.array([[[1.0, 2.0], [3.0, 4.0]]], np.float32)
    up = nn.upsample_nearest(x)
    assert np.array_equal(
        up[0],
        np.array(
            [[1, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4]], np.float32
        ),
    )


def test_upsample_backward_is_block_sum():
    rng = np.random.default_rng(10)
    x = rng.uniform(-1, 1, (2, 3, 3)).astype(np.float32)
    u = rng.standard_normal((2, 6, 6))
    g = nn.upsample_nearest_backward(u.astype(np.float32))

    def loss(xv):
        return float((nn.upsample_nearest(xv).astype(np.float64) * u).sum())

    directional_grad_check(loss, x, g, rng, probes=20)


# --- instance norm -----------------------------------------------------------


def test_instance_norm_constant_channel_is_zero():
    x = np.full((2, 3, 3), 7.0, np.float32)
    assert np.abs(nn.instance_norm(x)).max() < 1e-4


def test_instance_norm_unit_variance_pair():
    x = np.array([[[-1.0, 1.0]]], np.float32)
    expected = x / np.sqrt(np.float32(1.0 + 1e-5))
    assert np.abs(nn.instance_norm(x) - expected).max() < 1e-6


def test_instance_norm_moments():
    rng = np.random.default_rng(11)
    x = rng.uniform(-2, 2, (4, 8, 8)).astype(np.float32)
    y = nn.instance_norm(x)
    assert np.abs(y.mean(axis=(1, 2))).max() < 1e-5
    assert np.abs(y.var(axis=(1, 2)) - 1).max() < 1e-3


def test_instance_norm_idempotent():
    rng = np.random.default_rng(12)
    x = rng.uniform(-2, 2, (3, 6, 6)).astype(np.float32)
    once = nn.instance_norm(x)
    twice = nn.instance_norm(once)
    assert np.abs(twice - once).max() < 1e-3


def test_instance_norm_finite_differences():
    rng = np.random.default_rng(13)
    x = rng.uniform(-1, 1, (2, 4, 4)).astype(np.float32)
    u = rng.standard_normal(x.shape)
    g = nn.instance_norm_backward(x, u.astype(np.float32))

    def loss(xv):
        return float((nn.instance_norm(xv).astype(np.float64) * u).sum())

    directional_grad_check(loss, x, g, rng, probes=30)


# --- concat / sum / resize ---------------------------------------------------


def test_concat_shapes_and_roundtrip():
    rng = np.random.default_rng(14)
    a = rng.standard_normal((2, 4, 4)).astype(np.float32)
    b = rng.standard_normal((3, 4, 4)).astype(np.float32)
    y = nn.concat_channels([a, b])
    assert y.shape == (5, 4, 4)
    ra, rb = nn.split_channels(y, [2, 3])
    assert np.array_equal(ra, a) and np.array_equal(rb, b)


def test_concat_spatial_mismatch():
    with pytest.raises(DimensionError):
        nn.concat_channels([np.zeros((1, 4, 4), np.float32), np.zeros((1, 4, 5), np.float32)])


def test_sum_maps_cancellation():
    rng = np.random.default_rng(15)
    x = rng.standard_normal((2, 3, 3)).astype(np.float32)
    assert not nn.sum_maps([x, -x]).any()


def test_resize_same_size_is_identity():
    rng = np.random.default_rng(16)
    x = rng.standard_normal((2, 5, 7)).astype(np.float32)
    assert np.array_equal(nn.resize_nearest(x, 5, 7), x)


def test_resize_up_duplicates():
    x = np.array([[[1.0, 2.0], [3.0, 4.0]]], np.float32)
    assert np.array_equal(nn.resize_nearest(x, 4, 4), nn.upsample_nearest(x))


def test_resize_down_picks_floor_indices():
    x = np.arange(16, dtype=np.float32).reshape(1, 4, 4)
    y = nn.resize_nearest(x, 2, 2)
    assert np.array_equal(y[0], np.array([[0.0, 2.0], [8.0, 10.0]]))


def test_resize_backward_is_adjoint():
    rng = np.random.default_rng(17)
    x = rng.uniform(-1, 1, (2, 4, 6)).astype(np.float32)
    u = rng.standard_normal((2, 7, 3))
    g = nn.resize_nearest_backward(u.astype(np.float32), 4, 6)

    def loss(xv):
        return float((nn.resize_nearest(xv, 7, 3).astype(np.float64) * u).sum())

    directional_grad_check(loss, x, g, rng, probes=20)


# --- randomized gradient sweep over the op set -------------------------------


@pytest.mark.parametrize("shape", [(1, 2, 2), (2, 4, 4), (4, 8, 8)])
def test_gradient_sweep(shape):
    rng = np.random.default_rng(hash(shape) % 2**32)
    x = rng.uniform(-1, 1, shape).astype(np.float32)
    u = rng.standard_normal(shape)

    cases = []

    layer = random_layer(rng, shape[0], shape[0])
    u_conv = rng.standard_normal(shape)
    cases.append(
        (
            lambda xv: float((nn.conv_forward(layer, xv).astype(np.float64) * u_conv).sum()),
            nn.conv_backward(layer, x, u_conv.astype(np.float32))[0],
            None,
        )
    )
    cases.append(
        (
            lambda xv: float((nn.instance_norm(xv).astype(np.float64) * u).sum()),
            nn.instance_norm_backward(x, u.astype(np.float32)),
            None,
        )
    )
    x_relu = x.copy()
    x_relu[np.abs(x_relu) <= 2e-2] = 0.5
    cases.append(
        (
            lambda xv: float((nn.relu(xv).astype(np.float64) * u).sum()),
            nn.relu_backward(x_relu, u.astype(np.float32)),
            ("relu", x_relu),
        )
    )

    for loss, grad, special in cases:
        if special is not None:
            _, xs = special
            directional_grad_check(loss, xs, grad, rng, probes=17, skip_if=np.abs(xs) <= 2e-2)
        else:
            directional_grad_check(loss, x, grad, rng, probes=17)


def test_maxpool_gradient_via_unpool():
    rng = np.random.default_rng(18)
    x = rng.uniform(-1, 1, (2, 4, 4)).astype(np.float32)
    # separate the per-window max from the runner-up so probes stay on the
    # smooth branch
    x += np.linspace(0, 0.5, x.size).reshape(x.shape).astype(np.float32)
    rec = nn.maxpool2(x)
    u = rng.standard_normal(rec.pooled.shape)
    g = nn.unpool(rec, u.astype(np.float32))

    def loss(xv):
        return float((nn.maxpool2(xv).pooled.astype(np.float64) * u).sum())

    directional_grad_check(loss, x, g, rng, probes=20, step=1e-4)

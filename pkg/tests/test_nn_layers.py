import numpy as np
import numpy.testing as npt
import pytest

from tumorkit.errors import ConfigError, ShapeError
from tumorkit.nn import (
    BatchNorm,
    Conv2D,
    Dense,
    Flatten,
    GlobalAvgPool,
    MaxPool2D,
    ReLU,
    ResidualBlock,
    bce_loss,
    build_network,
    expected_param_count,
    relu,
    sigmoid,
)
from tumorkit.nn.network import RESNET_MINI_LAYERS


def conv_oracle(x, weights, bias, stride, padding):
    """Direct six-loop cross-correlation with zero padding (NHWC)."""
    n, h, w, cin = x.shape
    kh, kw, _, cout = weights.shape
    xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding), (0, 0)))
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (w + 2 * padding - kw) // stride + 1
    out = np.zeros((n, oh, ow, cout))
    for b in range(n):
        for oy in range(oh):
            for ox in range(ow):
                for oc in range(cout):
                    acc = bias[oc]
                    for ky in range(kh):
                        for kx in range(kw):
                            for ic in range(cin):
                                acc += (
                                    weights[ky, kx, ic, oc]
                                    * xp[b, oy * stride + ky, ox * stride + kx, ic]
                                )
                    out[b, oy, ox, oc] = acc
    return out


# -- conv -----------------------------------------------------------------

def test_conv_1x1_identity(rng):
    conv = Conv2D(1, 1, kernel=1)
    conv.weights[...] = 1.0
    conv.bias[...] = 0.0
    x = rng.random((2, 5, 5, 1))
    npt.assert_allclose(conv.forward(x), x, atol=1e-15)


def test_conv_all_ones_on_constant():
    conv = Conv2D(1, 1, kernel=3, padding=1)
    conv.weights[...] = 1.0
    conv.bias[...] = 0.0
    c = 0.6
    out = conv.forward(np.full((1, 6, 6, 1), c))
    npt.assert_allclose(out[0, 1:-1, 1:-1, 0], np.full((4, 4), 9 * c), atol=1e-12)


@pytest.mark.parametrize("stride,padding", [(1, 0), (1, 1), (2, 1)])
def test_conv_matches_six_loop_oracle(rng, stride, padding):
    conv = Conv2D(2, 3, kernel=3, stride=stride, padding=padding, rng=rng)
    x = rng.random((1, 8, 8, 2))
    npt.assert_allclose(
        conv.forward(x),
        conv_oracle(x, conv.weights, conv.bias, stride, padding),
        atol=1e-10,
    )


def test_conv_rejects_channel_mismatch(rng):
    conv = Conv2D(3, 4, kernel=3)
    with pytest.raises(ShapeError):
        conv.forward(rng.random((1, 8, 8, 2)))


# -- batch norm -------------------------------------------------------------

def test_batchnorm_passthrough_for_normalized_batch(rng):
    bn = BatchNorm(3, epsilon=1e-12)
    x = rng.standard_normal((400, 3))
    x = (x - x.mean(axis=0)) / x.std(axis=0)
    npt.assert_allclose(bn.forward(x, training=True), x, atol=1e-5)


def test_batchnorm_gamma_zero_outputs_beta(rng):
    bn = BatchNorm(2)
    bn.gamma[...] = 0.0
    bn.beta[...] = np.array([1.5, -0.5])
    out = bn.forward(rng.random((4, 6, 6, 2)), training=True)
    npt.assert_allclose(out[..., 0], 1.5, atol=1e-12)
    npt.assert_allclose(out[..., 1], -0.5, atol=1e-12)


def test_batchnorm_normalizes_per_channel(rng):
    bn = BatchNorm(4, epsilon=1e-10)
    x = rng.random((8, 5, 5, 4)) * 3 + 1
    out = bn.forward(x, training=True)
    npt.assert_allclose(out.mean(axis=(0, 1, 2)), 0.0, atol=1e-6)
    npt.assert_allclose(out.var(axis=(0, 1, 2)), 1.0, atol=1e-4)


def test_batchnorm_running_stats_feed_inference(rng):
    bn = BatchNorm(2, momentum=0.0)  # running stats jump straight to batch stats
    x = rng.random((16, 2)) * 2
    bn.forward(x, training=True)
    npt.assert_allclose(bn.running_mean, x.mean(axis=0), atol=1e-12)
    npt.assert_allclose(bn.running_var, x.var(axis=0), atol=1e-12)
    train_out = bn.forward(x, training=True)
    infer_out = bn.forward(x, training=False)
    npt.assert_allclose(infer_out, train_out, atol=1e-6)


# -- simple layers ------------------------------------------------------------

def test_relu_values():
    out = relu(np.array([-1.0, 0.0, 2.0]))
    npt.assert_array_equal(out, [0.0, 0.0, 2.0])


def test_maxpool_2x2():
    pool = MaxPool2D(2, 2)
    x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 2, 2, 1)
    npt.assert_array_equal(pool.forward(x), [[[[4.0]]]])


def test_maxpool_matches_window_oracle(rng):
    pool = MaxPool2D(2, 2)
    x = rng.random((2, 6, 6, 3))
    out = pool.forward(x)
    for b in range(2):
        for oy in range(3):
            for ox in range(3):
                for c in range(3):
                    window = x[b, 2 * oy : 2 * oy + 2, 2 * ox : 2 * ox + 2, c]
                    assert out[b, oy, ox, c] == window.max()


def test_maxpool_rejects_oversized_window(rng):
    with pytest.raises(ShapeError):
        MaxPool2D(4, 4).forward(rng.random((1, 3, 3, 1)))


def test_global_avg_pool(rng):
    x = rng.random((2, 4, 6, 3))
    out = GlobalAvgPool().forward(x)
    assert out.shape == (2, 1, 1, 3)
    npt.assert_allclose(out[:, 0, 0, :], x.mean(axis=(1, 2)), atol=1e-12)


def test_flatten_roundtrip(rng):
    x = rng.random((3, 2, 2, 4))
    flat = Flatten()
    out = flat.forward(x)
    assert out.shape == (3, 16)
    npt.assert_array_equal(flat.backward(out), x)


def test_sigmoid_values():
    assert sigmoid(np.array([0.0]))[0] == 0.5
    out = sigmoid(np.array([-800.0, 800.0]))
    assert 0.0 < out[0] < 1e-300 or out[0] == 0.0  # saturates without overflow warnings
    assert out[1] <= 1.0


def test_dense_matches_matmul(rng):
    dense = Dense(4, 3, rng=rng)
    x = rng.random((5, 4))
    npt.assert_allclose(dense.forward(x), x @ dense.weights + dense.bias, atol=1e-12)


def test_dense_sigmoid_output_in_open_interval(rng):
    dense = Dense(4, 1, activation="sigmoid", rng=rng)
    out = dense.forward(rng.standard_normal((20, 4)) * 5)
    assert np.all(out > 0.0) and np.all(out < 1.0)


# -- residual block -----------------------------------------------------------

def _zeroed_block(channels, rng):
    inner = [
        Conv2D(channels, channels, kernel=3, padding=1, rng=rng),
        BatchNorm(channels),
        ReLU(),
        Conv2D(channels, channels, kernel=3, padding=1, rng=rng),
        BatchNorm(channels),
    ]
    for conv in (inner[0], inner[3]):
        conv.weights[...] = 0.0
        conv.bias[...] = 0.0
    return ResidualBlock(inner)


def test_residual_zero_inner_path_is_relu(rng):
    block = _zeroed_block(2, rng)
    x = rng.standard_normal((2, 6, 6, 2))
    npt.assert_allclose(block.forward(x, training=True), relu(x), atol=1e-12)


def test_residual_zero_input_gives_zero(rng):
    block = _zeroed_block(2, rng)
    x = np.zeros((1, 4, 4, 2))
    npt.assert_array_equal(block.forward(x, training=True), x)


def test_residual_matches_hand_composition(rng):
    conv1 = Conv2D(2, 2, kernel=3, padding=1, rng=rng)
    bn1 = BatchNorm(2)
    conv2 = Conv2D(2, 2, kernel=3, padding=1, rng=rng)
    bn2 = BatchNorm(2)
    block = ResidualBlock([conv1, bn1, ReLU(), conv2, bn2])
    x = rng.random((2, 5, 5, 2))
    got = block.forward(x, training=True)
    manual = relu(bn2.forward(conv2.forward(relu(bn1.forward(conv1.forward(x), True))), True) + x)
    npt.assert_allclose(got, manual, atol=1e-10)


def test_residual_rejects_shape_change_without_projection(rng):
    inner = [Conv2D(2, 4, kernel=3, padding=1, rng=rng)]
    block = ResidualBlock(inner)
    with pytest.raises(ShapeError):
        block.forward(rng.random((1, 4, 4, 2)), training=True)


# -- bce loss -------------------------------------------------------------------

def test_bce_perfect_prediction_near_zero():
    assert bce_loss(np.array([1.0]), np.array([1.0])) <= 1.2e-7


def test_bce_coin_flip_is_ln2():
    assert bce_loss(np.array([0.5]), np.array([1.0])) == pytest.approx(np.log(2), abs=1e-12)


def test_bce_batch_mean():
    p = np.array([0.5, 0.5])
    y = np.array([1.0, 0.0])
    assert bce_loss(p, y) == pytest.approx(np.log(2), abs=1e-12)


def test_bce_nonnegative(rng):
    p = rng.random(50)
    y = (rng.random(50) > 0.5).astype(float)
    assert bce_loss(p, y) >= 0.0


def test_bce_rejects_shape_mismatch():
    with pytest.raises(ShapeError):
        bce_loss(np.zeros(3), np.zeros(4))


# -- assembly ---------------------------------------------------------------------

def test_param_count_matches_closed_form():
    net = build_network((64, 64, 1), RESNET_MINI_LAYERS, seed=0)
    assert net.param_count() == expected_param_count((64, 64, 1), RESNET_MINI_LAYERS)


def test_param_count_small_custom_net():
    layers = [
        {"type": "conv", "out_channels": 4, "kernel": 3, "padding": 1},
        {"type": "batchnorm"},
        {"type": "relu"},
        {"type": "flatten"},
        {"type": "dense", "units": 2},
    ]
    net = build_network((6, 6, 1), layers, seed=1)
    # conv 3*3*1*4+4, bn 2*4, dense 6*6*4*2+2
    assert net.param_count() == 40 + 8 + 290
    assert expected_param_count((6, 6, 1), layers) == net.param_count()


def test_network_forward_shape_and_range(rng):
    net = build_network((16, 16, 1), RESNET_MINI_LAYERS, seed=2)
    out = net.forward(rng.random((3, 16, 16, 1)))
    assert out.shape == (3, 1)
    assert np.all(out > 0) and np.all(out < 1)


def test_network_rejects_wrong_input_shape(rng):
    net = build_network((16, 16, 1), RESNET_MINI_LAYERS, seed=2)
    with pytest.raises(ShapeError):
        net.forward(rng.random((3, 8, 8, 1)))


def test_network_backward_before_forward_raises():
    net = build_network((16, 16, 1), RESNET_MINI_LAYERS, seed=2)
    with pytest.raises(RuntimeError):
        net.backward(np.zeros((1, 1)))


def test_build_rejects_unknown_layer():
    with pytest.raises(ConfigError):
        build_network((8, 8, 1), [{"type": "dropout"}], seed=0)

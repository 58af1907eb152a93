"""Central finite-difference checks for every layer's backward pass."""

import numpy as np
import numpy.testing as npt
import pytest

from tumorkit.nn import (
    BatchNorm,
    Conv2D,
    Dense,
    GlobalAvgPool,
    MaxPool2D,
    ResidualBlock,
    ReLU,
    bce_loss,
    bce_loss_grad,
    build_network,
)

STEP = 1e-4
TOL = 1e-3
# gradients that are structurally zero (e.g. conv bias feeding batch norm)
# sit below finite differencing's own rounding noise; treat differences
# under this floor as agreement
ABS_FLOOR = 1e-7

TINY_NET = [
    {"type": "conv", "out_channels": 2, "kernel": 3, "stride": 1, "padding": 1},
    {"type": "batchnorm"},
    {"type": "relu"},
    {"type": "maxpool", "size": 2, "stride": 2},
    {"type": "residual", "channels": 4, "stride": 2, "projection": True},
    {"type": "globalavgpool"},
    {"type": "flatten"},
    {"type": "dense", "units": 8, "activation": "relu"},
    {"type": "dense", "units": 1, "activation": "sigmoid"},
]


def rel_err(a, b):
    if abs(a - b) <= ABS_FLOOR:
        return 0.0
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


def check_layer_grads(layer, x, rng, params=True, check_input=True, samples=8):
    """Compare backward() against central differences of a projected loss."""
    projection = rng.standard_normal(layer.forward(x, training=True).shape)

    def loss():
        return float((layer.forward(x, training=True) * projection).sum())

    layer.forward(x, training=True)
    dx = layer.backward(projection)
    worst = 0.0
    if params:
        analytic = {k: v.copy() for k, v in layer.grads().items()}
        for name, arr in layer.params().items():
            flat = arr.ravel()
            picks = rng.choice(flat.size, size=min(samples, flat.size), replace=False)
            for idx in picks:
                orig = flat[idx]
                flat[idx] = orig + STEP
                up = loss()
                flat[idx] = orig - STEP
                down = loss()
                flat[idx] = orig
                worst = max(worst, rel_err((up - down) / (2 * STEP), analytic[name].ravel()[idx]))
    if check_input:
        flat = x.ravel()
        picks = rng.choice(flat.size, size=min(samples, flat.size), replace=False)
        for idx in picks:
            orig = flat[idx]
            flat[idx] = orig + STEP
            up = loss()
            flat[idx] = orig - STEP
            down = loss()
            flat[idx] = orig
            worst = max(worst, rel_err((up - down) / (2 * STEP), dx.ravel()[idx]))
    assert worst < TOL, f"finite-difference mismatch: {worst}"


def test_conv_gradients(rng):
    layer = Conv2D(2, 3, kernel=3, stride=2, padding=1, rng=rng)
    check_layer_grads(layer, rng.random((2, 7, 7, 2)), rng)


def test_batchnorm_gradients(rng):
    layer = BatchNorm(3)
    check_layer_grads(layer, rng.random((4, 5, 5, 3)) * 2, rng)


def test_dense_gradients(rng):
    for activation in ("none", "relu", "sigmoid"):
        layer = Dense(6, 4, activation=activation, rng=rng)
        check_layer_grads(layer, rng.standard_normal((5, 6)), rng)


def test_maxpool_input_gradients(rng):
    layer = MaxPool2D(2, 2)
    check_layer_grads(layer, rng.random((2, 6, 6, 2)), rng, params=False)


def test_global_avg_pool_input_gradients(rng):
    layer = GlobalAvgPool()
    check_layer_grads(layer, rng.random((2, 4, 4, 3)), rng, params=False)


def test_relu_input_gradients(rng):
    layer = ReLU()
    check_layer_grads(layer, rng.standard_normal((3, 4, 4, 2)) + 0.05, rng, params=False)


def test_residual_block_gradients(rng):
    inner = [
        Conv2D(2, 2, kernel=3, stride=1, padding=1, rng=rng),
        BatchNorm(2),
        ReLU(),
        Conv2D(2, 2, kernel=3, stride=1, padding=1, rng=rng),
        BatchNorm(2),
    ]
    block = ResidualBlock(inner)
    check_layer_grads(block, rng.random((2, 6, 6, 2)), rng)


def test_residual_projection_gradients(rng):
    inner = [
        Conv2D(2, 3, kernel=3, stride=2, padding=1, rng=rng),
        BatchNorm(3),
    ]
    block = ResidualBlock(inner, projection=Conv2D(2, 3, kernel=1, stride=2, rng=rng))
    check_layer_grads(block, rng.random((2, 8, 8, 2)), rng)


def composed_net_check(seed, samples=6):
    """End-to-end BCE gradient check on the tiny residual network."""
    rng = np.random.default_rng(seed)
    net = build_network((8, 8, 1), TINY_NET, seed=seed)
    x = rng.random((3, 8, 8, 1))
    y = np.array([[1.0], [0.0], [1.0]])

    def loss():
        return bce_loss(net.forward(x, training=True), y)

    p = net.forward(x, training=True)
    net.backward(bce_loss_grad(p, y))
    analytic = {k: v.copy() for k, v in net.gradients().items()}
    # guard against a vacuous check (e.g. a dead hidden layer zeroing
    # every upstream gradient)
    magnitudes = np.concatenate([g.ravel() for g in analytic.values()])
    assert np.mean(np.abs(magnitudes) > 1e-9) > 0.5, "gradients mostly zero; bad seed"
    worst = 0.0
    for name, arr in net.parameters().items():
        flat = arr.ravel()
        picks = rng.choice(flat.size, size=min(samples, flat.size), replace=False)
        for idx in picks:
            orig = flat[idx]
            flat[idx] = orig + STEP
            up = loss()
            flat[idx] = orig - STEP
            down = loss()
            flat[idx] = orig
            worst = max(worst, rel_err((up - down) / (2 * STEP), analytic[name].ravel()[idx]))
    return worst


def test_composed_network_gradients():
    worst = composed_net_check(seed=0)
    assert worst < TOL


def test_gradients_zero_at_saturated_correct_predictions(rng):
    net = build_network((8, 8, 1), TINY_NET, seed=1)
    # drive the sigmoid head to exactly 1.0 so the clamp freezes the loss
    net.layers[-1].bias[...] = 50.0
    x = rng.random((2, 8, 8, 1))
    y = np.ones((2, 1))
    p = net.forward(x, training=True)
    npt.assert_array_equal(p, 1.0)
    net.backward(bce_loss_grad(p, y))
    npt.assert_allclose(net.layers[-1].dbias, 0.0, atol=1e-6)
    for arr in net.gradients().values():
        npt.assert_allclose(arr, 0.0, atol=1e-6)


def test_gradient_linearity_doubling(rng):
    net = build_network((8, 8, 1), TINY_NET, seed=2)
    x = rng.random((2, 8, 8, 1))
    y = np.array([[1.0], [0.0]])
    p = net.forward(x, training=True)
    net.backward(bce_loss_grad(p, y))
    single = {k: v.copy() for k, v in net.gradients().items()}
    p = net.forward(x, training=True)
    net.backward(2.0 * bce_loss_grad(p, y))  # loss summed twice
    for name, arr in net.gradients().items():
        npt.assert_allclose(arr, 2.0 * single[name], rtol=1e-12, atol=1e-15)

import numpy as np
import numpy.testing as npt
import pytest

from tumorkit.errors import ShapeError
from tumorkit.nn import Adam, AdamConfig


def test_first_step_moves_by_learning_rate():
    # bias corrections cancel at t=1: update = lr * g / |g|
    params = {"w": np.array([1.0])}
    adam = Adam(params, AdamConfig(learning_rate=0.001))
    adam.step(params, {"w": np.array([2.0])})
    npt.assert_allclose(params["w"], [1.0 - 0.001], atol=1e-9)
    assert adam.step_count == 1


def test_zero_gradient_leaves_params_unchanged():
    params = {"w": np.array([0.3, -0.7])}
    adam = Adam(params, AdamConfig())
    before = params["w"].copy()
    for _ in range(5):
        adam.step(params, {"w": np.zeros(2)})
    npt.assert_array_equal(params["w"], before)


def scalar_adam_oracle(w0, lr, steps):
    """Independent scalar simulation of Adam on f(w) = w**2."""
    w, m, v = w0, 0.0, 0.0
    b1, b2, eps = 0.9, 0.999, 1e-8
    history = []
    for t in range(1, steps + 1):
        g = 2.0 * w
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        w -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
        history.append(w)
    return history


def test_quadratic_descent_matches_scalar_oracle():
    params = {"w": np.array([1.0])}
    adam = Adam(params, AdamConfig(learning_rate=0.1))
    trace = []
    for _ in range(100):
        adam.step(params, {"w": 2.0 * params["w"]})
        trace.append(float(params["w"][0]))
    oracle = scalar_adam_oracle(1.0, 0.1, 100)
    npt.assert_allclose(trace, oracle, atol=1e-12)
    assert abs(trace[-1]) < 0.1


def test_step_rejects_mismatched_shapes():
    params = {"w": np.zeros(3)}
    adam = Adam(params, AdamConfig())
    with pytest.raises(ShapeError):
        adam.step(params, {"w": np.zeros(4)})
    with pytest.raises(ShapeError):
        adam.step({"w": np.zeros(3), "b": np.zeros(1)}, {"w": np.zeros(3)})


def test_moments_track_gradient_statistics():
    params = {"w": np.array([0.0])}
    adam = Adam(params, AdamConfig())
    adam.step(params, {"w": np.array([4.0])})
    npt.assert_allclose(adam.m["w"], [0.4], atol=1e-12)   # 0.1 * 4
    npt.assert_allclose(adam.v["w"], [0.016], atol=1e-12)  # 0.001 * 16

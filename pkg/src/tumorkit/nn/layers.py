"""Network layers with explicit forward/backward passes.

All activations travel NHWC (batch, height, width, channels) in float64.
Each layer caches what its backward pass needs during forward; ``backward``
consumes the upstream gradient, stores parameter gradients on the layer,
and returns the gradient with respect to its input.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, ShapeError

BCE_EPS = 1e-7


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign to avoid overflow in exp
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def bce_loss(probabilities: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross-entropy with probabilities clamped to [eps, 1-eps]."""
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape:
        raise ShapeError(f"probability shape {p.shape} != label shape {y.shape}")
    pc = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    return float(np.mean(-(y * np.log(pc) + (1.0 - y) * np.log1p(-pc))))


def bce_loss_grad(probabilities: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Gradient of ``bce_loss`` w.r.t. the (pre-clamp) probabilities.

    Zero where the clamp is active, so this is the exact gradient of the
    computed loss and finite differences agree with it.
    """
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape:
        raise ShapeError(f"probability shape {p.shape} != label shape {y.shape}")
    pc = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    grad = (-(y / pc) + (1.0 - y) / (1.0 - pc)) / p.size
    grad[(p < BCE_EPS) | (p > 1.0 - BCE_EPS)] = 0.0
    return grad


class Layer:
    """Base: stateless unless a subclass adds parameters."""

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def grads(self) -> dict:
        return {}

    def buffers(self) -> dict:
        return {}

    def output_shape(self, in_shape: tuple) -> tuple:
        return in_shape


class Conv2D(Layer):
    """Cross-correlation with zero padding, implemented as one matmul over
    unrolled input windows."""

    def __init__(self, in_channels, out_channels, kernel, stride=1, padding=0, rng=None):
        if kernel < 1 or stride < 1 or padding < 0 or out_channels < 1:
            raise ConfigError("conv kernel/stride/out_channels must be positive")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.padding = padding
        scale = np.sqrt(2.0 / (kernel * kernel * in_channels))  # He init
        rng = rng or np.random.default_rng(0)
        self.weights = rng.normal(0.0, scale, (kernel, kernel, in_channels, out_channels))
        self.bias = np.zeros(out_channels)
        self.dweights = np.zeros_like(self.weights)
        self.dbias = np.zeros_like(self.bias)
        self._cols = None
        self._in_shape = None

    def output_shape(self, in_shape):
        h, w, c = in_shape
        if c != self.in_channels:
            raise ShapeError(f"conv expects {self.in_channels} channels, input has {c}")
        oh = (h + 2 * self.padding - self.kernel) // self.stride + 1
        ow = (w + 2 * self.padding - self.kernel) // self.stride + 1
        if oh < 1 or ow < 1:
            raise ShapeError(f"conv output would be empty for input {in_shape}")
        return (oh, ow, self.out_channels)

    def _im2col(self, x):
        k, s, p = self.kernel, self.stride, self.padding
        if p:
            x = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
        windows = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(1, 2))
        windows = windows[:, :: s, :: s]          # (N, OH, OW, C, k, k)
        windows = windows.transpose(0, 1, 2, 4, 5, 3)  # -> (N, OH, OW, k, k, C)
        n, oh, ow = windows.shape[:3]
        return windows.reshape(n * oh * ow, k * k * self.in_channels), (n, oh, ow)

    def forward(self, x, training=False):
        if x.ndim != 4 or x.shape[3] != self.in_channels:
            raise ShapeError(f"conv expects NHWC with {self.in_channels} channels, got {x.shape}")
        self._in_shape = x.shape
        cols, (n, oh, ow) = self._im2col(x)
        self._cols = cols
        out = cols @ self.weights.reshape(-1, self.out_channels) + self.bias
        return out.reshape(n, oh, ow, self.out_channels)

    def backward(self, dout):
        n, oh, ow, _ = dout.shape
        k, s, p = self.kernel, self.stride, self.padding
        dmat = dout.reshape(n * oh * ow, self.out_channels)
        self.dweights = (self._cols.T @ dmat).reshape(self.weights.shape)
        self.dbias = dmat.sum(axis=0)
        dcols = (dmat @ self.weights.reshape(-1, self.out_channels).T).reshape(
            n, oh, ow, k, k, self.in_channels
        )
        _, h, w, c = self._in_shape
        dx = np.zeros((n, h + 2 * p, w + 2 * p, c))
        for ki in range(k):
            for kj in range(k):
                dx[:, ki : ki + oh * s : s, kj : kj + ow * s : s, :] += dcols[:, :, :, ki, kj, :]
        return dx[:, p : p + h, p : p + w, :] if p else dx

    def params(self):
        return {"weights": self.weights, "bias": self.bias}

    def grads(self):
        return {"weights": self.dweights, "bias": self.dbias}


class BatchNorm(Layer):
    """Per-channel normalization over all leading axes.

    Training mode normalizes by the batch's (biased) statistics and folds
    them into running estimates: ``running = momentum * running +
    (1 - momentum) * batch``.  Inference mode normalizes by the running
    estimates alone.
    """

    def __init__(self, channels, momentum=0.9, epsilon=1e-5):
        self.channels = channels
        self.momentum = momentum
        self.epsilon = epsilon
        self.gamma = np.ones(channels)
        self.beta = np.zeros(channels)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.dgamma = np.zeros_like(self.gamma)
        self.dbeta = np.zeros_like(self.beta)
        self._cache = None

    def output_shape(self, in_shape):
        if in_shape[-1] != self.channels:
            raise ShapeError(f"batchnorm expects {self.channels} channels, input has {in_shape[-1]}")
        return in_shape

    def forward(self, x, training=False):
        if x.shape[-1] != self.channels:
            raise ShapeError(f"batchnorm expects {self.channels} channels, got {x.shape}")
        axes = tuple(range(x.ndim - 1))
        if training:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            # in-place so buffer identity survives for checkpointing
            self.running_mean[...] = self.momentum * self.running_mean + (1 - self.momentum) * mean
            self.running_var[...] = self.momentum * self.running_var + (1 - self.momentum) * var
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.epsilon)
        xhat = (x - mean) * inv_std
        self._cache = (xhat, inv_std, axes, training)
        return self.gamma * xhat + self.beta

    def backward(self, dout):
        xhat, inv_std, axes, training = self._cache
        self.dgamma = (dout * xhat).sum(axis=axes)
        self.dbeta = dout.sum(axis=axes)
        dxhat = dout * self.gamma
        if not training:
            return dxhat * inv_std
        m = dout.size // self.channels
        return (inv_std / m) * (
            m * dxhat - dxhat.sum(axis=axes) - xhat * (dxhat * xhat).sum(axis=axes)
        )

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def grads(self):
        return {"gamma": self.dgamma, "beta": self.dbeta}

    def buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}


class ReLU(Layer):
    def forward(self, x, training=False):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dout):
        return np.where(self._mask, dout, 0.0)


class MaxPool2D(Layer):
    def __init__(self, size, stride=None):
        if size < 1:
            raise ConfigError(f"pool size must be >= 1, got {size}")
        self.size = size
        self.stride = stride or size

    def output_shape(self, in_shape):
        h, w, c = in_shape
        if self.size > h or self.size > w:
            raise ShapeError(f"pool window {self.size} exceeds input {in_shape}")
        oh = (h - self.size) // self.stride + 1
        ow = (w - self.size) // self.stride + 1
        return (oh, ow, c)

    def forward(self, x, training=False):
        k, s = self.size, self.stride
        if x.shape[1] < k or x.shape[2] < k:
            raise ShapeError(f"pool window {k} exceeds input {x.shape}")
        windows = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(1, 2))
        windows = windows[:, :: s, :: s]  # (N, OH, OW, C, k, k)
        n, oh, ow, c = windows.shape[:4]
        flat = windows.reshape(n, oh, ow, c, k * k)
        self._argmax = np.argmax(flat, axis=4)
        self._in_shape = x.shape
        return np.max(flat, axis=4)

    def backward(self, dout):
        k, s = self.size, self.stride
        n, oh, ow, c = dout.shape
        dx = np.zeros(self._in_shape)
        for ki in range(k):
            for kj in range(k):
                sel = self._argmax == ki * k + kj
                dx[:, ki : ki + oh * s : s, kj : kj + ow * s : s, :] += np.where(sel, dout, 0.0)
        return dx


class GlobalAvgPool(Layer):
    """Average each channel over all spatial positions; keeps 1x1 spatial dims."""

    def output_shape(self, in_shape):
        return (1, 1, in_shape[-1])

    def forward(self, x, training=False):
        self._in_shape = x.shape
        return x.mean(axis=(1, 2), keepdims=True)

    def backward(self, dout):
        _, h, w, _ = self._in_shape
        return np.broadcast_to(dout / (h * w), self._in_shape).copy()


class Flatten(Layer):
    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x, training=False):
        self._in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._in_shape)


class Dense(Layer):
    def __init__(self, in_features, units, activation="none", rng=None):
        if units < 1:
            raise ConfigError(f"dense units must be >= 1, got {units}")
        if activation not in ("none", "relu", "sigmoid"):
            raise ConfigError(f"unknown dense activation {activation!r}")
        self.in_features = in_features
        self.units = units
        self.activation = activation
        rng = rng or np.random.default_rng(0)
        self.weights = rng.normal(0.0, np.sqrt(2.0 / in_features), (in_features, units))
        self.bias = np.zeros(units)
        self.dweights = np.zeros_like(self.weights)
        self.dbias = np.zeros_like(self.bias)

    def output_shape(self, in_shape):
        if len(in_shape) != 1 or in_shape[0] != self.in_features:
            raise ShapeError(f"dense expects flat input of {self.in_features}, got {in_shape}")
        return (self.units,)

    def forward(self, x, training=False):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(f"dense expects (N, {self.in_features}), got {x.shape}")
        self._x = x
        z = x @ self.weights + self.bias
        if self.activation == "relu":
            self._act_cache = z > 0
            return np.where(self._act_cache, z, 0.0)
        if self.activation == "sigmoid":
            self._act_cache = sigmoid(z)
            return self._act_cache
        return z

    def backward(self, dout):
        if self.activation == "relu":
            dz = np.where(self._act_cache, dout, 0.0)
        elif self.activation == "sigmoid":
            out = self._act_cache
            dz = dout * out * (1.0 - out)
        else:
            dz = dout
        self.dweights = self._x.T @ dz
        self.dbias = dz.sum(axis=0)
        return dz @ self.weights.T

    def params(self):
        return {"weights": self.weights, "bias": self.bias}

    def grads(self):
        return {"weights": self.dweights, "bias": self.dbias}


class ResidualBlock(Layer):
    """ReLU(inner(x) + shortcut(x)).

    The shortcut is the identity unless the inner path changes shape, in
    which case a 1x1 projection convolution (matching stride and output
    channels) carries the input across.  The shortcut's gradient adds to
    the inner path's, so depth does not attenuate upstream gradients.
    """

    def __init__(self, inner_layers, projection: Conv2D | None = None):
        self.inner = list(inner_layers)
        self.projection = projection

    def output_shape(self, in_shape):
        shape = in_shape
        for layer in self.inner:
            shape = layer.output_shape(shape)
        short = self.projection.output_shape(in_shape) if self.projection else in_shape
        if shape != short:
            raise ShapeError(
                f"residual paths disagree: inner {shape} vs shortcut {short}; "
                "a projection is required when the inner path changes shape"
            )
        return shape

    def forward(self, x, training=False):
        out = x
        for layer in self.inner:
            out = layer.forward(out, training)
        shortcut = self.projection.forward(x, training) if self.projection else x
        if out.shape != shortcut.shape:
            raise ShapeError(f"residual paths disagree: {out.shape} vs {shortcut.shape}")
        pre = out + shortcut
        self._mask = pre > 0
        return np.where(self._mask, pre, 0.0)

    def backward(self, dout):
        dpre = np.where(self._mask, dout, 0.0)
        dinner = dpre
        for layer in reversed(self.inner):
            dinner = layer.backward(dinner)
        dshort = self.projection.backward(dpre) if self.projection else dpre
        return dinner + dshort

    def params(self):
        out = {}
        for i, layer in enumerate(self.inner):
            for name, arr in layer.params().items():
                out[f"inner{i}.{name}"] = arr
        if self.projection:
            for name, arr in self.projection.params().items():
                out[f"proj.{name}"] = arr
        return out

    def grads(self):
        out = {}
        for i, layer in enumerate(self.inner):
            for name, arr in layer.grads().items():
                out[f"inner{i}.{name}"] = arr
        if self.projection:
            for name, arr in self.projection.grads().items():
                out[f"proj.{name}"] = arr
        return out

    def buffers(self):
        out = {}
        for i, layer in enumerate(self.inner):
            for name, arr in layer.buffers().items():
                out[f"inner{i}.{name}"] = arr
        if self.projection:
            for name, arr in self.projection.buffers().items():
                out[f"proj.{name}"] = arr
        return out

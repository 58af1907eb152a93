"""Network assembly from layer specs, plus JSON checkpointing.

A network is described by an input shape (height, width, channels) and an
ordered list of layer spec mappings, e.g.::

    {"type": "conv", "out_channels": 16, "kernel": 3, "stride": 1, "padding": 1}
    {"type": "batchnorm"}
    {"type": "relu"}
    {"type": "maxpool", "size": 2, "stride": 2}
    {"type": "residual", "channels": 16}
    {"type": "residual", "channels": 32, "stride": 2, "projection": true}
    {"type": "globalavgpool"}
    {"type": "flatten"}
    {"type": "dense", "units": 128, "activation": "relu"}
    {"type": "dense", "units": 1, "activation": "sigmoid"}

Checkpoints are JSON holding the spec, every parameter, batch-norm running
stats, and (optionally) optimizer state.  Floats are serialized with
shortest round-trip repr, so save/load reproduces arrays bit-exactly.
"""

from __future__ import annotations

import json
import os

import numpy as np

from ..errors import ConfigError, ShapeError
from ..rng import derive_rng
from .layers import (
    BatchNorm,
    Conv2D,
    Dense,
    Flatten,
    GlobalAvgPool,
    Layer,
    MaxPool2D,
    ReLU,
    ResidualBlock,
)
from .optim import Adam, AdamConfig

CHECKPOINT_FORMAT = "tumorkit-checkpoint"
CHECKPOINT_VERSION = 1

# resnet-mini: every structural element of the full residual classifier
# (conv+BN+ReLU stem, both pooling kinds, shortcut blocks, flatten,
# dense-128, sigmoid head) at a size that trains in seconds on a CPU.
RESNET_MINI_LAYERS = (
    {"type": "conv", "out_channels": 16, "kernel": 3, "stride": 1, "padding": 1},
    {"type": "batchnorm"},
    {"type": "relu"},
    {"type": "maxpool", "size": 2, "stride": 2},
    {"type": "residual", "channels": 16},
    {"type": "residual", "channels": 32, "stride": 2, "projection": True},
    {"type": "globalavgpool"},
    {"type": "flatten"},
    {"type": "dense", "units": 128, "activation": "relu"},
    {"type": "dense", "units": 1, "activation": "sigmoid"},
)


class Network:
    def __init__(self, layers, input_shape, spec, seed):
        self.layers = layers
        self.input_shape = tuple(input_shape)
        self.spec = spec
        self.seed = seed
        self._forward_done = False

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if x.ndim != 4 or x.shape[1:] != self.input_shape:
            raise ShapeError(
                f"network expects batches shaped (N, {self.input_shape}), got {x.shape}"
            )
        out = x
        for layer in self.layers:
            out = layer.forward(out, training)
        self._forward_done = True
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        if not self._forward_done:
            raise RuntimeError("backward called before forward")
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def parameters(self) -> dict:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params().items():
                out[f"layer{i}.{name}"] = arr
        return out

    def gradients(self) -> dict:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, arr in layer.grads().items():
                out[f"layer{i}.{name}"] = arr
        return out

    def buffers(self) -> dict:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, arr in layer.buffers().items():
                out[f"layer{i}.{name}"] = arr
        return out

    def param_count(self) -> int:
        return sum(arr.size for arr in self.parameters().values())

    def output_shape(self) -> tuple:
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.output_shape(shape)
        return shape


def _build_residual(step, in_shape, rng_for):
    stride = int(step.get("stride", 1))
    h, w, in_c = in_shape
    if "inner" in step:
        inner_specs = step["inner"]
    else:
        if "channels" not in step:
            raise ConfigError("residual spec needs 'channels' or an explicit 'inner' list")
        c = int(step["channels"])
        inner_specs = [
            {"type": "conv", "out_channels": c, "kernel": 3, "stride": stride, "padding": 1},
            {"type": "batchnorm"},
            {"type": "relu"},
            {"type": "conv", "out_channels": c, "kernel": 3, "stride": 1, "padding": 1},
            {"type": "batchnorm"},
        ]
    inner, shape = [], in_shape
    for j, sub in enumerate(inner_specs):
        layer, shape = _build_layer(sub, shape, lambda name, j=j: rng_for(f"inner{j}.{name}"))
        inner.append(layer)
    needs_projection = shape != in_shape
    wants_projection = bool(step.get("projection", needs_projection))
    if needs_projection and not wants_projection:
        raise ConfigError(
            f"residual inner path maps {in_shape} -> {shape}; set projection=true"
        )
    projection = None
    if wants_projection:
        # stride that reproduces the inner path's downsampling
        total_stride = h // shape[0]
        projection = Conv2D(
            in_c, shape[2], kernel=1, stride=total_stride, rng=rng_for("proj.weights")
        )
        proj_shape = projection.output_shape(in_shape)
        if proj_shape != shape:
            raise ShapeError(
                f"projection shortcut yields {proj_shape}, inner path yields {shape}"
            )
    return ResidualBlock(inner, projection), shape


def _build_layer(step, in_shape, rng_for):
    kind = step.get("type")
    if kind == "conv":
        layer = Conv2D(
            in_channels=in_shape[-1],
            out_channels=int(step["out_channels"]),
            kernel=int(step.get("kernel", 3)),
            stride=int(step.get("stride", 1)),
            padding=int(step.get("padding", 0)),
            rng=rng_for("weights"),
        )
    elif kind == "batchnorm":
        layer = BatchNorm(
            channels=in_shape[-1],
            momentum=float(step.get("momentum", 0.9)),
            epsilon=float(step.get("epsilon", 1e-5)),
        )
    elif kind == "relu":
        layer = ReLU()
    elif kind == "maxpool":
        layer = MaxPool2D(size=int(step["size"]), stride=int(step.get("stride", step["size"])))
    elif kind == "globalavgpool":
        layer = GlobalAvgPool()
    elif kind == "flatten":
        layer = Flatten()
    elif kind == "dense":
        if len(in_shape) != 1:
            raise ConfigError(f"dense layer needs flattened input, got shape {in_shape}")
        layer = Dense(
            in_features=in_shape[0],
            units=int(step["units"]),
            activation=step.get("activation", "none"),
            rng=rng_for("weights"),
        )
    elif kind == "residual":
        return _build_residual(step, in_shape, rng_for)
    else:
        raise ConfigError(f"unknown layer type {kind!r}")
    return layer, layer.output_shape(in_shape)


def build_network(input_shape, layer_specs, seed: int = 0) -> Network:
    """Instantiate and He-initialize a network; shapes are checked as built."""
    input_shape = tuple(int(v) for v in input_shape)
    if len(input_shape) != 3:
        raise ConfigError(f"input shape must be (height, width, channels), got {input_shape}")
    layers, shape = [], input_shape
    specs = [dict(step) for step in layer_specs]
    for i, step in enumerate(specs):
        def rng_for(name, i=i):
            return derive_rng(seed, "init", f"layer{i}.{name}")

        layer, shape = _build_layer(step, shape, rng_for)
        layers.append(layer)
    return Network(layers, input_shape, specs, seed)


def expected_param_count(input_shape, layer_specs) -> int:
    """Closed-form parameter count for a spec, without building weights."""
    shape = tuple(input_shape)
    total = 0

    def count(specs, shape):
        nonlocal total
        for step in specs:
            kind = step["type"]
            if kind == "conv":
                k = int(step.get("kernel", 3))
                oc = int(step["out_channels"])
                total += k * k * shape[-1] * oc + oc
                h, w, _ = shape
                s, p = int(step.get("stride", 1)), int(step.get("padding", 0))
                shape = ((h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1, oc)
            elif kind == "batchnorm":
                total += 2 * shape[-1]
            elif kind == "maxpool":
                k = int(step["size"])
                s = int(step.get("stride", k))
                shape = ((shape[0] - k) // s + 1, (shape[1] - k) // s + 1, shape[2])
            elif kind == "globalavgpool":
                shape = (1, 1, shape[-1])
            elif kind == "flatten":
                shape = (int(np.prod(shape)),)
            elif kind == "dense":
                units = int(step["units"])
                total += shape[0] * units + units
                shape = (units,)
            elif kind == "residual":
                in_shape = shape
                stride = int(step.get("stride", 1))
                if "inner" in step:
                    shape = count(step["inner"], shape)
                else:
                    c = int(step["channels"])
                    shape = count(
                        [
                            {"type": "conv", "out_channels": c, "kernel": 3,
                             "stride": stride, "padding": 1},
                            {"type": "batchnorm"},
                            {"type": "relu"},
                            {"type": "conv", "out_channels": c, "kernel": 3,
                             "stride": 1, "padding": 1},
                            {"type": "batchnorm"},
                        ],
                        shape,
                    )
                if step.get("projection", shape != in_shape):
                    total += 1 * 1 * in_shape[-1] * shape[-1] + shape[-1]
        return shape

    count([dict(s) for s in layer_specs], shape)
    return total


def _arrays_to_json(arrays: dict) -> dict:
    return {
        name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
        for name, arr in arrays.items()
    }


def _arrays_from_json(blob: dict, targets: dict, section: str) -> None:
    if set(blob) != set(targets):
        missing = set(targets) - set(blob)
        extra = set(blob) - set(targets)
        raise ConfigError(f"checkpoint {section} mismatch: missing={missing}, extra={extra}")
    for name, entry in blob.items():
        arr = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        if arr.shape != targets[name].shape:
            raise ShapeError(
                f"checkpoint {section} {name!r}: shape {arr.shape} != {targets[name].shape}"
            )
        targets[name][...] = arr


def save_checkpoint(path: str | os.PathLike, network: Network, adam: Adam | None = None) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "input_shape": list(network.input_shape),
        "layers": network.spec,
        "seed": network.seed,
        "parameters": _arrays_to_json(network.parameters()),
        "buffers": _arrays_to_json(network.buffers()),
    }
    if adam is not None:
        payload["optimizer"] = {
            "learning_rate": adam.cfg.learning_rate,
            "beta1": adam.cfg.beta1,
            "beta2": adam.cfg.beta2,
            "epsilon": adam.cfg.epsilon,
            "step_count": adam.step_count,
            "first_moment": _arrays_to_json(adam.m),
            "second_moment": _arrays_to_json(adam.v),
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_checkpoint(path: str | os.PathLike):
    """Rebuild (network, adam-or-None) from a checkpoint file."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ConfigError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    network = build_network(payload["input_shape"], payload["layers"], payload["seed"])
    _arrays_from_json(payload["parameters"], network.parameters(), "parameters")
    _arrays_from_json(payload["buffers"], network.buffers(), "buffers")
    adam = None
    if payload.get("optimizer"):
        opt = payload["optimizer"]
        cfg = AdamConfig(
            learning_rate=opt["learning_rate"],
            beta1=opt["beta1"],
            beta2=opt["beta2"],
            epsilon=opt["epsilon"],
        )
        adam = Adam(network.parameters(), cfg)
        adam.step_count = int(opt["step_count"])
        _arrays_from_json(opt["first_moment"], adam.m, "first_moment")
        _arrays_from_json(opt["second_moment"], adam.v, "second_moment")
    return network, adam

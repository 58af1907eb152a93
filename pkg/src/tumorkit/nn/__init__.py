from .layers import (
    BatchNorm,
    Conv2D,
    Dense,
    Flatten,
    GlobalAvgPool,
    MaxPool2D,
    ReLU,
    ResidualBlock,
    bce_loss,
    bce_loss_grad,
    relu,
    sigmoid,
)
from .network import (
    RESNET_MINI_LAYERS,
    Network,
    build_network,
    expected_param_count,
    load_checkpoint,
    save_checkpoint,
)
from .optim import Adam, AdamConfig
from .train import TrainConfig, evaluate, train

__all__ = [
    "Adam",
    "AdamConfig",
    "BatchNorm",
    "Conv2D",
    "Dense",
    "Flatten",
    "GlobalAvgPool",
    "MaxPool2D",
    "Network",
    "ReLU",
    "RESNET_MINI_LAYERS",
    "ResidualBlock",
    "TrainConfig",
    "bce_loss",
    "bce_loss_grad",
    "build_network",
    "evaluate",
    "expected_param_count",
    "load_checkpoint",
    "relu",
    "save_checkpoint",
    "sigmoid",
    "train",
]

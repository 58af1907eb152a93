"""Mini-batch training loop and inference-mode evaluation.

Per epoch: seeded shuffle, per-sample augmentation (training split only),
forward/backward/Adam per batch, then one evaluation pass over each split
with batch norm running statistics.  Every random choice derives from
(seed, purpose, epoch, sample index), so a rerun with the same seed is
bit-identical and batch partitioning cannot leak between samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..augment import AugmentConfig, augment_apply
from ..errors import ConfigError, ShapeError
from ..metrics import TrainReport, binary_accuracy
from ..rng import derive_rng
from .layers import bce_loss, bce_loss_grad
from .network import Network
from .optim import Adam, AdamConfig


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 16
    seed: int = 0
    augment: AugmentConfig = field(default_factory=AugmentConfig)

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")


def _as_batch(images: np.ndarray, indices) -> np.ndarray:
    return images[indices][..., None]  # NHW -> NHWC with one channel


def predict(network: Network, images: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Inference-mode probabilities for a stack of (N, H, W) images."""
    probs = []
    for start in range(0, len(images), batch_size):
        x = _as_batch(images, slice(start, start + batch_size))
        probs.append(network.forward(x, training=False).ravel())
    return np.concatenate(probs)


def evaluate(network: Network, images: np.ndarray, labels: np.ndarray, batch_size: int = 64):
    """(mean BCE loss, accuracy at threshold 0.5) over a whole split."""
    if len(images) == 0:
        raise ValueError("cannot evaluate an empty split")
    p = predict(network, images, batch_size)
    y = np.asarray(labels, dtype=np.float64).ravel()
    return bce_loss(p, y), binary_accuracy(p, y)


def train(
    network: Network,
    train_images: np.ndarray,
    train_labels: np.ndarray,
    test_images: np.ndarray,
    test_labels: np.ndarray,
    cfg: TrainConfig,
    adam_cfg: AdamConfig | None = None,
    on_epoch=None,
):
    """Train in place and return (TrainReport, Adam state).

    ``on_epoch(epoch, train_loss, test_loss, train_acc, test_acc)`` fires
    after each epoch's evaluation, e.g. to stream a report to disk.
    """
    train_images = np.asarray(train_images, dtype=np.float64)
    test_images = np.asarray(test_images, dtype=np.float64)
    ytr = np.asarray(train_labels, dtype=np.float64).ravel()
    yte = np.asarray(test_labels, dtype=np.float64).ravel()
    if len(train_images) == 0 or len(test_images) == 0:
        raise ValueError("both train and test splits must be nonempty")
    if len(train_images) != len(ytr) or len(test_images) != len(yte):
        raise ShapeError("images and labels differ in length")
    expected = network.input_shape
    if expected[2] != 1 or train_images.shape[1:] != expected[:2] or test_images.shape[1:] != expected[:2]:
        raise ShapeError(
            f"network expects single-channel {expected} inputs, got images "
            f"{train_images.shape[1:]} / {test_images.shape[1:]}"
        )

    adam = Adam(network.parameters(), adam_cfg or AdamConfig())
    series = {"train_loss": [], "test_loss": [], "train_acc": [], "test_acc": []}
    n = len(train_images)
    for epoch in range(1, cfg.epochs + 1):
        order = derive_rng(cfg.seed, "train", "shuffle", epoch).permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            batch = np.stack(
                [
                    augment_apply(
                        train_images[i],
                        cfg.augment,
                        derive_rng(cfg.seed, "augment", epoch, int(i)),
                    )
                    for i in idx
                ]
            )[..., None]
            y = ytr[idx]
            p = network.forward(batch, training=True).ravel()
            network.backward(bce_loss_grad(p, y).reshape(-1, 1))
            adam.step(network.parameters(), network.gradients())
        train_loss, train_acc = evaluate(network, train_images, ytr)
        test_loss, test_acc = evaluate(network, test_images, yte)
        series["train_loss"].append(train_loss)
        series["test_loss"].append(test_loss)
        series["train_acc"].append(train_acc)
        series["test_acc"].append(test_acc)
        if on_epoch is not None:
            on_epoch(epoch, train_loss, test_loss, train_acc, test_acc)
    report = TrainReport(epochs=cfg.epochs, **series)
    return report, adam

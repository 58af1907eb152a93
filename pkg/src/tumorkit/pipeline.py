"""End-to-end glue: load -> preprocess -> segment -> model inputs.

The classifier can consume raw slices, preprocessed slices, or slices
multiplied by their predicted tumor mask.  Masked input is the default: the
clustering stage's output feeds training, so segmentation errors propagate
into the classifier exactly as they would downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dataset import ClassLabel, DatasetManifest, load_sample
from .errors import ConfigError
from .imgproc import preprocess_pipeline, resize
from .rng import derive_seed
from .segment import ClusterModel, KMeansConfig, extract_tumor_mask, kmeans

TRAIN_ON_CHOICES = ("raw", "preprocessed", "masked")


@dataclass
class SegmentedSample:
    id: str
    label: str
    preprocessed: np.ndarray
    model: ClusterModel
    pred_mask: np.ndarray
    truth_mask: np.ndarray | None


def sample_kmeans_config(base: KMeansConfig, seed: int, sample_id: str) -> KMeansConfig:
    """Per-sample clustering config; the stream is a pure function of
    (top-level seed, sample id), so processing order never matters."""
    return replace(base, seed=derive_seed(seed, "segment", sample_id))


def segment_sample(manifest, sample_id, steps, kmeans_cfg, seed) -> SegmentedSample:
    sample = load_sample(manifest, sample_id)
    pre = preprocess_pipeline(sample.image, steps)
    model = kmeans(pre, sample_kmeans_config(kmeans_cfg, seed, sample_id))
    return SegmentedSample(
        id=sample.id,
        label=sample.label.value,
        preprocessed=pre,
        model=model,
        pred_mask=extract_tumor_mask(pre, model),
        truth_mask=sample.mask,
    )


def build_model_inputs(
    manifest: DatasetManifest,
    ids,
    steps,
    kmeans_cfg: KMeansConfig,
    seed: int,
    train_on: str,
    input_hw: tuple,
):
    """Stack (images, binary labels) for the classifier.

    Images pass through the configured representation and are resized to
    the network's input height/width last, so segmentation runs at native
    resolution.
    """
    if train_on not in TRAIN_ON_CHOICES:
        raise ConfigError(f"train_on must be one of {TRAIN_ON_CHOICES}, got {train_on!r}")
    h, w = input_hw
    images, labels = [], []
    for sample_id in ids:
        if train_on == "raw":
            sample = load_sample(manifest, sample_id)
            img, label = sample.image, sample.label
        elif train_on == "preprocessed":
            sample = load_sample(manifest, sample_id)
            img, label = preprocess_pipeline(sample.image, steps), sample.label
        else:
            seg = segment_sample(manifest, sample_id, steps, kmeans_cfg, seed)
            img = seg.preprocessed * seg.pred_mask
            label = ClassLabel(seg.label)
        if img.shape != (h, w):
            img = resize(img, w, h)
        images.append(img)
        labels.append(1.0 if label.is_tumor else 0.0)
    return np.stack(images), np.array(labels)

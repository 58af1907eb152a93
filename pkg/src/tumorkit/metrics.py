"""Overlap and classification metrics.

A predicted mask counts as a detection when its IoU against the ground
truth clears a threshold; per-class mean IoU is taken over detections only,
so "missed entirely" cases show up in the detection rate instead of
dragging the mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

DETECT_THRESHOLD_DEFAULT = 0.1


@dataclass
class IoURow:
    id: str
    label: str
    iou: float
    detected: bool


@dataclass
class ClassSummary:
    mean_iou_detected: float | None  # None when the class has no detections
    detection_rate: float
    detected: int
    total: int


@dataclass
class IoUReport:
    per_image: list        # of IoURow
    per_class: dict        # label -> ClassSummary
    detect_threshold: float


@dataclass
class TrainReport:
    epochs: int
    train_loss: list
    test_loss: list
    train_acc: list
    test_acc: list

    def __post_init__(self):
        series = (self.train_loss, self.test_loss, self.train_acc, self.test_acc)
        if any(len(s) != self.epochs for s in series):
            raise ShapeError("every report series must have one entry per epoch")


def iou(predicted: np.ndarray, truth: np.ndarray) -> float:
    """|A intersect B| / |A union B|; 0 when both masks are empty."""
    predicted = np.asarray(predicted, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if predicted.shape != truth.shape:
        raise ShapeError(f"mask shapes differ: {predicted.shape} vs {truth.shape}")
    union = np.count_nonzero(predicted | truth)
    if union == 0:
        return 0.0
    return np.count_nonzero(predicted & truth) / union


def overlap_report(samples, detect_threshold: float = DETECT_THRESHOLD_DEFAULT) -> IoUReport:
    """Aggregate per-image IoU rows into per-class summaries.

    ``samples`` yields (id, label, predicted_mask, truth_mask) tuples.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("overlap_report needs at least one sample")
    rows = []
    for sample_id, label, predicted, truth in samples:
        value = iou(predicted, truth)
        rows.append(IoURow(sample_id, label, value, value >= detect_threshold))
    per_class: dict[str, ClassSummary] = {}
    for label in sorted({row.label for row in rows}):
        group = [row for row in rows if row.label == label]
        hits = [row.iou for row in group if row.detected]
        per_class[label] = ClassSummary(
            mean_iou_detected=float(np.mean(hits)) if hits else None,
            detection_rate=len(hits) / len(group),
            detected=len(hits),
            total=len(group),
        )
    return IoUReport(per_image=rows, per_class=per_class, detect_threshold=detect_threshold)


def binary_accuracy(probabilities, labels, threshold: float = 0.5) -> float:
    """Fraction of samples where (p >= threshold) matches the 0/1 label."""
    probabilities = np.asarray(probabilities, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if len(probabilities) != len(labels):
        raise ShapeError(
            f"probabilities ({len(probabilities)}) and labels ({len(labels)}) differ in length"
        )
    if len(labels) == 0:
        raise ValueError("binary_accuracy needs at least one sample")
    predictions = probabilities >= threshold
    return float(np.mean(predictions == (labels != 0)))

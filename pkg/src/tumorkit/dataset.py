"""Manifest-driven dataset loading and stratified splitting.

A dataset is a CSV manifest with header ``id,image,mask,label,patient``
plus the image/mask files it references (8-bit grayscale PNG or binary
PGM).  An empty mask field means the sample has no ground-truth mask.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from . import image_io
from .errors import ConfigError, ManifestError, ShapeError
from .rng import derive_rng

MANIFEST_HEADER = ["id", "image", "mask", "label", "patient"]


class ClassLabel(Enum):
    MENINGIOMA = "meningioma"
    GLIOMA = "glioma"
    PITUITARY = "pituitary"
    NEGATIVE = "negative"  # synthetic no-tumor samples only

    @classmethod
    def parse(cls, text: str) -> "ClassLabel":
        try:
            return cls(text.strip().lower())
        except ValueError:
            valid = ", ".join(label.value for label in cls)
            raise ManifestError(f"unknown label {text!r} (expected one of: {valid})") from None

    @property
    def is_tumor(self) -> bool:
        return self is not ClassLabel.NEGATIVE


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    image_path: str
    mask_path: str | None
    label: ClassLabel
    patient: str


@dataclass
class DatasetManifest:
    root: Path
    entries: list

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> list:
        return [entry.id for entry in self.entries]

    def entry(self, sample_id: str) -> ManifestEntry:
        for entry in self.entries:
            if entry.id == sample_id:
                return entry
        raise ManifestError(f"unknown sample id {sample_id!r}")


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 0
    stratify_by_label: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(
                f"train_fraction must lie strictly in (0, 1), got {self.train_fraction}"
            )


@dataclass
class LabeledSample:
    id: str
    image: np.ndarray
    mask: np.ndarray | None
    label: ClassLabel
    patient: str


def load_manifest(path: str | os.PathLike) -> DatasetManifest:
    """Parse a manifest CSV; pixel data is not touched."""
    path = Path(path)
    entries = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return DatasetManifest(root=path.parent, entries=[])  # empty file, no samples
        if [col.strip() for col in header] != MANIFEST_HEADER:
            raise ManifestError(
                f"{path}: line 1: bad header {header!r}, expected {','.join(MANIFEST_HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise ManifestError(
                    f"{path}: line {lineno}: expected {len(MANIFEST_HEADER)} fields, got {len(row)}"
                )
            sample_id, image_path, mask_path, label_text, patient = (f.strip() for f in row)
            if not sample_id or not image_path or not label_text:
                raise ManifestError(f"{path}: line {lineno}: id, image, and label are required")
            if sample_id in seen:
                raise ManifestError(f"{path}: line {lineno}: duplicate id {sample_id!r}")
            seen.add(sample_id)
            entries.append(
                ManifestEntry(
                    id=sample_id,
                    image_path=image_path,
                    mask_path=mask_path or None,
                    label=ClassLabel.parse(label_text),
                    patient=patient,
                )
            )
    return DatasetManifest(root=path.parent, entries=entries)


def load_sample(manifest: DatasetManifest, sample_id: str) -> LabeledSample:
    """Load one sample's pixels; mask dimensions must match the image."""
    entry = manifest.entry(sample_id)
    image = image_io.read_gray(manifest.root / entry.image_path)
    mask = None
    if entry.mask_path is not None:
        mask = image_io.read_mask(manifest.root / entry.mask_path)
        if mask.shape != image.shape:
            raise ShapeError(
                f"sample {sample_id!r}: mask {mask.shape} does not match image {image.shape}"
            )
    return LabeledSample(
        id=entry.id, image=image, mask=mask, label=entry.label, patient=entry.patient
    )


def _train_count(n: int, fraction: float) -> int:
    return math.floor(n * fraction + 0.5)  # symmetric half-up rounding


def split(manifest: DatasetManifest, spec: SplitSpec):
    """Deterministic train/test id partition, optionally per-label stratified."""
    if not manifest.entries:
        raise ManifestError("cannot split an empty manifest")
    if spec.stratify_by_label:
        strata: dict[ClassLabel, list] = {}
        for entry in manifest.entries:
            strata.setdefault(entry.label, []).append(entry.id)
        for label, ids in strata.items():
            if len(ids) < 2:
                raise ManifestError(
                    f"stratum {label.value!r} has {len(ids)} sample(s); stratified "
                    "splitting needs at least 2 per label"
                )
        groups = [
            (label.value, strata[label])
            for label in sorted(strata, key=lambda lab: lab.value)
        ]
    else:
        groups = [("all", manifest.ids())]
    train, test = [], []
    for name, ids in groups:
        order = sorted(ids)
        rng = derive_rng(spec.seed, "dataset", "split", name)
        rng.shuffle(order)
        cut = _train_count(len(order), spec.train_fraction)
        train.extend(order[:cut])
        test.extend(order[cut:])
    return sorted(train), sorted(test)

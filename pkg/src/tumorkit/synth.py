"""Synthetic desk-scale corpus: bright elliptical "tumors" on textured dark
backgrounds, with exact ground-truth masks.

Half of the generated samples are positives (ellipse + mask, labeled
glioma), half negatives (background only, empty mask field).  Everything is
a pure function of the seed, so a corpus regenerates bit-identically.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from . import image_io
from .dataset import MANIFEST_HEADER
from .errors import ConfigError
from .imgproc import box_smooth
from .rng import derive_rng

POSITIVE_LABEL = "glioma"
NEGATIVE_LABEL = "negative"


def _background(size: int, rng: np.random.Generator) -> np.ndarray:
    # low-frequency field thresholded into dark/mid patches, then noised;
    # two background tones keep k=3 clustering anchored off the tumor ramp
    field = box_smooth(rng.random((size, size)), 9)
    base = np.where(field > np.median(field), 0.32, 0.12)
    base = box_smooth(base, 3) + rng.normal(0.0, 0.02, (size, size))
    return np.clip(base, 0.04, 0.45)


def _ellipse_mask(size: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.uniform(size / 8.0, size / 4.0)
    b = rng.uniform(size / 8.0, size / 4.0)
    theta = rng.uniform(0.0, math.pi)
    margin = max(a, b) + 2.0
    cy = rng.uniform(margin, size - 1 - margin)
    cx = rng.uniform(margin, size - 1 - margin)
    yy, xx = np.mgrid[0:size, 0:size]
    u = math.cos(theta) * (xx - cx) + math.sin(theta) * (yy - cy)
    v = -math.sin(theta) * (xx - cx) + math.cos(theta) * (yy - cy)
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


def make_sample(size: int, positive: bool, rng: np.random.Generator):
    """Return (image, mask-or-None) for one synthetic slice."""
    img = _background(size, rng)
    if not positive:
        return img, None
    mask = _ellipse_mask(size, rng)
    bright = np.clip(0.9 + rng.normal(0.0, 0.02, (size, size)), 0.82, 0.98)
    img = np.where(mask, bright, img)
    return img, mask


def generate_corpus(out_dir, n: int, size: int, seed: int) -> Path:
    """Write images/, masks/, and manifest.csv under ``out_dir``.

    Returns the manifest path.  ``n`` must be even and >= 2; the first n/2
    samples are positives.
    """
    if n < 2 or n % 2:
        raise ConfigError(f"corpus size must be even and >= 2, got {n}")
    if size < 16:
        raise ConfigError(f"image size must be >= 16, got {size}")
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    rows = []
    for i in range(n):
        positive = i < n // 2
        rng = derive_rng(seed, "synth", i)
        img, mask = make_sample(size, positive, rng)
        sample_id = f"s{i:04d}"
        image_rel = f"images/{sample_id}.png"
        image_io.write_gray(out_dir / image_rel, img)
        mask_rel = ""
        if mask is not None:
            mask_rel = f"masks/{sample_id}_mask.png"
            image_io.write_mask(out_dir / mask_rel, mask)
        label = POSITIVE_LABEL if positive else NEGATIVE_LABEL
        rows.append([sample_id, image_rel, mask_rel, label, f"p{i:04d}"])
    manifest_path = out_dir / "manifest.csv"
    with open(manifest_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        writer.writerows(rows)
    return manifest_path

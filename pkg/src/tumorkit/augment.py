"""Stochastic training-time augmentation: rescale, shear, zoom, flip.

Parameter sampling is separated from application so a training loop can
derive one stream per (seed, sample) and stay order-independent across
workers.  Geometry is inverse-mapped about the image center with bilinear
sampling; coordinates falling outside the image clamp to the nearest edge
pixel, which avoids injecting artificial black borders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .imgproc import check_gray


@dataclass(frozen=True)
class AugmentConfig:
    rescale: float = 1.0
    shear_range: float = 0.2          # max |shear| in radians
    zoom_range: tuple = (0.8, 1.2)    # (min, max) scale factors
    hflip_prob: float = 0.5
    seed: int = 0

    def __post_init__(self):
        zmin, zmax = self.zoom_range
        if zmin <= 0 or zmax <= 0 or zmin > zmax:
            raise ConfigError(f"zoom_range must satisfy 0 < min <= max, got {self.zoom_range}")
        if not 0.0 <= self.hflip_prob <= 1.0:
            raise ConfigError(f"hflip_prob must lie in [0, 1], got {self.hflip_prob}")
        if self.shear_range < 0:
            raise ConfigError(f"shear_range must be >= 0, got {self.shear_range}")

    @classmethod
    def identity(cls, seed: int = 0) -> "AugmentConfig":
        return cls(rescale=1.0, shear_range=0.0, zoom_range=(1.0, 1.0), hflip_prob=0.0, seed=seed)


def hflip(img: np.ndarray) -> np.ndarray:
    """Reverse column order."""
    img = check_gray(img)
    return img[:, ::-1].copy()


def affine_warp(img: np.ndarray, shear: float, zoom: float) -> np.ndarray:
    """Zoom-and-shear about the image center.

    Forward geometry magnifies by ``zoom`` and shears x by ``tan(shear)``
    per unit y; each output pixel therefore samples the input at the
    inverse-mapped location.  zoom > 1 makes content larger.
    """
    img = check_gray(img)
    if zoom <= 0:
        raise ConfigError(f"zoom must be > 0, got {zoom}")
    h, w = img.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    s = math.tan(shear)
    dy = np.arange(h)[:, None] - cy
    dx = np.arange(w)[None, :] - cx
    # inverse of [[zoom, zoom*s], [0, zoom]]
    src_x = np.clip((dx - s * dy) / zoom + cx, 0.0, w - 1.0)
    src_y = np.clip(np.broadcast_to(dy / zoom + cy, (h, w)), 0.0, h - 1.0)
    x0 = np.floor(src_x).astype(np.intp)
    y0 = np.floor(src_y).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = src_x - x0
    fy = src_y - y0
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def sample_augmentation(cfg: AugmentConfig, rng: np.random.Generator):
    """Draw (shear, zoom, flip) for one image from the given stream.

    Always consumes exactly three draws, so stream positions stay aligned
    across configs.  Degenerate ranges collapse exactly: uniform(0, 0) is
    0.0 and a Bernoulli with p in {0, 1} is constant.
    """
    shear = rng.uniform(-cfg.shear_range, cfg.shear_range)
    zmin, zmax = cfg.zoom_range
    zoom = rng.uniform(zmin, zmax)
    flip = bool(rng.random() < cfg.hflip_prob)
    return shear, zoom, flip


def augment_apply(img: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """Rescale, then sampled flip, then warp; output clamped to [0, 1]."""
    img = np.asarray(img, dtype=np.float64)
    if cfg.rescale != 1.0:
        img = img * cfg.rescale
    img = np.clip(img, 0.0, 1.0)
    shear, zoom, flip = sample_augmentation(cfg, rng)
    if flip:
        img = hflip(img)
    if shear != 0.0 or zoom != 1.0:
        img = affine_warp(img, shear, zoom)
    return np.clip(img, 0.0, 1.0)

"""Intensity-image preprocessing: smoothing, bilateral filtering, grayscale
conversion, and resizing.

Conventions shared by every windowed operation here:

* images are 2-D float64 arrays with values in [0, 1];
* borders use reflect padding (mirror without repeating the edge pixel);
* outputs are clipped to [min(input), max(input)], which windowed weighted
  averages satisfy mathematically anyway -- the clip only removes float
  round-off excursions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError


def check_gray(img: np.ndarray, what: str = "image") -> np.ndarray:
    """Validate a 2-D intensity array in [0, 1] and return it as float64."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ShapeError(f"{what}: expected a nonempty 2-D array, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError(f"{what}: contains non-finite values")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError(f"{what}: intensities must lie in [0, 1]")
    return img


@dataclass(frozen=True)
class BilateralParams:
    """Window radius plus spatial / intensity falloff widths."""

    radius: int = 4
    sigma_space: float = 3.0
    sigma_range: float = 0.3

    def __post_init__(self):
        if self.radius < 1:
            raise ConfigError(f"bilateral radius must be >= 1, got {self.radius}")
        if self.sigma_space <= 0 or self.sigma_range <= 0:
            raise ConfigError("bilateral sigmas must be > 0")


def _check_kernel(kernel_size: int, img: np.ndarray) -> None:
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise ConfigError(f"kernel size must be odd and >= 1, got {kernel_size}")
    if kernel_size > min(img.shape):
        raise ConfigError(
            f"kernel size {kernel_size} exceeds image extent {min(img.shape)}"
        )


def _filter_axis(img: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    """Correlate along one axis under reflect padding."""
    pad = len(kernel) // 2
    width = [(0, 0), (0, 0)]
    width[axis] = (pad, pad)
    padded = np.pad(img, width, mode="reflect") if pad else img
    windows = np.lib.stride_tricks.sliding_window_view(padded, len(kernel), axis=axis)
    return np.tensordot(windows, kernel, axes=([2], [0]))


def _clip_to_input(out: np.ndarray, img: np.ndarray) -> np.ndarray:
    return np.clip(out, img.min(), img.max())


def box_smooth(img: np.ndarray, kernel_size: int = 7) -> np.ndarray:
    """Mean filter: each pixel becomes the average of its k x k neighborhood."""
    img = check_gray(img)
    _check_kernel(kernel_size, img)
    kernel = np.full(kernel_size, 1.0 / kernel_size)
    out = _filter_axis(_filter_axis(img, kernel, 0), kernel, 1)
    return _clip_to_input(out, img)


def gaussian_kernel_1d(kernel_size: int, sigma: float) -> np.ndarray:
    """Sampled Gaussian weights, normalized to sum 1."""
    if sigma <= 0:
        raise ConfigError(f"sigma must be > 0, got {sigma}")
    offsets = np.arange(kernel_size, dtype=np.float64) - (kernel_size - 1) / 2.0
    weights = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return weights / weights.sum()


def gaussian_smooth(img: np.ndarray, kernel_size: int, sigma: float) -> np.ndarray:
    """Separable Gaussian convolution with reflect padding."""
    img = check_gray(img)
    _check_kernel(kernel_size, img)
    kernel = gaussian_kernel_1d(kernel_size, sigma)
    out = _filter_axis(_filter_axis(img, kernel, 0), kernel, 1)
    return _clip_to_input(out, img)


def bilateral_filter(img: np.ndarray, params: BilateralParams | None = None) -> np.ndarray:
    """Edge-preserving smoothing.

    Each output pixel is a weighted average over its window, where a
    neighbor's weight is the product of a spatial Gaussian in pixel distance
    and a range Gaussian in intensity difference from the center pixel.
    Neighbors across a strong edge get near-zero weight, so edges survive.
    """
    img = check_gray(img)
    params = params or BilateralParams()
    r = params.radius
    if r > min(img.shape) - 1:
        raise ConfigError(f"bilateral radius {r} too large for image {img.shape}")
    inv2ss = 1.0 / (2.0 * params.sigma_space**2)
    inv2sr = 1.0 / (2.0 * params.sigma_range**2)
    padded = np.pad(img, r, mode="reflect")
    h, w = img.shape
    acc = np.zeros_like(img)
    norm = np.zeros_like(img)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            neighbor = padded[r + dy : r + dy + h, r + dx : r + dx + w]
            weight = np.exp(
                -(dy * dy + dx * dx) * inv2ss - (neighbor - img) ** 2 * inv2sr
            )
            acc += weight * neighbor
            norm += weight
    return _clip_to_input(acc / norm, img)


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """Collapse an (H, W, 3) image in [0, 1] to luma (Rec. 601 weights)."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ShapeError(f"expected an (H, W, 3) array, got shape {rgb.shape}")
    if rgb.size == 0 or not np.all(np.isfinite(rgb)):
        raise ValueError("rgb image must be nonempty and finite")
    if rgb.min() < 0.0 or rgb.max() > 1.0:
        raise ValueError("rgb channels must lie in [0, 1]")
    return rgb @ np.array([0.299, 0.587, 0.114])


def resize(img: np.ndarray, new_width: int, new_height: int) -> np.ndarray:
    """Bilinear resize, sampling at pixel centers with edge clamping."""
    img = check_gray(img)
    if new_width < 1 or new_height < 1:
        raise ConfigError(f"target size must be >= 1, got {new_width}x{new_height}")
    h, w = img.shape
    sy = np.clip((np.arange(new_height) + 0.5) * (h / new_height) - 0.5, 0.0, h - 1.0)
    sx = np.clip((np.arange(new_width) + 0.5) * (w / new_width) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(sy).astype(np.intp)
    x0 = np.floor(sx).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (sy - y0)[:, None]
    fx = (sx - x0)[None, :]
    top = img[np.ix_(y0, x0)] * (1.0 - fx) + img[np.ix_(y0, x1)] * fx
    bot = img[np.ix_(y1, x0)] * (1.0 - fx) + img[np.ix_(y1, x1)] * fx
    out = top * (1.0 - fy) + bot * fy
    return _clip_to_input(out, img)


# Step dispatch for the configurable preprocessing chain.  A step is a
# mapping with a "type" key; remaining keys are that step's parameters.

def _run_smooth(img, step):
    method = step.get("method", "box")
    kernel = int(step.get("kernel", 7))
    if method == "box":
        return box_smooth(img, kernel)
    if method == "gaussian":
        return gaussian_smooth(img, kernel, float(step.get("sigma", kernel / 3.0)))
    raise ConfigError(f"unknown smoothing method {method!r}")


def _run_bilateral(img, step):
    params = BilateralParams(
        radius=int(step.get("radius", 4)),
        sigma_space=float(step.get("sigma_space", 3.0)),
        sigma_range=float(step.get("sigma_range", 0.3)),
    )
    return bilateral_filter(img, params)


def _run_resize(img, step):
    try:
        return resize(img, int(step["width"]), int(step["height"]))
    except KeyError as exc:
        raise ConfigError(f"resize step requires width and height: missing {exc}") from exc


_STEPS = {"smooth": _run_smooth, "bilateral": _run_bilateral, "resize": _run_resize}

DEFAULT_PREPROCESS_STEPS = (
    {"type": "smooth", "method": "box", "kernel": 7},
    {"type": "bilateral", "radius": 4, "sigma_space": 3.0, "sigma_range": 0.3},
)


def preprocess_pipeline(img: np.ndarray, steps) -> np.ndarray:
    """Apply configured steps in order; inputs here are already grayscale."""
    out = check_gray(img)
    for step in steps:
        kind = step.get("type")
        if kind not in _STEPS:
            raise ConfigError(f"unknown preprocessing step {kind!r}")
        out = _STEPS[kind](out, step)
    return out

"""8-bit grayscale image I/O.

Supported on disk: grayscale PNG and binary PGM (P5).  In memory every
image is a 2-D float64 array with intensities in [0, 1]; masks are 2-D
boolean arrays (nonzero source pixel = True).
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

from .errors import ImageFormatError


def read_gray(path: str | os.PathLike) -> np.ndarray:
    """Load a grayscale image, normalized by the format's max value."""
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "I;16", "I", "1"):
                im = im.convert("L")
            arr = np.asarray(im)
    except (OSError, ValueError) as exc:
        raise ImageFormatError(f"cannot decode image {path!r}: {exc}") from exc
    if arr.ndim != 2:
        raise ImageFormatError(f"{path!r}: expected a single-channel image, got shape {arr.shape}")
    if arr.dtype == np.bool_:
        return arr.astype(np.float64)
    maxval = float(np.iinfo(arr.dtype).max) if arr.dtype.kind == "u" else 65535.0
    if arr.dtype == np.int32:  # PIL "I" mode is 32-bit but carries 16-bit PGM data
        maxval = 65535.0
    return arr.astype(np.float64) / maxval


def read_mask(path: str | os.PathLike) -> np.ndarray:
    """Load a binary mask: 0 = background, any nonzero pixel = tumor."""
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "I;16", "I", "1"):
                im = im.convert("L")
            arr = np.asarray(im)
    except (OSError, ValueError) as exc:
        raise ImageFormatError(f"cannot decode mask {path!r}: {exc}") from exc
    if arr.ndim != 2:
        raise ImageFormatError(f"{path!r}: expected a single-channel mask, got shape {arr.shape}")
    return arr != 0


def write_gray(path: str | os.PathLike, img: np.ndarray) -> None:
    """Write an intensity image in [0, 1] as 8-bit grayscale PNG/PGM."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ImageFormatError(f"expected a 2-D image, got shape {img.shape}")
    q = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(q, mode="L").save(path)


def write_mask(path: str | os.PathLike, mask: np.ndarray) -> None:
    """Write a boolean mask as an 8-bit image (True = 255)."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ImageFormatError(f"expected a 2-D mask, got shape {mask.shape}")
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(path)

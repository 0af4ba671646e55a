"""Grayscale image container and spatial-domain preprocessing.

Images are plain 2D numpy arrays, dtype uint8, shape (height, width),
row-major. Coordinates are (x, y) with x = column and y = row.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import ndimage

from .errors import ConfigError, InputError

GrayImage = np.ndarray  # 2D uint8, shape (h, w)


def as_gray(arr: np.ndarray) -> GrayImage:
    """Validate and return a grayscale working frame."""
    a = np.asarray(arr)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise InputError(f"expected a 2D grayscale image, got shape {a.shape}")
    if a.dtype != np.uint8:
        if not np.issubdtype(a.dtype, np.integer):
            raise InputError(f"grayscale image must be 8-bit integer, got dtype {a.dtype}")
        if a.min() < 0 or a.max() > 255:
            raise InputError("grayscale intensities must lie in [0, 255]")
        a = a.astype(np.uint8)
    return a


@dataclass(frozen=True)
class RoiRect:
    """Axis-aligned crop rectangle, top-left corner (x, y), extent (w, h)."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise InputError(f"ROI extent must be positive, got {self.w}x{self.h}")
        if self.x < 0 or self.y < 0:
            raise InputError(f"ROI corner must be non-negative, got ({self.x}, {self.y})")

    def check_within(self, width: int, height: int) -> None:
        if self.x + self.w > width or self.y + self.h > height:
            raise InputError(
                f"ROI {self.x},{self.y},{self.w}x{self.h} exceeds image bounds {width}x{height}"
            )


@dataclass(frozen=True)
class StructuringElement:
    """Flat structuring element for grayscale morphology.

    shape: "cross" or "square"; radius in pixels, footprint side = 2*radius + 1.
    """

    shape: str = "cross"
    radius: int = 1

    def __post_init__(self):
        if self.shape not in ("cross", "square"):
            raise ConfigError(f"unknown structuring element shape {self.shape!r}")
        if self.radius < 1:
            raise ConfigError(f"structuring element radius must be >= 1, got {self.radius}")

    def footprint(self) -> np.ndarray:
        n = 2 * self.radius + 1
        if self.shape == "square":
            return np.ones((n, n), dtype=bool)
        fp = np.zeros((n, n), dtype=bool)
        fp[self.radius, :] = True
        fp[:, self.radius] = True
        return fp


def to_grayscale(rgb_frame: np.ndarray) -> GrayImage:
    """Convert an interleaved 8-bit RGB raster to grayscale.

    BT.601 luma, y = round(0.299 R + 0.587 G + 0.114 B), computed in exact
    integer arithmetic with half-up rounding.
    """
    a = np.asarray(rgb_frame)
    if a.ndim != 3 or a.shape[2] != 3:
        raise InputError(f"expected an (h, w, 3) RGB raster, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise InputError(f"RGB raster dimensions must be positive, got shape {a.shape}")
    if a.dtype != np.uint8:
        raise InputError(f"RGB raster must be uint8, got dtype {a.dtype}")
    a32 = a.astype(np.uint32)
    y = (299 * a32[:, :, 0] + 587 * a32[:, :, 1] + 114 * a32[:, :, 2] + 500) // 1000
    return np.minimum(y, 255).astype(np.uint8)


def crop(img: GrayImage, roi: RoiRect) -> GrayImage:
    """Extract the ROI sub-rectangle as a copy."""
    img = as_gray(img)
    h, w = img.shape
    roi.check_within(w, h)
    return img[roi.y : roi.y + roi.h, roi.x : roi.x + roi.w].copy()


@njit(cache=True)
def _median_u8(padded, k, out):  # pragma: no cover - exercised via median_blur
    # Huang sliding-histogram median: per row, slide a kxk window column-wise,
    # maintaining a 256-bin histogram and the count of values below the
    # current median. O(k) updates per pixel, exact for uint8.
    h, w = out.shape
    t = (k * k) // 2 + 1  # 1-based rank of the median in the window
    hist = np.zeros(256, dtype=np.int32)
    for y in range(h):
        hist[:] = 0
        for j in range(k):
            for i in range(k):
                hist[padded[y + j, i]] += 1
        m = 0
        below = 0
        while below + hist[m] < t:
            below += hist[m]
            m += 1
        out[y, 0] = m
        for x in range(1, w):
            for j in range(k):
                v = padded[y + j, x - 1]
                hist[v] -= 1
                if v < m:
                    below -= 1
                v = padded[y + j, x + k - 1]
                hist[v] += 1
                if v < m:
                    below += 1
            if below >= t:
                while below >= t:
                    m -= 1
                    below -= hist[m]
            else:
                while below + hist[m] < t:
                    below += hist[m]
                    m += 1
            out[y, x] = m
    return out


def median_blur(img: GrayImage, k: int) -> GrayImage:
    """Median filter with a kxk window; borders handled by edge replication."""
    img = as_gray(img)
    if k < 1 or k % 2 == 0:
        raise ConfigError(f"median blur kernel must be odd and positive, got {k}")
    h, w = img.shape
    if k > min(w, h):
        raise ConfigError(f"median blur kernel {k} exceeds image extent {w}x{h}")
    if k == 1:
        return img.copy()
    r = k // 2
    padded = np.pad(img, r, mode="edge")
    out = np.empty_like(img)
    _median_u8(padded, k, out)
    return out


def morph_open(img: GrayImage, se: StructuringElement) -> GrayImage:
    """Grayscale opening: window minimum then window maximum over the footprint.

    Each stage replicates its own input at the borders; the composition is
    anti-extensive and idempotent.
    """
    img = as_gray(img)
    h, w = img.shape
    n = 2 * se.radius + 1
    if n > min(w, h):
        raise ConfigError(f"structuring element footprint {n}x{n} exceeds image extent {w}x{h}")
    fp = se.footprint()
    eroded = ndimage.grey_erosion(img, footprint=fp, mode="nearest")
    return ndimage.grey_dilation(eroded, footprint=fp, mode="nearest")

"""Canny edge detection on grayscale frames.

Produces a boolean edge map (2D bool array, same shape as the input).
The pipeline exposes a single threshold knob; the low hysteresis threshold
defaults to half of it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError, InputError
from .raster import GrayImage, as_gray

EdgeMap = np.ndarray  # 2D bool, shape (h, w)

# Sector boundaries for quantizing the gradient direction into 4 bins.
_TAN_22_5 = math.tan(math.pi / 8)
_TAN_67_5 = math.tan(3 * math.pi / 8)


@dataclass(frozen=True)
class CannyConfig:
    """Hysteresis thresholds on the Sobel gradient magnitude."""

    t_high: float
    t_low: float

    def __post_init__(self):
        if not 0 < self.t_low <= self.t_high:
            raise ConfigError(
                f"need 0 < t_low <= t_high, got t_low={self.t_low}, t_high={self.t_high}"
            )

    @classmethod
    def from_threshold(cls, t_canny: float, ratio: float = 2.0) -> "CannyConfig":
        """Single-knob constructor: t_high = t_canny, t_low = t_canny / ratio."""
        return cls(t_high=float(t_canny), t_low=float(t_canny) / ratio)


@njit(cache=True)
def _grad_mag_sector(img):  # pragma: no cover - exercised via canny
    # 3x3 Sobel with replicated borders; per pixel stores the float gradient
    # magnitude and the quantized direction sector:
    # 0 = east-west, 1 = north-south, 2 = down-right diagonal, 3 = down-left.
    h, w = img.shape
    mag = np.zeros((h, w), np.float32)
    sector = np.zeros((h, w), np.uint8)
    for y in range(h):
        ym = y - 1 if y > 0 else 0
        yp = y + 1 if y < h - 1 else h - 1
        for x in range(w):
            xm = x - 1 if x > 0 else 0
            xp = x + 1 if x < w - 1 else w - 1
            a = np.int32(img[ym, xm])
            b = np.int32(img[ym, x])
            c = np.int32(img[ym, xp])
            d = np.int32(img[y, xm])
            f = np.int32(img[y, xp])
            g = np.int32(img[yp, xm])
            hh = np.int32(img[yp, x])
            i = np.int32(img[yp, xp])
            gx = (c + 2 * f + i) - (a + 2 * d + g)
            gy = (g + 2 * hh + i) - (a + 2 * b + c)
            mag[y, x] = math.sqrt(float(gx * gx + gy * gy))
            agx = abs(gx)
            agy = abs(gy)
            if agy <= _TAN_22_5 * agx:
                sector[y, x] = 0
            elif agy >= _TAN_67_5 * agx:
                sector[y, x] = 1
            elif gx * gy > 0:
                sector[y, x] = 2
            else:
                sector[y, x] = 3
    return mag, sector


@njit(cache=True)
def _nms(mag, sector):  # pragma: no cover - exercised via canny
    # Directional local maximum; ties resolved toward the neighbor in the
    # earlier scan position so step edges stay 1 px wide. Out-of-frame
    # neighbors count as zero magnitude.
    h, w = mag.shape
    keep = np.zeros((h, w), np.bool_)
    for y in range(h):
        for x in range(w):
            m = mag[y, x]
            if m <= 0.0:
                continue
            s = sector[y, x]
            if s == 0:
                n1 = mag[y, x - 1] if x > 0 else 0.0
                n2 = mag[y, x + 1] if x < w - 1 else 0.0
            elif s == 1:
                n1 = mag[y - 1, x] if y > 0 else 0.0
                n2 = mag[y + 1, x] if y < h - 1 else 0.0
            elif s == 2:
                n1 = mag[y - 1, x - 1] if y > 0 and x > 0 else 0.0
                n2 = mag[y + 1, x + 1] if y < h - 1 and x < w - 1 else 0.0
            else:
                n1 = mag[y - 1, x + 1] if y > 0 and x < w - 1 else 0.0
                n2 = mag[y + 1, x - 1] if y < h - 1 and x > 0 else 0.0
            if m > n1 and m >= n2:
                keep[y, x] = True
    return keep


@njit(cache=True)
def _hysteresis(mag, keep, t_low, t_high):  # pragma: no cover - exercised via canny
    # Flood fill over the weak set (mag >= t_low) from all strong seeds
    # (mag >= t_high), 8-connected. Output is independent of seed order.
    h, w = mag.shape
    out = np.zeros((h, w), np.bool_)
    stack_y = np.empty(h * w, np.int32)
    stack_x = np.empty(h * w, np.int32)
    top = 0
    for y in range(h):
        for x in range(w):
            if not (keep[y, x] and mag[y, x] >= t_high) or out[y, x]:
                continue
            out[y, x] = True
            stack_y[top] = y
            stack_x[top] = x
            top += 1
            while top > 0:
                top -= 1
                cy = stack_y[top]
                cx = stack_x[top]
                for dy in range(-1, 2):
                    ny = cy + dy
                    if ny < 0 or ny >= h:
                        continue
                    for dx in range(-1, 2):
                        nx = cx + dx
                        if nx < 0 or nx >= w or out[ny, nx]:
                            continue
                        if keep[ny, nx] and mag[ny, nx] >= t_low:
                            out[ny, nx] = True
                            stack_y[top] = ny
                            stack_x[top] = nx
                            top += 1
    return out


def canny(img: GrayImage, cfg: CannyConfig) -> EdgeMap:
    """Canny edge detector: 3x3 Sobel, float magnitude, 4-direction
    non-maximum suppression, dual-threshold hysteresis.

    A pixel survives iff it is a directional local maximum of the gradient
    magnitude, its magnitude is >= t_low, and it is 8-connected
    (transitively) to a pixel with magnitude >= t_high. No smoothing is
    applied here; blur is a separate pipeline stage.
    """
    img = as_gray(img)
    h, w = img.shape
    if h < 3 or w < 3:
        raise InputError(f"canny needs at least a 3x3 image, got {w}x{h}")
    mag, sector = _grad_mag_sector(img)
    keep = _nms(mag, sector)
    return _hysteresis(mag, keep, np.float32(cfg.t_low), np.float32(cfg.t_high))


def edge_map_to_gray(edges: EdgeMap) -> GrayImage:
    """Edge map as an 8-bit raster (0 background / 255 edge) for debug dumps."""
    edges = np.asarray(edges)
    if edges.ndim != 2 or edges.dtype != np.bool_:
        raise InputError(f"expected a 2D boolean edge map, got {edges.dtype} {edges.shape}")
    return edges.astype(np.uint8) * 255

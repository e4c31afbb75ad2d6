"""Image preprocessing shared by the detector, classifier and contour stages.

All operations take and return uint8 arrays: shape (H, W) for grayscale,
(H, W, 3) for RGB.  Gradients are kept as 16-bit signed integers since the
source material is 8-bit video frames.  Convolutions clamp to the edge so
wheel crops touching the frame border do not pick up dark halos.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


def _check_image(img: np.ndarray, gray: bool = False) -> None:
    if not isinstance(img, np.ndarray) or img.dtype != np.uint8:
        raise ValueError("expected a uint8 numpy image")
    if img.ndim == 2:
        return
    if img.ndim == 3 and img.shape[2] == 3 and not gray:
        return
    raise ValueError(f"unsupported image shape {img.shape} (want HxW or HxWx3)")


def _round_u8(arr: np.ndarray) -> np.ndarray:
    # Half-up rounding, so a 127.5 block mean lands on 128.
    return np.floor(np.clip(arr, 0.0, 255.0) + 0.5).astype(np.uint8)


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """BT.601 luma conversion; 1-channel input is returned unchanged."""
    _check_image(img)
    if img.ndim == 2:
        return img.copy()
    luma = (
        0.299 * img[:, :, 0].astype(np.float64)
        + 0.587 * img[:, :, 1]
        + 0.114 * img[:, :, 2]
    )
    return _round_u8(luma)


def downscale(img: np.ndarray, factor: int) -> np.ndarray:
    """Box-filter downscale by an integer factor; trailing rows/cols are dropped."""
    _check_image(img)
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise ValueError(f"downscale factor must be an integer >= 1, got {factor!r}")
    if factor == 1:
        return img.copy()
    h, w = img.shape[:2]
    h2, w2 = h // factor, w // factor
    if h2 == 0 or w2 == 0:
        raise ValueError(f"image {w}x{h} too small for factor {factor}")
    trimmed = img[: h2 * factor, : w2 * factor]
    if img.ndim == 2:
        blocks = trimmed.reshape(h2, factor, w2, factor)
        means = blocks.astype(np.float64).mean(axis=(1, 3))
    else:
        blocks = trimmed.reshape(h2, factor, w2, factor, img.shape[2])
        means = blocks.astype(np.float64).mean(axis=(1, 3))
    return _round_u8(means)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian with radius ceil(3*sigma)."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _convolve_axis(data: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = len(kernel) // 2
    pad = [(0, 0)] * data.ndim
    pad[axis] = (radius, radius)
    padded = np.pad(data, pad, mode="edge")
    out = np.zeros_like(data)
    idx = [slice(None)] * data.ndim
    n = data.shape[axis]
    for i, kv in enumerate(kernel):
        idx[axis] = slice(i, i + n)
        out += kv * padded[tuple(idx)]
    return out


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian smoothing with clamp-to-edge boundary handling."""
    _check_image(img)
    kernel = gaussian_kernel(sigma)
    data = img.astype(np.float64)
    data = _convolve_axis(data, kernel, axis=0)
    data = _convolve_axis(data, kernel, axis=1)
    return _round_u8(data)


@dataclass(frozen=True)
class GradientField:
    """Per-pixel Sobel derivatives plus derived magnitude and orientation.

    Orientation is folded to [0, pi) for unsigned-gradient use; pixels with
    zero magnitude carry orientation 0.
    """

    gx: np.ndarray  # int16
    gy: np.ndarray  # int16
    magnitude: np.ndarray  # float32
    orientation: np.ndarray  # float32, [0, pi)


def sobel_gradients(img: np.ndarray) -> GradientField:
    """3x3 Sobel derivatives of a grayscale image (clamp-to-edge borders)."""
    _check_image(img, gray=True)
    padded = np.pad(img.astype(np.int32), 1, mode="edge")
    # Horizontal derivative: [[-1,0,1],[-2,0,2],[-1,0,1]] correlation.
    right = padded[:, 2:]
    left = padded[:, :-2]
    dx = right - left
    gx = dx[:-2, :] + 2 * dx[1:-1, :] + dx[2:, :]
    # Vertical derivative: transpose of the kernel above.
    down = padded[2:, :]
    up = padded[:-2, :]
    dy = down - up
    gy = dy[:, :-2] + 2 * dy[:, 1:-1] + dy[:, 2:]
    gxf = gx.astype(np.float32)
    gyf = gy.astype(np.float32)
    magnitude = np.hypot(gxf, gyf)
    orientation = np.arctan2(gyf, gxf).astype(np.float32)
    orientation[orientation < 0] += np.float32(math.pi)
    orientation[orientation >= np.float32(math.pi)] = 0.0
    orientation[magnitude == 0] = 0.0
    return GradientField(
        gx=gx.astype(np.int16),
        gy=gy.astype(np.int16),
        magnitude=magnitude,
        orientation=orientation,
    )


class OtsuResult(NamedTuple):
    threshold: int
    binary: np.ndarray
    degenerate: bool


def otsu_threshold(img: np.ndarray) -> OtsuResult:
    """Global threshold maximizing between-class variance of the 256-bin histogram.

    The binary output holds 255 where pixel > threshold, else 0.  Ties are
    broken toward the smallest maximizing threshold.  A constant image is
    degenerate: its value is returned as the threshold with an all-zero
    binary and the flag set.
    """
    _check_image(img, gray=True)
    hist = np.bincount(img.ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    w0 = np.cumsum(hist)
    m0 = np.cumsum(hist * np.arange(256))
    w1 = total - w0
    valid = (w0 > 0) & (w1 > 0)
    if not valid.any():
        value = int(img.flat[0])
        return OtsuResult(value, np.zeros_like(img), True)
    mean0 = np.divide(m0, w0, out=np.zeros(256), where=w0 > 0)
    mean1 = np.divide(m0[-1] - m0, w1, out=np.zeros(256), where=w1 > 0)
    between = np.where(valid, w0 * w1 * (mean0 - mean1) ** 2, -1.0)
    threshold = int(np.argmax(between))
    binary = np.where(img > threshold, 255, 0).astype(np.uint8)
    return OtsuResult(threshold, binary, False)

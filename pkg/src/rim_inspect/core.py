"""Geometric primitives and the rim label space shared by every pipeline stage.

Boxes are stored as (x, y, w, h) in pixels with a top-left origin; normalized
coordinates exist only at the annotation-file boundary.  Images are plain
``numpy`` arrays of dtype uint8, shape (H, W) for grayscale or (H, W, 3) for
RGB; no wrapper class is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

# Rim label space: id 0 is the occluded/unclassifiable category, ids 1..21
# are concrete rim designs.
NUM_RIM_CLASSES = 22
OCCLUDED_CLASS = 0


class Label(str, Enum):
    """Object categories produced by the detection stages."""

    CAR = "car"
    WHEEL = "wheel"
    BOLT = "bolt"
    RIM = "rim"


def _require_finite(name, *values):
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name}: non-finite value {v!r}")


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: top-left corner (x, y), positive width/height."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        _require_finite("BBox", self.x, self.y, self.w, self.h)
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"BBox needs positive size, got w={self.w}, h={self.h}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    def contains(self, px: float, py: float) -> bool:
        return self.x <= px <= self.x + self.w and self.y <= py <= self.y + self.h


@dataclass(frozen=True)
class Circle:
    """Circle hypothesis with a detection score in [0, 1]."""

    cx: float
    cy: float
    r: float
    score: float = 1.0

    def __post_init__(self):
        _require_finite("Circle", self.cx, self.cy, self.r, self.score)
        if self.r <= 0:
            raise ValueError(f"Circle needs r > 0, got {self.r}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"Circle score must be in [0,1], got {self.score}")


@dataclass(frozen=True)
class Ellipse:
    """Ellipse in canonical form: a >= b > 0 and theta in [0, pi).

    The constructor canonicalizes its arguments: if the semi-major axis is
    given smaller than the semi-minor one, the axes are swapped and theta is
    rotated by pi/2; theta is always reduced modulo pi.
    """

    cx: float
    cy: float
    a: float
    b: float
    theta: float = 0.0

    def __post_init__(self):
        _require_finite("Ellipse", self.cx, self.cy, self.a, self.b, self.theta)
        a, b, theta = self.a, self.b, self.theta
        if a < b:
            a, b = b, a
            theta += math.pi / 2.0
        theta = theta % math.pi
        if b <= 0:
            raise ValueError(f"Ellipse needs a >= b > 0, got a={self.a}, b={self.b}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "theta", theta)

    @property
    def eccentricity(self) -> float:
        return math.sqrt(max(0.0, 1.0 - (self.b / self.a) ** 2))


@dataclass(frozen=True)
class Conic:
    """Coefficients of A x^2 + B xy + C y^2 + D x + E y + F = 0."""

    A: float
    B: float
    C: float
    D: float
    E: float
    F: float

    def __post_init__(self):
        _require_finite("Conic", self.A, self.B, self.C, self.D, self.E, self.F)
        if self.A == 0.0 and self.B == 0.0 and self.C == 0.0:
            raise ValueError("Conic quadratic part is identically zero")

    @property
    def ellipse_discriminant(self) -> float:
        return self.B * self.B - 4.0 * self.A * self.C

    def is_ellipse(self) -> bool:
        return self.ellipse_discriminant < 0.0


@dataclass(frozen=True)
class Detection:
    """Scored localization of one object in one frame."""

    frame: int
    label: Label
    bbox: BBox
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"Detection score must be in [0,1], got {self.score}")


def iou(a: BBox, b: BBox) -> float:
    """Intersection-over-union of two boxes; 0 when disjoint, 1 when equal."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def crop_square(img: np.ndarray, box: BBox, out: int) -> np.ndarray:
    """Crop a square of side max(w, h) centered on `box` and resample to out x out.

    Regions outside the source image are filled with black, so boxes that
    overhang the frame produce crops with black bands instead of failing.
    Resampling is bilinear; when the source square is exactly `out` pixels
    wide and pixel-aligned, the result is a pixel-identical copy.

    Raises ValueError if `out` is not positive or the box lies entirely
    outside the image.
    """
    if out <= 0:
        raise ValueError(f"output side must be positive, got {out}")
    if img.dtype != np.uint8:
        raise ValueError("expected a uint8 image")
    h, w = img.shape[:2]
    if box.x >= w or box.y >= h or box.x + box.w <= 0 or box.y + box.h <= 0:
        raise ValueError("box lies entirely outside the image")

    side = max(box.w, box.h)
    cx, cy = box.center
    scale = side / out
    # Output pixel centers mapped into source coordinates.
    xs = (cx - side / 2.0) + (np.arange(out) + 0.5) * scale - 0.5
    ys = (cy - side / 2.0) + (np.arange(out) + 0.5) * scale - 0.5

    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = (xs - x0).astype(np.float64)
    fy = (ys - y0).astype(np.float64)

    planes = img[..., None] if img.ndim == 2 else img
    acc = np.zeros((out, out, planes.shape[2]), dtype=np.float64)
    for dy, wy in ((0, 1.0 - fy), (1, fy)):
        yy = y0 + dy
        in_y = (yy >= 0) & (yy < h)
        yc = np.clip(yy, 0, h - 1)
        for dx, wx in ((0, 1.0 - fx), (1, fx)):
            xx = x0 + dx
            in_x = (xx >= 0) & (xx < w)
            xc = np.clip(xx, 0, w - 1)
            weight = (wy * in_y)[:, None] * (wx * in_x)[None, :]
            acc += weight[..., None] * planes[np.ix_(yc, xc)].astype(np.float64)
    result = np.floor(acc + 0.5).astype(np.uint8)
    return result[..., 0] if img.ndim == 2 else result


def ellipse_to_conic(e: Ellipse) -> Conic:
    """Implicit conic of an ellipse, scaled so that 4AC - B^2 = 1."""
    ct, st = math.cos(e.theta), math.sin(e.theta)
    ia2, ib2 = 1.0 / (e.a * e.a), 1.0 / (e.b * e.b)
    # Quadratic form Q = R diag(1/a^2, 1/b^2) R^T
    q00 = ct * ct * ia2 + st * st * ib2
    q01 = ct * st * (ia2 - ib2)
    q11 = st * st * ia2 + ct * ct * ib2
    A = q00
    B = 2.0 * q01
    C = q11
    D = -2.0 * (q00 * e.cx + q01 * e.cy)
    E = -2.0 * (q01 * e.cx + q11 * e.cy)
    F = q00 * e.cx * e.cx + 2.0 * q01 * e.cx * e.cy + q11 * e.cy * e.cy - 1.0
    s = (e.a * e.b) / 2.0  # makes 4AC - B^2 exactly 1
    return Conic(A * s, B * s, C * s, D * s, E * s, F * s)


def conic_to_parametric(c: Conic) -> Ellipse:
    """Center, semi-axes and rotation of an ellipse given in implicit form.

    Raises ValueError when the conic is not an ellipse (B^2 - 4AC >= 0) or
    has no real points.
    """
    disc = c.ellipse_discriminant
    if disc >= 0.0:
        raise ValueError(f"conic is not an ellipse (B^2-4AC = {disc})")
    A, B, C, D, E, F = c.A, c.B, c.C, c.D, c.E, c.F
    cx = (2.0 * C * D - B * E) / disc
    cy = (2.0 * A * E - B * D) / disc
    # Constant term after translating the center to the origin.
    fc = A * cx * cx + B * cx * cy + C * cy * cy + D * cx + E * cy + F
    if fc == 0.0:
        raise ValueError("degenerate conic: single point")
    if fc > 0.0:
        A, B, C, fc = -A, -B, -C, -fc
    # Eigen-decomposition of the 2x2 quadratic part.
    half_tr = (A + C) / 2.0
    root = math.hypot((A - C) / 2.0, B / 2.0)
    lam_min = half_tr - root
    lam_max = half_tr + root
    if lam_min <= 0.0:
        raise ValueError("conic has no bounded real solution set")
    a = math.sqrt(-fc / lam_min)
    b = math.sqrt(-fc / lam_max)
    # Major-axis direction: eigenvector of the smaller eigenvalue.
    vx, vy = B / 2.0, lam_min - A
    if vx * vx + vy * vy < (lam_min - C) ** 2 + (B / 2.0) ** 2:
        vx, vy = lam_min - C, B / 2.0
    theta = math.atan2(vy, vx) if (vx != 0.0 or vy != 0.0) else 0.0
    return Ellipse(cx, cy, a, b, theta)

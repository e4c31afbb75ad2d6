"""Memory-lean circle Hough transform for wheel and bolt candidates.

Votes are cast only along the gradient direction of each edge pixel, and the
radius loop reuses a single 2-D center accumulator: the full 3-D (cx, cy, r)
volume is never materialized, so peak accumulator memory stays O(W*H) no
matter how wide the radius range is.  Accumulated votes are pooled over a
3x3 neighborhood before thresholding, which grants the detector +-1 px of
center tolerance against gradient quantization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BBox, Circle, Detection, Label
from .imgproc import sobel_gradients


@dataclass(frozen=True)
class HoughConfig:
    """Search-space and scoring parameters.

    accumulator_threshold is a fraction of the circle circumference: a
    candidate of radius r needs at least accumulator_threshold * 2*pi*r
    votes.  That keeps the vote bar radius-independent.
    """

    r_min: int
    r_max: int
    edge_threshold: float = 120.0
    accumulator_threshold: float = 0.40
    nms_center_dist: float = 10.0
    nms_radius_dist: float = 12.0
    max_results: int = 16

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise ValueError(f"need 0 < r_min < r_max, got {self.r_min}, {self.r_max}")
        if self.edge_threshold <= 0 or self.accumulator_threshold <= 0:
            raise ValueError("thresholds must be positive")
        if self.accumulator_threshold > 1.0:
            raise ValueError("accumulator_threshold is a fraction in (0, 1]")


# Defaults for wheel search on FullHD frames downscaled by 4 (480x270):
# wheel radii land in roughly 10..60 px there.
WHEEL_CONFIG = HoughConfig(r_min=10, r_max=60)


def bolt_config(side: int) -> HoughConfig:
    """Bolt-head search preset for a square wheel crop of the given side."""
    r_min = max(2, int(round(0.02 * side)))
    r_max = max(r_min + 1, int(round(0.06 * side)))
    return HoughConfig(
        r_min=r_min,
        r_max=r_max,
        edge_threshold=80.0,
        accumulator_threshold=0.25,
        nms_center_dist=max(4.0, 0.03 * side),
        nms_radius_dist=4.0,
        max_results=12,
    )


def _pooled_at(acc: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """3x3 neighborhood sums of `acc` at the given cells (zero beyond borders)."""
    h, w = acc.shape
    total = np.zeros(len(ys), dtype=acc.dtype)
    for dy in (-1, 0, 1):
        yy = ys + dy
        oky = (yy >= 0) & (yy < h)
        for dx in (-1, 0, 1):
            xx = xs + dx
            ok = oky & (xx >= 0) & (xx < w)
            total[ok] += acc[yy[ok], xx[ok]]
    return total


def detect_circles(
    gray: np.ndarray, cfg: HoughConfig, stats: dict | None = None
) -> list[Circle]:
    """Detect circles in a preprocessed grayscale image, best score first.

    The caller is expected to have done any downscaling/blurring; this
    routine goes straight to Sobel edges.  When `stats` is given it is
    filled with instrumentation: accumulator plane size in bytes, number of
    radii scanned and edge-pixel count.
    """
    if gray.ndim != 2 or gray.dtype != np.uint8:
        raise ValueError("expected a uint8 grayscale image")
    h, w = gray.shape
    if cfg.r_max > math.hypot(w, h) / 2.0:
        raise ValueError(
            f"r_max={cfg.r_max} exceeds image half-diagonal {math.hypot(w, h) / 2:.1f}"
        )

    grad = sobel_gradients(gray)
    edge_mask = grad.magnitude >= cfg.edge_threshold
    ys, xs = np.nonzero(edge_mask)
    acc_bytes = 0
    candidates: list[tuple[float, int, int, int]] = []  # (score, r, cy, cx)

    if len(xs) > 0:
        mag = grad.magnitude[ys, xs]
        ux = grad.gx[ys, xs].astype(np.float32) / mag
        uy = grad.gy[ys, xs].astype(np.float32) / mag
        xf = xs.astype(np.float32)
        yf = ys.astype(np.float32)

        for r in range(cfg.r_min, cfg.r_max + 1):
            min_votes = cfg.accumulator_threshold * 2.0 * math.pi * r
            if 2 * len(xs) < min_votes:
                continue
            # Vote toward and away from the gradient: bright-on-dark and
            # dark-on-bright circles both land on their centers.
            vx = np.concatenate([xf - r * ux, xf + r * ux])
            vy = np.concatenate([yf - r * uy, yf + r * uy])
            cxi = np.floor(vx + 0.5).astype(np.int64)
            cyi = np.floor(vy + 0.5).astype(np.int64)
            keep = (cxi >= 0) & (cxi < w) & (cyi >= 0) & (cyi < h)
            if keep.sum() < min_votes:
                continue
            flat = cyi[keep] * w + cxi[keep]
            acc = np.bincount(flat, minlength=h * w).reshape(h, w)
            acc_bytes = max(acc_bytes, acc.nbytes)
            # A 3x3 pooled peak >= min_votes needs one cell >= min_votes/9;
            # only voted cells can qualify, so gather counts at the vote
            # positions instead of scanning the whole plane.
            hot = flat[acc.reshape(-1)[flat] >= min_votes / 9.0]
            if len(hot) == 0:
                continue
            cells = np.unique(hot)
            py, px = cells // w, cells % w
            votes = _pooled_at(acc, py, px)
            above = votes >= min_votes
            for v, yy, xx in zip(
                votes[above].tolist(), py[above].tolist(), px[above].tolist()
            ):
                score = min(1.0, v / (2.0 * math.pi * r))
                candidates.append((score, r, yy, xx))

    if stats is not None:
        stats["accumulator_bytes"] = acc_bytes
        stats["radii"] = cfg.r_max - cfg.r_min + 1
        stats["edge_pixels"] = int(len(xs))

    # Non-maximum suppression: highest score first (geometry tie-break),
    # suppressed candidates refine the keeper's center/radius as a
    # score-weighted mean, which lands annulus detections mid-stroke.
    candidates.sort(key=lambda c: (-c[0], c[1], c[2], c[3]))
    kept: list[list] = []  # [score, sum_w, sum_wx, sum_wy, sum_wr, cx, cy, r]
    for score, r, cy, cx in candidates:
        merged = False
        for k in kept:
            if (
                math.hypot(cx - k[5], cy - k[6]) <= cfg.nms_center_dist
                and abs(r - k[7]) <= cfg.nms_radius_dist
            ):
                k[1] += score
                k[2] += score * cx
                k[3] += score * cy
                k[4] += score * r
                merged = True
                break
        if not merged:
            kept.append([score, score, score * cx, score * cy, score * r, cx, cy, r])
    kept.sort(key=lambda k: -k[0])
    return [
        Circle(k[2] / k[1], k[3] / k[1], k[4] / k[1], k[0])
        for k in kept[: cfg.max_results]
    ]


def circle_to_detection(c: Circle, scale: int, frame: int = 0) -> Detection:
    """Map a circle found on a downscaled image to a full-resolution wheel box."""
    if scale < 1:
        raise ValueError(f"scale must be >= 1, got {scale}")
    side = 2.0 * c.r * scale
    box = BBox(c.cx * scale - side / 2.0, c.cy * scale - side / 2.0, side, side)
    return Detection(frame=frame, label=Label.WHEEL, bbox=box, score=c.score)


def detect_bolts(crop: np.ndarray, cfg: HoughConfig | None = None) -> list[Circle]:
    """Find bolt-head circles inside the central 60% of a square wheel crop."""
    side = crop.shape[0]
    if cfg is None:
        cfg = bolt_config(side)
    lo, hi = 0.2 * side, 0.8 * side
    circles = detect_circles(crop, cfg)
    return [c for c in circles if lo <= c.cx <= hi and lo <= c.cy <= hi]

"""Rim-size estimation from two fitted ellipses.

The wheel crop is binarized, the rim contour is sampled by casting rays
inward from the image borders, and both the rim contour and the circle
through the bolt centers are fitted with the numerically stable direct
least-squares ellipse fit of Halir & Flusser (WSCG 1998).  The bolt pitch
circle has a known physical diameter (112 mm on the cars inspected here),
which anchors the pixel-to-millimeter conversion.

Under orthographic projection, concentric coplanar circles map to ellipses
whose major axes are unaffected by tilt, so the major-axis ratio of the two
fitted ellipses equals the true diameter ratio.  This is the geometric fact
the estimator rests on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BBox, Conic, Detection, Ellipse, Label, conic_to_parametric
from .imgproc import gaussian_blur, otsu_threshold


class FitError(ValueError):
    """Degenerate input or numerical failure of an ellipse fit."""


class InsufficientBoltsError(FitError):
    """Fewer bolt detections than needed for a pitch-circle fit."""


@dataclass(frozen=True)
class RaycastConfig:
    """Ray layout: rays_per_edge rays per image edge, centered on the edge
    midpoint, spaced by `spacing` times the edge length."""

    spacing: float = 0.10
    rays_per_edge: int = 9

    def __post_init__(self):
        if not 0.0 < self.spacing <= 0.5:
            raise ValueError(f"spacing must be in (0, 0.5], got {self.spacing}")
        if self.rays_per_edge < 1:
            raise ValueError("rays_per_edge must be >= 1")


@dataclass(frozen=True)
class PitchCircleSpec:
    """Physical constants of the bolt circle used as the metric anchor."""

    diameter_mm: float = 112.0
    bolt_count: int = 5

    def __post_init__(self):
        if self.diameter_mm <= 0:
            raise ValueError("pitch diameter must be positive")
        if self.bolt_count < 5:
            raise ValueError("a unique conic needs at least 5 bolt centers")


@dataclass(frozen=True)
class SizeEstimate:
    rim: Ellipse
    pitch: Ellipse
    diameter_mm: float
    confidence: float

    def __post_init__(self):
        if self.diameter_mm <= 0:
            raise ValueError("estimated diameter must be positive")
        if self.rim.a < self.pitch.a:
            raise ValueError("rim ellipse must enclose the pitch ellipse")


def fit_ellipse_direct(points) -> Conic:
    """Direct least-squares ellipse fit (Halir-Flusser formulation).

    The design matrix is split into quadratic and linear blocks and the
    constrained problem reduced to a 3x3 eigenproblem whose solution always
    satisfies the ellipse constraint 4AC - B^2 > 0.  Input points are
    centered and isotropically scaled internally; the returned conic is in
    the original coordinates, normalized so that 4AC - B^2 = 1.

    Raises FitError for fewer than 5 points, collinear/coincident points or
    eigen-solver failure.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise FitError(f"expected an (n, 2) point array, got {pts.shape}")
    n = len(pts)
    if n < 5:
        raise FitError(f"need at least 5 points, got {n}")
    if not np.isfinite(pts).all():
        raise FitError("points contain NaN or infinity")

    mean = pts.mean(axis=0)
    centered = pts - mean
    scale = math.sqrt(float((centered**2).sum(axis=1).mean()))
    if scale == 0.0:
        raise FitError("all points coincide")
    x = centered[:, 0] / scale
    y = centered[:, 1] / scale

    d1 = np.column_stack([x * x, x * y, y * y])
    d2 = np.column_stack([x, y, np.ones(n)])
    s1 = d1.T @ d1
    s2 = d1.T @ d2
    s3 = d2.T @ d2
    try:
        t = -np.linalg.solve(s3, s2.T)
        m = s1 + s2 @ t
        # Apply inv(C1) for constraint matrix C1 = [[0,0,2],[0,-1,0],[2,0,0]].
        m = np.vstack([m[2] / 2.0, -m[1], m[0] / 2.0])
        eigvals, eigvecs = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise FitError(f"degenerate point configuration: {exc}") from exc

    best = None
    for i in range(3):
        if abs(eigvals[i].imag) > 1e-8 * (1.0 + abs(eigvals[i].real)):
            continue
        a1 = eigvecs[:, i].real
        cond = 4.0 * a1[0] * a1[2] - a1[1] ** 2
        if cond > 0 and (best is None or cond > best[0]):
            best = (cond, a1)
    if best is None:
        raise FitError("no eigenvector satisfies the ellipse constraint")
    a1 = best[1]
    a2 = t @ a1
    qa, qb, qc, qd, qe, qf = a1[0], a1[1], a1[2], a2[0], a2[1], a2[2]

    # Undo the normalization via the conic's 3x3 matrix form.
    q = np.array(
        [
            [qa, qb / 2.0, qd / 2.0],
            [qb / 2.0, qc, qe / 2.0],
            [qd / 2.0, qe / 2.0, qf],
        ]
    )
    inv_t = np.array(
        [
            [1.0 / scale, 0.0, -mean[0] / scale],
            [0.0, 1.0 / scale, -mean[1] / scale],
            [0.0, 0.0, 1.0],
        ]
    )
    qo = inv_t.T @ q @ inv_t
    A, B, C = qo[0, 0], 2.0 * qo[0, 1], qo[1, 1]
    D, E, F = 2.0 * qo[0, 2], 2.0 * qo[1, 2], qo[2, 2]
    k = 4.0 * A * C - B * B
    if k <= 0 or not math.isfinite(k):
        raise FitError("fit collapsed to a non-ellipse conic")
    s = 1.0 / math.sqrt(k)
    if A + C < 0:
        s = -s
    return Conic(A * s, B * s, C * s, D * s, E * s, F * s)


def fit_ellipse(points) -> Ellipse:
    """Convenience wrapper: direct fit followed by parametric conversion."""
    try:
        return conic_to_parametric(fit_ellipse_direct(points))
    except ValueError as exc:
        raise FitError(str(exc)) from exc


def raycast_contour(binary: np.ndarray, cfg: RaycastConfig | None = None) -> list[tuple[float, float]]:
    """Sample a bright contour by casting rays inward from each image edge.

    For every edge, rays start at offsets centered on the edge midpoint
    (spacing * edge length apart), travel perpendicular into the image and
    record the first white pixel (value >= 128).  Rays that cross the whole
    image without a hit contribute nothing.  Points are returned in edge
    order top, right, bottom, left, offsets ascending, as (x, y) pixel
    coordinates.
    """
    if binary.ndim != 2 or binary.dtype != np.uint8:
        raise ValueError("expected a uint8 grayscale (binary) image")
    if cfg is None:
        cfg = RaycastConfig()
    h, w = binary.shape
    white = binary >= 128
    points: list[tuple[float, float]] = []
    n = cfg.rays_per_edge
    offsets = (np.arange(n) - (n - 1) / 2.0) * cfg.spacing

    def scan(line: np.ndarray) -> int:
        hits = np.nonzero(line)[0]
        return int(hits[0]) if len(hits) else -1

    # top edge: rays travel down
    for off in offsets * w:
        col = int(round(w / 2.0 + off))
        if not 0 <= col < w:
            continue
        row = scan(white[:, col])
        if row >= 0:
            points.append((float(col), float(row)))
    # right edge: rays travel left
    for off in offsets * h:
        row = int(round(h / 2.0 + off))
        if not 0 <= row < h:
            continue
        col = scan(white[row, ::-1])
        if col >= 0:
            points.append((float(w - 1 - col), float(row)))
    # bottom edge: rays travel up
    for off in offsets * w:
        col = int(round(w / 2.0 + off))
        if not 0 <= col < w:
            continue
        row = scan(white[::-1, col])
        if row >= 0:
            points.append((float(col), float(h - 1 - row)))
    # left edge: rays travel right
    for off in offsets * h:
        row = int(round(h / 2.0 + off))
        if not 0 <= row < h:
            continue
        col = scan(white[row, :])
        if col >= 0:
            points.append((float(col), float(row)))
    return points


def pitch_ellipse(bolts: list[Detection], spec: PitchCircleSpec | None = None) -> Ellipse:
    """Ellipse through the centers of the detected bolt heads."""
    if spec is None:
        spec = PitchCircleSpec()
    if len(bolts) < spec.bolt_count:
        raise InsufficientBoltsError(
            f"need {spec.bolt_count} bolt detections, got {len(bolts)}"
        )
    centers = [d.bbox.center for d in bolts]
    return fit_ellipse(centers)


def _acute_angle(t1: float, t2: float) -> float:
    d = abs(t1 - t2) % math.pi
    return min(d, math.pi - d)


def estimate_rim_diameter(
    rim: Ellipse, pitch: Ellipse, spec: PitchCircleSpec | None = None
) -> SizeEstimate:
    """Physical rim diameter from the rim/pitch major-axis ratio.

    Major axes are used because orthographic tilt of coplanar concentric
    circles shortens only the minor axes.  Confidence decays with the
    orientation and eccentricity disagreement of the two ellipses, which
    should share the wheel's tilt:

        confidence = exp(-(d_theta/0.2)^2 - (d_ecc/0.1)^2)

    with d_theta the acute angle between the orientations (taken as 0 when
    either ellipse is near-circular, eccentricity < 0.1) and d_ecc the
    eccentricity gap.
    """
    if spec is None:
        spec = PitchCircleSpec()
    if pitch.a < 1e-9:
        raise ValueError("pitch ellipse has (near-)zero major axis")
    if rim.a < pitch.a:
        raise ValueError("rim ellipse must be at least as large as the pitch ellipse")
    diameter = spec.diameter_mm * (rim.a / pitch.a)
    ecc_rim = rim.eccentricity
    ecc_pitch = pitch.eccentricity
    if ecc_rim < 0.1 or ecc_pitch < 0.1:
        d_theta = 0.0
    else:
        d_theta = _acute_angle(rim.theta, pitch.theta)
    d_ecc = abs(ecc_rim - ecc_pitch)
    confidence = math.exp(-((d_theta / 0.2) ** 2) - ((d_ecc / 0.1) ** 2))
    return SizeEstimate(rim=rim, pitch=pitch, diameter_mm=diameter, confidence=confidence)


def estimate_from_crop(
    crop_gray: np.ndarray,
    bolts: list[Detection],
    spec: PitchCircleSpec | None = None,
    raycast: RaycastConfig | None = None,
    blur_sigma: float = 1.0,
) -> SizeEstimate:
    """Full per-crop pipeline: blur, binarize, raycast the rim, fit both ellipses.

    Bolt detections must be in crop coordinates.  Raises FitError when the
    contour cannot be sampled or either fit degenerates.
    """
    blurred = gaussian_blur(crop_gray, blur_sigma) if blur_sigma > 0 else crop_gray
    thr = otsu_threshold(blurred)
    if thr.degenerate:
        raise FitError("crop is constant, nothing to binarize")
    samples = raycast_contour(thr.binary, raycast)
    if len(samples) < 5:
        raise FitError(f"only {len(samples)} contour samples, need 5")
    rim = fit_ellipse(samples)
    pitch = pitch_ellipse(bolts, spec)
    return estimate_rim_diameter(rim, pitch, spec)


def bolt_rel_box(center: tuple[float, float], radius: float, frame: int = 0) -> Detection:
    """Bolt detection from a circle center/radius in crop coordinates."""
    return Detection(
        frame=frame,
        label=Label.BOLT,
        bbox=BBox(center[0] - radius, center[1] - radius, 2 * radius, 2 * radius),
        score=1.0,
    )

"""Deterministic synthetic wheel scenes with exact ground truth.

Wheels are drawn under orthographic projection (tilt about the vertical
axis compresses x by cos(tilt)), so every truth quantity - wheel box, rim
ellipse, bolt pitch ellipse, bolt centers - is computed analytically from
the same projection that produced the pixels.  Rendering is anti-aliased by
4x supersampling and is bit-deterministic for a given seed.

Five canonical face patterns stand in for rim designs: a solid disc and 3,
5, 7 and 10-spoke layouts, mapped to class ids 1..5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import BBox, Ellipse

SUPERSAMPLE = 4
SPOKE_CLASSES = {0: 1, 3: 2, 5: 3, 7: 4, 10: 5}
CLASS_SPOKES = {v: k for k, v in SPOKE_CLASSES.items()}

# Wheel proportions relative to the rim radius / in millimeters.
TYRE_FACTOR = 1.25
FLANGE_INNER_FACTOR = 0.88
BOLT_RADIUS_MM = 12.0
HUB_MARGIN_MM = 10.0
SPOKE_FILL = 0.45


@dataclass(frozen=True)
class WheelSpec:
    center: tuple[float, float]
    rim_diameter_mm: float = 400.0
    pitch_diameter_mm: float = 112.0
    tilt_deg: float = 0.0
    spoke_count: int = 5
    bolt_count: int = 5
    px_per_mm: float = 0.5
    phase_deg: float = 0.0
    tyre_level: int = 60
    rim_level: int = 205
    gap_level: int = 35
    bolt_level: int = 95

    def __post_init__(self):
        if not 0.0 <= self.tilt_deg <= 45.0:
            raise ValueError(f"tilt must be within [0, 45] degrees, got {self.tilt_deg}")
        if self.rim_diameter_mm <= 0 or self.pitch_diameter_mm <= 0:
            raise ValueError("diameters must be positive")
        if self.spoke_count not in SPOKE_CLASSES:
            raise ValueError(
                f"spoke_count must be one of {sorted(SPOKE_CLASSES)}, got {self.spoke_count}"
            )
        if self.px_per_mm <= 0:
            raise ValueError("px_per_mm must be positive")

    @property
    def class_id(self) -> int:
        return SPOKE_CLASSES[self.spoke_count]


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    wheels: tuple[WheelSpec, ...]
    background: int = 25
    noise_sigma: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class WheelTruth:
    bbox: BBox
    rim: Ellipse
    pitch: Ellipse
    bolt_centers: tuple[tuple[float, float], ...]
    class_id: int


@dataclass(frozen=True)
class SceneTruth:
    wheels: tuple[WheelTruth, ...]


def wheel_truth(w: WheelSpec) -> WheelTruth:
    """Analytic ground truth of one wheel under its orthographic projection."""
    cx, cy = w.center
    ppm = w.px_per_mm
    tilt = math.radians(w.tilt_deg)
    squeeze = math.cos(tilt)
    rim_r = w.rim_diameter_mm / 2.0 * ppm
    pitch_r = w.pitch_diameter_mm / 2.0 * ppm
    tyre_r = rim_r * TYRE_FACTOR
    theta = math.pi / 2.0 if w.tilt_deg > 0 else 0.0
    bolts = []
    for k in range(w.bolt_count):
        beta = math.radians(w.phase_deg) + 2.0 * math.pi * k / w.bolt_count
        bolts.append(
            (cx + pitch_r * math.cos(beta) * squeeze, cy + pitch_r * math.sin(beta))
        )
    return WheelTruth(
        bbox=BBox(
            cx - tyre_r * squeeze, cy - tyre_r, 2.0 * tyre_r * squeeze, 2.0 * tyre_r
        ),
        rim=Ellipse(cx, cy, rim_r, rim_r * squeeze, theta),
        pitch=Ellipse(cx, cy, pitch_r, pitch_r * squeeze, theta),
        bolt_centers=tuple(bolts),
        class_id=w.class_id,
    )


def _paint_wheel(canvas: np.ndarray, w: WheelSpec) -> None:
    h, width = canvas.shape
    cx, cy = w.center
    ppm = w.px_per_mm
    squeeze = math.cos(math.radians(w.tilt_deg))
    # Shape radii in wheel-plane millimeters; projection happens in the
    # pixel -> plane unprojection below.
    rim_r = w.rim_diameter_mm / 2.0
    pitch_r = w.pitch_diameter_mm / 2.0
    tyre_r = rim_r * TYRE_FACTOR
    if 2.0 * tyre_r * ppm > min(width, h):
        raise ValueError(
            f"wheel of extent {2 * tyre_r * ppm:.0f} px does not fit a {width}x{h} image"
        )
    flange_inner = rim_r * FLANGE_INNER_FACTOR
    hub_r = pitch_r + BOLT_RADIUS_MM + HUB_MARGIN_MM

    x0 = max(0, int(math.floor(cx - tyre_r * ppm * squeeze)) - 2)
    x1 = min(width, int(math.ceil(cx + tyre_r * ppm * squeeze)) + 2)
    y0 = max(0, int(math.floor(cy - tyre_r * ppm)) - 2)
    y1 = min(h, int(math.ceil(cy + tyre_r * ppm)) + 2)
    if x0 >= x1 or y0 >= y1:
        return

    s = SUPERSAMPLE
    sub = (np.arange(s) + 0.5) / s - 0.5
    gx = ((x0 + np.arange(x1 - x0))[:, None] + sub[None, :]).ravel()
    gy = ((y0 + np.arange(y1 - y0))[:, None] + sub[None, :]).ravel()
    xw = (gx[None, :] - cx) / (ppm * squeeze)
    yw = (gy[:, None] - cy) / ppm
    r = np.hypot(xw, yw)

    lvl = np.full(r.shape, np.nan)  # NaN = untouched, keep canvas value
    lvl[r <= tyre_r] = w.tyre_level
    lvl[r <= rim_r] = w.rim_level
    lvl[r <= flange_inner] = w.gap_level

    rim_face = (r <= flange_inner) & (r > hub_r)
    if w.spoke_count == 0:
        lvl[rim_face] = w.rim_level
    else:
        ang = np.arctan2(yw, xw)
        half_width = math.pi / w.spoke_count * SPOKE_FILL
        nearest = np.full(r.shape, np.inf)
        for k in range(w.spoke_count):
            axis = math.radians(w.phase_deg) + 2.0 * math.pi * k / w.spoke_count
            d = np.abs((ang - axis + math.pi) % (2.0 * math.pi) - math.pi)
            np.minimum(nearest, d, out=nearest)
        lvl[rim_face & (nearest <= half_width)] = w.rim_level

    lvl[r <= hub_r] = w.rim_level
    for k in range(w.bolt_count):
        beta = math.radians(w.phase_deg) + 2.0 * math.pi * k / w.bolt_count
        bx = pitch_r * math.cos(beta)
        by = pitch_r * math.sin(beta)
        lvl[np.hypot(xw - bx, yw - by) <= BOLT_RADIUS_MM] = w.bolt_level

    # Per-pixel average of the s x s subsamples, alpha-blended over the
    # existing canvas where subsamples fell outside the wheel.
    blocks = lvl.reshape(y1 - y0, s, x1 - x0, s)
    coverage = (~np.isnan(blocks)).mean(axis=(1, 3))
    shade = np.nan_to_num(blocks).sum(axis=(1, 3)) / (s * s)
    window = canvas[y0:y1, x0:x1].astype(np.float64)
    blended = shade + (1.0 - coverage) * window
    canvas[y0:y1, x0:x1] = np.floor(np.clip(blended, 0, 255) + 0.5).astype(np.uint8)


def render_wheel(spec: SceneSpec) -> tuple[np.ndarray, SceneTruth]:
    """Render a scene and return it with per-wheel analytic truth."""
    canvas = np.full((spec.height, spec.width), spec.background, dtype=np.uint8)
    for w in spec.wheels:
        _paint_wheel(canvas, w)
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        noisy = canvas + rng.normal(0.0, spec.noise_sigma, canvas.shape)
        canvas = np.floor(np.clip(noisy, 0, 255) + 0.5).astype(np.uint8)
    return canvas, SceneTruth(wheels=tuple(wheel_truth(w) for w in spec.wheels))


@dataclass(frozen=True)
class FrameTruth:
    wheels: tuple[WheelTruth | None, ...]
    car_bbox: BBox | None


def render_sequence(
    spec: SceneSpec, frames: int, velocity: float
) -> tuple[list[np.ndarray], list[FrameTruth]]:
    """Linear conveyor motion: every wheel translates `velocity` px per frame.

    A wheel's truth is marked absent (None) once its center leaves the
    image.  The per-frame car box spans the visible wheels with a body
    allowance above them.
    """
    if frames < 1:
        raise ValueError("need at least one frame")
    images: list[np.ndarray] = []
    truths: list[FrameTruth] = []
    for f in range(frames):
        moved = []
        visible = []
        for w in spec.wheels:
            nw = replace(w, center=(w.center[0] + velocity * f, w.center[1]))
            cx, cy = nw.center
            inside = 0 <= cx < spec.width and 0 <= cy < spec.height
            moved.append(nw if inside else None)
            visible.append(inside)
        frame_spec = replace(
            spec,
            wheels=tuple(w for w in moved if w is not None),
            seed=(spec.seed * 100003 + f),
        )
        img, _ = render_wheel(frame_spec)
        wheel_truths = tuple(
            wheel_truth(w) if w is not None else None for w in moved
        )
        boxes = [t.bbox for t in wheel_truths if t is not None]
        car = None
        if boxes:
            x_lo = min(b.x for b in boxes) - 40
            x_hi = max(b.x + b.w for b in boxes) + 40
            y_hi = max(b.y + b.h for b in boxes) + 10
            y_lo = min(b.y for b in boxes) - 0.9 * max(b.h for b in boxes)
            car = BBox(x_lo, y_lo, x_hi - x_lo, y_hi - y_lo)
        images.append(img)
        truths.append(FrameTruth(wheels=wheel_truths, car_bbox=car))
    return images, truths


def render_class_samples(
    samples_per_class: int,
    seed: int = 11,
    side: int = 256,
    noise_sigma: float = 4.0,
    phase_jitter_deg: float = 12.0,
) -> tuple[list[np.ndarray], list[int]]:
    """Labeled wheel crops covering the five canonical face patterns.

    Samples jitter in position, rim diameter, tilt and spoke rotation; the
    rotation jitter is bounded because the descriptor downstream is not
    rotation invariant.  Deterministic for a given seed.
    """
    rng = np.random.default_rng(seed)
    images: list[np.ndarray] = []
    labels: list[int] = []
    for cls, spokes in sorted(CLASS_SPOKES.items()):
        for _ in range(samples_per_class):
            spec = SceneSpec(
                width=side,
                height=side,
                wheels=(
                    WheelSpec(
                        center=(
                            side / 2.0 + rng.uniform(-4, 4),
                            side / 2.0 + rng.uniform(-4, 4),
                        ),
                        rim_diameter_mm=rng.uniform(330, 400),
                        tilt_deg=rng.uniform(0, 25),
                        spoke_count=spokes,
                        px_per_mm=side / 512.0,
                        phase_deg=rng.uniform(-phase_jitter_deg, phase_jitter_deg),
                    ),
                ),
                noise_sigma=noise_sigma,
                seed=int(rng.integers(1 << 31)),
            )
            img, _ = render_wheel(spec)
            images.append(img)
            labels.append(cls)
    return images, labels


def render_ring_scene(
    width: int,
    height: int,
    rings: list[tuple[float, float, float]],
    stroke: float = 4.0,
    ring_level: int = 220,
    background: int = 30,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> np.ndarray:
    """Anti-aliased annuli on a flat background, for detector ground truth.

    `rings` holds (cx, cy, r) triples; `stroke` is the annulus thickness.
    """
    s = 2
    ys = (np.arange(height * s) + 0.5) / s - 0.5
    xs = (np.arange(width * s) + 0.5) / s - 0.5
    canvas = np.full((height * s, width * s), float(background))
    for cx, cy, r in rings:
        dist = np.hypot(ys[:, None] - cy, xs[None, :] - cx)
        mask = np.abs(dist - r) <= stroke / 2.0
        canvas[mask] = float(ring_level)
    canvas = canvas.reshape(height, s, width, s).mean(axis=(1, 3))
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        canvas = canvas + rng.normal(0.0, noise_sigma, canvas.shape)
    return np.floor(np.clip(canvas, 0, 255) + 0.5).astype(np.uint8)

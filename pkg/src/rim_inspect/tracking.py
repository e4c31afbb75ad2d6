"""Temporal logic: IoU data association, per-track class voting, cross-camera
linking and the four-wheel consistency verdict.

The tracker is a single-writer state machine: updates must arrive in frame
order from one caller.  Completed car records are immutable snapshots that
downstream consumers may process concurrently.

Conveyor-belt scenes move slowly relative to wheel size (centimeters per
second at one frame per second), so plain greedy IoU matching with a small
number of objects per frame is deterministic and effectively optimal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from statistics import median

import numpy as np

from .core import BBox, Detection, Label, iou
from .ellipsefit import SizeEstimate

TENTATIVE = "tentative"
CONFIRMED = "confirmed"
DEAD = "dead"

POSITIONS = ("FL", "FR", "RL", "RR")


@dataclass(frozen=True)
class TrackerConfig:
    iou_min: float = 0.3
    max_missed: int = 3
    min_hits: int = 2
    class_vote: str = "median"  # "median" or "mode"
    diameter_tolerance: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.iou_min <= 1.0:
            raise ValueError("iou_min must be in (0, 1]")
        if self.max_missed < 0 or self.min_hits < 1:
            raise ValueError("invalid lifecycle parameters")
        if self.class_vote not in ("median", "mode"):
            raise ValueError(f"unknown class_vote {self.class_vote!r}")
        if self.diameter_tolerance <= 0:
            raise ValueError("diameter_tolerance must be positive")


@dataclass
class TrackEntry:
    frame: int
    bbox: BBox
    rim_class: int | None = None
    margins: np.ndarray | None = None
    size: SizeEstimate | None = None


@dataclass
class Track:
    track_id: int
    label: Label
    entries: list[TrackEntry] = field(default_factory=list)
    missed_frames: int = 0
    state: str = TENTATIVE
    car_track_id: int | None = None  # wheels only

    @property
    def last_bbox(self) -> BBox:
        return self.entries[-1].bbox

    @property
    def hits(self) -> int:
        return len(self.entries)

    def median_center_x(self) -> float:
        return median(e.bbox.center[0] for e in self.entries)

    def entry_for(self, frame: int) -> TrackEntry | None:
        for e in reversed(self.entries):
            if e.frame == frame:
                return e
            if e.frame < frame:
                return None
        return None


@dataclass
class CarRecord:
    """Four-wheel bundle of one tracked car, frozen when the car track dies.

    wheels maps position codes: camera A sees the right side (FR/RR), the
    far side (FL/RL) is filled in by cross-camera linking.  Within a side,
    the wheel with the larger median x-coordinate is taken as the front.
    """

    car_track_id: int
    wheels: dict[str, Track] = field(default_factory=dict)
    complete: bool = False


@dataclass(frozen=True)
class WheelReading:
    position: str
    rim_class: int | None
    diameter_mm: float | None
    frames: int


@dataclass(frozen=True)
class InspectionVerdict:
    car_track_id: int
    wheels: tuple[WheelReading, ...]
    verdict: str  # "pass" | "fail" | "inconclusive"
    reasons: tuple[str, ...]


def _greedy_match(
    tracks: list[Track], dets: list[Detection], iou_min: float
) -> dict[int, int]:
    """Greedy IoU matching; returns detection index -> list index in tracks."""
    pairs = []
    for ti, track in enumerate(tracks):
        for di, det in enumerate(dets):
            v = iou(track.last_bbox, det.bbox)
            if v >= iou_min:
                pairs.append((-v, track.track_id, di, ti))
    pairs.sort()
    used_tracks: set[int] = set()
    matched: dict[int, int] = {}
    for _, _, di, ti in pairs:
        if ti in used_tracks or di in matched:
            continue
        used_tracks.add(ti)
        matched[di] = ti
    return matched


@dataclass
class FrameAssignments:
    frame: int
    car_track_ids: list[int]
    wheel_track_ids: list[int]
    wheel_car_ids: list[int | None]


class IouTracker:
    """Associates car and wheel detections across consecutive frames."""

    def __init__(self, cfg: TrackerConfig | None = None):
        self.cfg = cfg or TrackerConfig()
        self.cars: list[Track] = []
        self.wheels: list[Track] = []
        self._next_id = 1
        self._last_frame: int | None = None
        self._completed: list[CarRecord] = []

    def update(
        self, frame: int, cars: list[Detection], wheels: list[Detection]
    ) -> FrameAssignments:
        """Advance one frame; returns track ids aligned with the detections."""
        if self._last_frame is not None and frame <= self._last_frame:
            raise ValueError(
                f"frames must be strictly increasing ({frame} after {self._last_frame})"
            )
        self._last_frame = frame
        car_ids = self._associate(self.cars, Label.CAR, frame, cars)
        wheel_ids = self._associate(self.wheels, Label.WHEEL, frame, wheels)

        wheel_car_ids: list[int | None] = []
        live_cars = [t for t in self.cars if t.state != DEAD]
        for det, tid in zip(wheels, wheel_ids):
            track = self._track(tid)
            if track.car_track_id is None:
                cx, cy = det.bbox.center
                owner = None
                for car in live_cars:
                    box = car.entry_for(frame)
                    ref = box.bbox if box is not None else car.last_bbox
                    if ref.contains(cx, cy):
                        owner = car.track_id
                        break
                track.car_track_id = owner
            wheel_car_ids.append(track.car_track_id)

        self._reap(frame)
        return FrameAssignments(frame, car_ids, wheel_ids, wheel_car_ids)

    def _associate(
        self, tracks: list[Track], label: Label, frame: int, dets: list[Detection]
    ) -> list[int]:
        live = [t for t in tracks if t.state != DEAD]
        matched = _greedy_match(live, dets, self.cfg.iou_min)
        ids: list[int] = []
        hit_tracks: set[int] = set()
        for di, det in enumerate(dets):
            if di in matched:
                track = live[matched[di]]
            else:
                track = Track(track_id=self._next_id, label=label)
                self._next_id += 1
                tracks.append(track)
            track.entries.append(TrackEntry(frame=frame, bbox=det.bbox))
            track.missed_frames = 0
            if track.state == TENTATIVE and track.hits >= self.cfg.min_hits:
                track.state = CONFIRMED
            hit_tracks.add(track.track_id)
            ids.append(track.track_id)
        for track in live:
            if track.track_id not in hit_tracks:
                track.missed_frames += 1
        return ids

    def _track(self, track_id: int) -> Track:
        for t in self.wheels:
            if t.track_id == track_id:
                return t
        for t in self.cars:
            if t.track_id == track_id:
                return t
        raise KeyError(f"unknown track id {track_id}")

    def _reap(self, frame: int) -> None:
        for track in self.cars + self.wheels:
            if track.state != DEAD and track.missed_frames > self.cfg.max_missed:
                track.state = DEAD
                if track.label == Label.CAR:
                    self._completed.append(self._bundle(track))

    def add_observation(
        self,
        track_id: int,
        frame: int,
        rim_class: int | None = None,
        margins: np.ndarray | None = None,
        size: SizeEstimate | None = None,
    ) -> None:
        """Attach classification/size results to a wheel track's frame entry."""
        entry = self._track(track_id).entry_for(frame)
        if entry is None:
            raise KeyError(f"track {track_id} has no entry for frame {frame}")
        if rim_class is not None:
            entry.rim_class = rim_class
        if margins is not None:
            entry.margins = margins
        if size is not None:
            entry.size = size

    def pop_completed(self) -> list[CarRecord]:
        """Car records whose tracks died since the last call."""
        done, self._completed = self._completed, []
        return done

    def finish(self) -> list[CarRecord]:
        """End of stream: completes every remaining car track."""
        for track in self.cars:
            if track.state != DEAD:
                track.state = DEAD
                self._completed.append(self._bundle(track))
        for track in self.wheels:
            track.state = DEAD
        return self.pop_completed()

    def _bundle(self, car: Track) -> CarRecord:
        mine = [t for t in self.wheels if t.car_track_id == car.track_id and t.hits > 0]
        # Keep the two best-supported wheel tracks for this side of the car.
        mine.sort(key=lambda t: (-t.hits, t.track_id))
        mine = sorted(mine[:2], key=lambda t: -t.median_center_x())
        record = CarRecord(car_track_id=car.track_id)
        for pos, track in zip(("FR", "RR"), mine):
            record.wheels[pos] = track
        record.complete = True
        return record


def aggregate_class(
    track: Track, mode: str = "median"
) -> int | None:
    """Collapse a wheel track's per-frame classes into one rim class.

    Entries with the occluded/unclassifiable class 0 are excluded first.
    median: middle element of the sorted ids (lower middle on even counts).
    mode: most frequent id; ties are broken toward the id with the highest
    summed margin, then the smaller id.  Returns None when nothing usable
    remains (the inconclusive marker).
    """
    entries = [e for e in track.entries if e.rim_class not in (None, 0)]
    if not entries:
        return None
    ids = sorted(e.rim_class for e in entries)
    if mode == "median":
        return ids[(len(ids) - 1) // 2]
    if mode != "mode":
        raise ValueError(f"unknown vote mode {mode!r}")
    counts: dict[int, int] = {}
    for v in ids:
        counts[v] = counts.get(v, 0) + 1
    top = max(counts.values())
    tied = sorted(c for c, n in counts.items() if n == top)
    if len(tied) == 1:
        return tied[0]

    def margin_sum(cls: int) -> float:
        total = 0.0
        for e in entries:
            if e.margins is not None and 0 <= cls < len(e.margins):
                total += float(e.margins[cls])
        return total

    return max(tied, key=lambda c: (margin_sum(c), -c))


def link_camera_b(
    car: CarRecord,
    b_dets_by_frame: dict[int, list[Detection]],
    frame_width: float,
    window_frac: float = 0.15,
) -> dict[str, list[tuple[int, Detection]]]:
    """Claim far-side wheel detections for each near-side wheel track.

    Both cameras see nearly the same horizontal coordinates, so for every
    frame of an A-side track the B detection with the nearest box-center x
    (within window_frac * frame_width) is claimed.  Claims are resolved in
    position order FR before RR; unclaimed B detections are ignored.
    Returns {"FL": [(frame, det), ...], "RL": [...]} for the positions that
    found partners (FR links to FL, RR to RL).
    """
    window = window_frac * frame_width
    claimed: dict[int, set[int]] = {}
    links: dict[str, list[tuple[int, Detection]]] = {}
    mirror = {"FR": "FL", "RR": "RL"}
    for pos in ("FR", "RR"):
        track = car.wheels.get(pos)
        if track is None:
            continue
        out: list[tuple[int, Detection]] = []
        for entry in track.entries:
            cands = b_dets_by_frame.get(entry.frame, [])
            taken = claimed.setdefault(entry.frame, set())
            ax = entry.bbox.center[0]
            best: tuple[float, int] | None = None
            for bi, det in enumerate(cands):
                if bi in taken:
                    continue
                dx = abs(det.bbox.center[0] - ax)
                if dx <= window and (best is None or dx < best[0]):
                    best = (dx, bi)
            if best is not None:
                taken.add(best[1])
                out.append((entry.frame, cands[best[1]]))
        if out:
            links[mirror[pos]] = out
    return links


def _diameter(track: Track) -> float | None:
    values = [e.size.diameter_mm for e in track.entries if e.size is not None]
    return float(median(values)) if values else None


def inspect_car(car: CarRecord, cfg: TrackerConfig | None = None) -> InspectionVerdict:
    """Pass/fail/inconclusive decision over a completed car's four wheels.

    pass: four classified wheels, equal classes, and the largest pairwise
    diameter gap within diameter_tolerance of the median diameter.
    fail: class and/or size disagreement, with the offending positions named.
    inconclusive: fewer than four classified wheels, or diameters missing.
    """
    if cfg is None:
        cfg = TrackerConfig()
    readings: list[WheelReading] = []
    for pos in POSITIONS:
        track = car.wheels.get(pos)
        if track is None:
            continue
        cls = aggregate_class(track, cfg.class_vote)
        readings.append(
            WheelReading(
                position=pos,
                rim_class=cls,
                diameter_mm=_diameter(track),
                frames=track.hits,
            )
        )
    classified = [r for r in readings if r.rim_class is not None]
    if len(classified) < 4:
        return InspectionVerdict(
            car_track_id=car.car_track_id,
            wheels=tuple(readings),
            verdict="inconclusive",
            reasons=("wheels_missing",),
        )

    reasons: list[str] = []
    classes = [r.rim_class for r in classified]
    if len(set(classes)) > 1:
        counts: dict[int, int] = {}
        for v in classes:
            counts[v] = counts.get(v, 0) + 1
        top = max(counts.values())
        majority = min(c for c, n in counts.items() if n == top)
        offenders = [r.position for r in classified if r.rim_class != majority]
        reasons.append("class_mismatch:" + ",".join(offenders))

    diameters = [r.diameter_mm for r in classified]
    if any(d is None for d in diameters):
        if reasons:  # class verdict already failed; size simply unverifiable
            return InspectionVerdict(
                car.car_track_id, tuple(readings), "fail", tuple(reasons)
            )
        return InspectionVerdict(
            car.car_track_id, tuple(readings), "inconclusive", ("size_missing",)
        )
    med = median(diameters)
    spread = max(diameters) - min(diameters)
    if spread > cfg.diameter_tolerance * med:
        cut = cfg.diameter_tolerance * med / 2.0
        offenders = [
            r.position for r in classified if abs(r.diameter_mm - med) > cut
        ]
        reasons.append("size_mismatch:" + ",".join(offenders))

    verdict = "pass" if not reasons else "fail"
    return InspectionVerdict(car.car_track_id, tuple(readings), verdict, tuple(reasons))

"""Pluggable detection and classification sources.

Deep-network stages are integrated through files rather than runtimes: a
JSONL detection file or class-score file exported from any model plugs into
the pipeline exactly where the built-in classical providers (circle Hough
transform, HOG+SVM) do.  Pipeline results are identical whether detections
come from the internal detector or from a file of its serialized output.

JSONL schemas (one object per line, optional header line carrying only the
schema id):

  detections, schema "rim-inspect/det-v1":
    {"frame": 12, "label": "wheel", "bbox": [x, y, w, h], "score": 0.97}

  class scores, schema "rim-inspect/cls-v1", keyed by frame+track or crop:
    {"frame": 12, "track": 3, "scores": [s0 .. s21]}
    {"crop": "wheel_000012_3.png", "scores": [s0 .. s21]}
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .core import BBox, Detection, Label, NUM_RIM_CLASSES
from .features import SvmModel, hog_features, svm_predict
from .hough import HoughConfig, WHEEL_CONFIG, circle_to_detection, detect_circles
from .imgproc import downscale, gaussian_blur, to_grayscale

log = logging.getLogger(__name__)

DET_SCHEMA = "rim-inspect/det-v1"
CLS_SCHEMA = "rim-inspect/cls-v1"

# Margin filler for classes a model was not trained on: finite, but far
# below any real margin so argmax and vote tie-breaks never pick them.
ABSENT_CLASS_SCORE = -1e30


class ProviderError(ValueError):
    """Malformed provider file or unresolvable provider selection."""


def _parse_jsonl(path: str | Path, schema: str):
    path = Path(path)
    if not path.exists():
        raise ProviderError(f"provider file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ProviderError(f"{path}:{ln}: invalid JSON ({exc})") from exc
            if not isinstance(obj, dict):
                raise ProviderError(f"{path}:{ln}: expected a JSON object")
            declared = obj.get("schema")
            if declared is not None and declared != schema:
                raise ProviderError(
                    f"{path}:{ln}: schema {declared!r}, expected {schema!r}"
                )
            if declared is not None and len(obj) == 1:
                continue  # header line
            yield ln, path, obj


class ExternalDetectionSource:
    """Detections parsed from a JSONL file, indexed by (frame, label)."""

    def __init__(self, path: str | Path):
        self._index: dict[tuple[int, Label], list[Detection]] = {}
        count = 0
        for ln, p, obj in _parse_jsonl(path, DET_SCHEMA):
            try:
                frame = int(obj["frame"])
                label = Label(obj["label"])
                x, y, w, h = (float(v) for v in obj["bbox"])
                det = Detection(
                    frame=frame,
                    label=label,
                    bbox=BBox(x, y, w, h),
                    score=float(obj["score"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ProviderError(f"{p}:{ln}: bad detection record ({exc})") from exc
            self._index.setdefault((frame, label), []).append(det)
            count += 1
        self.count = count

    @property
    def max_frame(self) -> int:
        return max((f for f, _ in self._index), default=-1)

    def detections(self, frame: int, image, label: Label) -> list[Detection]:
        del image  # file-backed source never looks at pixels
        return list(self._index.get((frame, label), []))


class HoughDetectionSource:
    """Classical wheel detector: downscale, blur, gradient-vote Hough."""

    def __init__(
        self,
        cfg: HoughConfig = WHEEL_CONFIG,
        downscale_factor: int = 4,
        blur_sigma: float = 1.5,
    ):
        self.cfg = cfg
        self.downscale_factor = downscale_factor
        self.blur_sigma = blur_sigma

    def detections(self, frame: int, image, label: Label) -> list[Detection]:
        if label != Label.WHEEL or image is None:
            return []  # circles only; car boxes need an external provider
        gray = to_grayscale(image)
        small = downscale(gray, self.downscale_factor)
        smooth = gaussian_blur(small, self.blur_sigma)
        circles = detect_circles(smooth, self.cfg)
        return [
            circle_to_detection(c, self.downscale_factor, frame=frame)
            for c in circles
        ]


def load_external_detections(path: str | Path) -> ExternalDetectionSource:
    return ExternalDetectionSource(path)


class ExternalClassSource:
    """Per-wheel class scores parsed from a JSONL file.

    Records may be keyed by (frame, track) or by crop filename; duplicate
    keys follow last-writer-wins with a logged warning.
    """

    def __init__(self, path: str | Path):
        self._by_key: dict[tuple[int, int], np.ndarray] = {}
        self._by_crop: dict[str, np.ndarray] = {}
        for ln, p, obj in _parse_jsonl(path, CLS_SCHEMA):
            scores = obj.get("scores")
            if not isinstance(scores, list) or len(scores) != NUM_RIM_CLASSES:
                raise ProviderError(
                    f"{p}:{ln}: expected {NUM_RIM_CLASSES} scores, got "
                    f"{len(scores) if isinstance(scores, list) else type(scores).__name__}"
                )
            arr = np.asarray(scores, dtype=np.float64)
            if not np.isfinite(arr).all():
                raise ProviderError(f"{p}:{ln}: scores must be finite")
            if "crop" in obj:
                key = str(obj["crop"])
                if key in self._by_crop:
                    log.warning("%s:%d: duplicate crop key %r, keeping last", p, ln, key)
                self._by_crop[key] = arr
            elif "frame" in obj and "track" in obj:
                fkey = (int(obj["frame"]), int(obj["track"]))
                if fkey in self._by_key:
                    log.warning("%s:%d: duplicate key %s, keeping last", p, ln, fkey)
                self._by_key[fkey] = arr
            else:
                raise ProviderError(
                    f"{p}:{ln}: record needs either frame+track or crop key"
                )

    def scores(
        self, crop=None, frame: int | None = None, track: int | None = None, name: str | None = None
    ) -> np.ndarray | None:
        del crop
        if name is not None and name in self._by_crop:
            return self._by_crop[name]
        if frame is not None and track is not None:
            return self._by_key.get((frame, track))
        return None


class SvmClassSource:
    """HOG+SVM classifier over 22-way scores; untrained classes get a
    sentinel margin that never wins."""

    def __init__(self, model: SvmModel):
        if model.hog is None:
            raise ProviderError("SVM model lacks HOG geometry")
        self.model = model

    def scores(
        self, crop=None, frame: int | None = None, track: int | None = None, name: str | None = None
    ) -> np.ndarray | None:
        del frame, track, name
        if crop is None:
            return None
        if crop.shape[0] != self.model.side or crop.shape[1] != self.model.side:
            raise ValueError(
                f"crop is {crop.shape}, model expects {self.model.side}x{self.model.side}"
            )
        feat = hog_features(crop, self.model.hog)
        _, margins = svm_predict(self.model, feat)
        out = np.full(NUM_RIM_CLASSES, ABSENT_CLASS_SCORE)
        for cls, margin in zip(self.model.classes, margins):
            out[cls] = margin
        return out


def load_external_classes(path: str | Path) -> ExternalClassSource:
    return ExternalClassSource(path)


def write_detections(path: str | Path, dets: list[Detection]) -> None:
    """Serialize detections to the det-v1 JSONL layout (with header line)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"schema": DET_SCHEMA}) + "\n")
        for d in dets:
            fh.write(
                json.dumps(
                    {
                        "frame": d.frame,
                        "label": d.label.value,
                        "bbox": [d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h],
                        "score": d.score,
                    }
                )
                + "\n"
            )


def write_class_scores(path: str | Path, rows: list[tuple[int, int, np.ndarray]]) -> None:
    """Serialize (frame, track, scores) rows to the cls-v1 JSONL layout."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"schema": CLS_SCHEMA}) + "\n")
        for frame, track, scores in rows:
            fh.write(
                json.dumps(
                    {"frame": frame, "track": track, "scores": [float(v) for v in scores]}
                )
                + "\n"
            )

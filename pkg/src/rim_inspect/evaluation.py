"""Detection metrics (precision, recall, AP, mAP over IoU ranges) and
classification accuracy with confusion matrices.

Matching is per frame and per label, greedy by detection score with
one-to-one assignment.  AP uses all-point (precision envelope)
interpolation by default; the 11-point variant is available for
sensitivity checks.  Crowd/ignore regions are not supported.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import BBox, Detection, Label, NUM_RIM_CLASSES, iou
from .image_io import IMAGE_SUFFIXES, read_image


@dataclass(frozen=True)
class GroundTruth:
    frame: int
    label: Label
    bbox: BBox


@dataclass(frozen=True)
class PrCurve:
    """Cumulative (recall, precision) samples in score order plus the AP.

    ap is None when undefined (no ground truth for the class).
    """

    recalls: tuple[float, ...]
    precisions: tuple[float, ...]
    ap: float | None


def match_detections(
    dets: list[Detection], gts: list[GroundTruth], iou_t: float
) -> tuple[list[tuple[Detection, bool]], int]:
    """Flag each detection TP/FP against ground truth at one IoU threshold.

    Detections are processed in descending score order (ties broken by
    frame, then input order); each one claims the unmatched ground truth of
    its frame and label with the highest IoU >= iou_t.  Returns the flagged
    detections in that order and the count of unmatched ground truths (FN).
    """
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, dets[i].frame, i))
    by_frame: dict[tuple[int, Label], list[int]] = {}
    for gi, gt in enumerate(gts):
        by_frame.setdefault((gt.frame, gt.label), []).append(gi)
    taken: set[int] = set()
    flagged: list[tuple[Detection, bool]] = []
    for i in order:
        det = dets[i]
        best_gi = -1
        best_iou = 0.0
        for gi in by_frame.get((det.frame, det.label), []):
            if gi in taken:
                continue
            v = iou(det.bbox, gts[gi].bbox)
            if v >= iou_t and v > best_iou:
                best_iou = v
                best_gi = gi
        if best_gi >= 0:
            taken.add(best_gi)
            flagged.append((det, True))
        else:
            flagged.append((det, False))
    return flagged, len(gts) - len(taken)


def average_precision(
    flags, n_gt: int, interpolation: str = "all"
) -> PrCurve:
    """Precision/recall curve and AP from ordered TP/FP flags.

    `interpolation` is "all" (area under the precision envelope at every
    point) or "11point" (mean of the max precision at recalls 0, 0.1 .. 1).
    """
    if n_gt < 0:
        raise ValueError("n_gt must be non-negative")
    flags = [bool(f) for f in flags]
    if n_gt == 0:
        return PrCurve((), (), None)
    tp = np.cumsum(flags) if flags else np.zeros(0)
    ranks = np.arange(1, len(flags) + 1)
    precisions = tp / ranks if len(flags) else np.zeros(0)
    recalls = tp / n_gt if len(flags) else np.zeros(0)
    if len(flags) == 0:
        return PrCurve((), (), 0.0)
    envelope = np.maximum.accumulate(precisions[::-1])[::-1]
    if interpolation == "all":
        prev = np.concatenate([[0.0], recalls[:-1]])
        ap = float(np.sum((recalls - prev) * envelope))
    elif interpolation == "11point":
        samples = []
        for r in np.linspace(0.0, 1.0, 11):
            at = envelope[recalls >= r - 1e-12]
            samples.append(float(at[0]) if len(at) else 0.0)
        ap = float(np.mean(samples))
    else:
        raise ValueError(f"unknown interpolation {interpolation!r}")
    return PrCurve(tuple(recalls.tolist()), tuple(precisions.tolist()), ap)


def ap_at_threshold(
    dets: list[Detection],
    gts: list[GroundTruth],
    iou_t: float,
    interpolation: str = "all",
) -> float | None:
    flagged, _ = match_detections(dets, gts, iou_t)
    return average_precision([f for _, f in flagged], len(gts), interpolation).ap


@dataclass(frozen=True)
class MapResult:
    mean_ap: float
    per_threshold: dict[float, float]
    per_label: dict[str, float]


def map_range(
    dets: list[Detection],
    gts: list[GroundTruth],
    t_lo: float = 0.5,
    t_hi: float = 0.95,
    step: float = 0.05,
    interpolation: str = "all",
) -> MapResult:
    """Mean AP over an IoU threshold range (inclusive), averaged over labels.

    Only labels present in the ground truth participate; detections of other
    labels are ignored.  An empty detection set scores 0.
    """
    if t_lo > t_hi:
        raise ValueError("t_lo must not exceed t_hi")
    n_steps = int(round((t_hi - t_lo) / step)) + 1 if step > 0 else 1
    thresholds = [round(t_lo + i * step, 10) for i in range(n_steps)]
    labels = sorted({gt.label for gt in gts}, key=lambda l: l.value)
    if not labels:
        raise ValueError("no ground truth given")
    per_threshold: dict[float, float] = {}
    per_label_acc: dict[str, list[float]] = {lab.value: [] for lab in labels}
    for t in thresholds:
        aps = []
        for lab in labels:
            ap = ap_at_threshold(
                [d for d in dets if d.label == lab],
                [g for g in gts if g.label == lab],
                t,
                interpolation,
            )
            ap = 0.0 if ap is None else ap
            aps.append(ap)
            per_label_acc[lab.value].append(ap)
        per_threshold[t] = float(np.mean(aps))
    per_label = {k: float(np.mean(v)) for k, v in per_label_acc.items()}
    return MapResult(
        mean_ap=float(np.mean(list(per_threshold.values()))),
        per_threshold=per_threshold,
        per_label=per_label,
    )


def precision_recall_best_f1(
    dets: list[Detection], gts: list[GroundTruth], iou_t: float = 0.5
) -> dict:
    """Operating point maximizing F1 over all score cutoffs.

    The score threshold is swept over the detections in score order; among
    equal F1 values the highest threshold (fewest detections) wins.  This
    choice of operating point is reported explicitly since P/R at a single
    threshold is otherwise ill-defined.
    """
    flagged, _ = match_detections(dets, gts, iou_t)
    n_gt = len(gts)
    best = {"precision": 0.0, "recall": 0.0, "f1": 0.0, "score_threshold": 1.0}
    tp = 0
    for k, (det, flag) in enumerate(flagged, start=1):
        tp += int(flag)
        p = tp / k
        r = tp / n_gt if n_gt else 0.0
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        if f1 > best["f1"]:
            best = {
                "precision": p,
                "recall": r,
                "f1": f1,
                "score_threshold": det.score,
            }
    return best


def confusion_matrix(pred, truth, num_classes: int = NUM_RIM_CLASSES):
    """counts[truth][pred] table plus overall accuracy (trace / total)."""
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if ((pred < 0) | (pred >= num_classes) | (truth < 0) | (truth >= num_classes)).any():
        raise ValueError(f"class ids must be in [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (truth, pred), 1)
    accuracy = float(np.trace(counts) / counts.sum()) if counts.sum() else 0.0
    return counts, accuracy


def read_yolo_ground_truth(
    gt_dir: str | Path,
    label_names: tuple[str, ...] = ("car", "wheel"),
    frame_size: tuple[int, int] | None = None,
) -> list[GroundTruth]:
    """Read one-file-per-image annotations: lines `class cx cy w h`, normalized.

    Files are ordered lexicographically by stem; the position in that order
    is the frame index.  Normalized coordinates are scaled by the matching
    image's size when an image with the same stem sits next to the text
    file, otherwise by `frame_size` (width, height).
    """
    gt_dir = Path(gt_dir)
    txts = sorted(gt_dir.glob("*.txt"))
    if not txts:
        raise FileNotFoundError(f"no YOLO annotation files in {gt_dir}")
    out: list[GroundTruth] = []
    for frame, txt in enumerate(txts):
        size = frame_size
        for suffix in IMAGE_SUFFIXES:
            img_path = txt.with_suffix(suffix)
            if img_path.exists():
                img = read_image(img_path)
                size = (img.shape[1], img.shape[0])
                break
        if size is None:
            raise ValueError(
                f"{txt}: no sibling image found and no frame_size given"
            )
        w_img, h_img = size
        for ln, line in enumerate(txt.read_text().splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 5:
                raise ValueError(f"{txt}:{ln}: expected 5 fields, got {len(parts)}")
            cls_idx = int(parts[0])
            if not 0 <= cls_idx < len(label_names):
                raise ValueError(f"{txt}:{ln}: class index {cls_idx} out of range")
            cx, cy, w, h = (float(v) for v in parts[1:])
            out.append(
                GroundTruth(
                    frame=frame,
                    label=Label(label_names[cls_idx]),
                    bbox=BBox(
                        (cx - w / 2.0) * w_img,
                        (cy - h / 2.0) * h_img,
                        w * w_img,
                        h * h_img,
                    ),
                )
            )
    return out

"""Command-line surface: full inspection plus stage-isolated commands.

Subcommands: inspect, detect, classify, fit, track, eval, train-svm, synth.
`inspect` runs the whole pipeline; the stage commands each run exactly one
module over files and compose to the same result (detect -> track ->
classify -> fit -> track with class/size inputs reproduces `inspect`'s
verdict file byte for byte).

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, PipelineConfig, load_config
from .core import BBox, Detection, Ellipse, Label
from .ellipsefit import raycast_contour
from .evaluation import (
    map_range,
    precision_recall_best_f1,
    read_yolo_ground_truth,
)
from .features import HogConfig, hog_dims, hog_features, save_model, svm_predict, svm_train
from .image_io import list_frames, read_image, write_image
from .imgproc import gaussian_blur, otsu_threshold, to_grayscale
from .pipeline import (
    CROP_SIDE,
    SIZE_SCHEMA,
    StreamAssembler,
    classify_crop,
    run_pipeline,
    size_crop,
    write_track_rows,
    write_verdicts,
)
from .providers import (
    ExternalClassSource,
    ExternalDetectionSource,
    ProviderError,
    write_class_scores,
    write_detections,
)
from .synth import SceneSpec, WheelSpec, render_sequence, render_wheel, wheel_truth

log = logging.getLogger(__name__)

USAGE_EXIT = 1
DATA_EXIT = 2
INTERNAL_EXIT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(USAGE_EXIT)


def _apply_overrides(cfg: PipelineConfig, args) -> PipelineConfig:
    updates = {}
    for attr, key in (
        ("camera_a", "camera_a"),
        ("camera_b", "camera_b"),
        ("out", "out_dir"),
        ("detections", "detections"),
        ("detections_b", "detections_b"),
        ("classes", "classes"),
        ("seed", "seed"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            updates[key] = Path(value) if key in ("camera_a", "camera_b", "out_dir") else value
    return replace(cfg, **updates) if updates else cfg


def cmd_inspect(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    report = run_pipeline(cfg)
    summary = report.summary()
    print(json.dumps(summary, indent=2))
    return 0


def cmd_detect(args) -> int:
    provider = args.provider
    if provider.startswith("external:"):
        source = ExternalDetectionSource(provider.split(":", 1)[1])
        dets = []
        for frame in range(source.max_frame + 1):
            for label in (Label.CAR, Label.WHEEL, Label.BOLT, Label.RIM):
                dets.extend(source.detections(frame, None, label))
    elif provider == "hough":
        cfg = load_config(args.config)
        from .pipeline import resolve_detection_source

        source = resolve_detection_source("hough", cfg)
        dets = []
        for frame, path in enumerate(list_frames(args.frames)):
            image = read_image(path)
            dets.extend(source.detections(frame, image, Label.WHEEL))
    else:
        raise ConfigError(f"unknown provider {provider!r}")
    write_detections(args.out, dets)
    print(f"wrote {len(dets)} detections to {args.out}")
    return 0


def _load_track_rows(path: str | Path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                row = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ProviderError(f"{path}:{ln}: invalid JSON ({exc})") from exc
            if set(row) == {"schema"}:
                continue
            rows.append(row)
    return rows


def _crop_for_row(row: dict, frames_a: list[Path], frames_b: list[Path] | None):
    from .core import crop_square

    frame = int(row["frame"])
    paths = frames_a if row.get("camera", "A") == "A" else frames_b
    if paths is None or frame >= len(paths):
        return None
    gray = to_grayscale(read_image(paths[frame]))
    box = BBox(*row["bbox"])
    return crop_square(gray, box, CROP_SIDE)


def cmd_classify(args) -> int:
    from .features import load_model
    from .providers import SvmClassSource

    source = SvmClassSource(load_model(args.model))
    frames_a = list_frames(args.frames)
    frames_b = list_frames(args.frames_b) if args.frames_b else None
    rows = []
    for row in _load_track_rows(args.tracks):
        if row.get("label") != Label.WHEEL.value:
            continue
        crop = _crop_for_row(row, frames_a, frames_b)
        if crop is None:
            continue
        scores = source.scores(crop=crop)
        rows.append((int(row["frame"]), int(row["track"]), scores))
    write_class_scores(args.out, rows)
    print(f"wrote {len(rows)} class-score rows to {args.out}")
    return 0


def _ellipse_points(e: Ellipse, n: int = 128) -> list[tuple[float, float]]:
    ct, st = math.cos(e.theta), math.sin(e.theta)
    pts = []
    for k in range(n + 1):
        t = 2.0 * math.pi * k / n
        x = e.a * math.cos(t)
        y = e.b * math.sin(t)
        pts.append((e.cx + x * ct - y * st, e.cy + x * st + y * ct))
    return pts


def _draw_overlay(crop: np.ndarray, size, blur_sigma: float, raycast_cfg) -> np.ndarray:
    from PIL import Image, ImageDraw

    img = Image.fromarray(crop, mode="L").convert("RGB")
    draw = ImageDraw.Draw(img)
    binary = otsu_threshold(gaussian_blur(crop, blur_sigma)).binary
    for x, y in raycast_contour(binary, raycast_cfg):
        draw.ellipse([x - 2, y - 2, x + 2, y + 2], outline=(255, 220, 0))
    if size is not None:
        draw.line(_ellipse_points(size.rim), fill=(255, 60, 60), width=2)
        draw.line(_ellipse_points(size.pitch), fill=(60, 255, 60), width=2)
    return np.asarray(img)


def cmd_fit(args) -> int:
    cfg = load_config(args.config)
    frames_a = list_frames(args.frames)
    frames_b = list_frames(args.frames_b) if args.frames_b else None
    bolts_a = ExternalDetectionSource(args.dets_a) if args.dets_a else None
    bolts_b = ExternalDetectionSource(args.dets_b) if args.dets_b else None
    overlay_dir = Path(args.debug_overlay) if args.debug_overlay else None
    if overlay_dir:
        overlay_dir.mkdir(parents=True, exist_ok=True)
    out_rows = []
    for row in _load_track_rows(args.tracks):
        if row.get("label") != Label.WHEEL.value:
            continue
        crop = _crop_for_row(row, frames_a, frames_b)
        if crop is None:
            continue
        frame = int(row["frame"])
        camera = row.get("camera", "A")
        bolt_source = bolts_a if camera == "A" else bolts_b
        frame_bolts = (
            bolt_source.detections(frame, None, Label.BOLT) if bolt_source else []
        )
        box = BBox(*row["bbox"])
        size = size_crop(crop, frame_bolts, box, cfg.size)
        if size is not None:
            out_rows.append(
                {
                    "schema": SIZE_SCHEMA,
                    "frame": frame,
                    "track": int(row["track"]),
                    "diameter_mm": size.diameter_mm,
                    "confidence": size.confidence,
                    "rim": [size.rim.cx, size.rim.cy, size.rim.a, size.rim.b, size.rim.theta],
                    "pitch": [
                        size.pitch.cx,
                        size.pitch.cy,
                        size.pitch.a,
                        size.pitch.b,
                        size.pitch.theta,
                    ],
                }
            )
        if overlay_dir is not None:
            overlay = _draw_overlay(crop, size, cfg.size.blur_sigma, cfg.size.raycast)
            write_image(
                overlay_dir / f"fit_{frame:06d}_{int(row['track'])}.png", overlay
            )
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"schema": SIZE_SCHEMA}) + "\n")
        for row in out_rows:
            fh.write(json.dumps(row) + "\n")
    print(f"wrote {len(out_rows)} size rows to {args.out}")
    return 0


def _load_sizes(path: str | Path) -> dict[tuple[int, int], object]:
    from .ellipsefit import SizeEstimate

    sizes: dict[tuple[int, int], SizeEstimate] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            row = json.loads(raw)
            if set(row) == {"schema"}:
                continue
            try:
                sizes[(int(row["frame"]), int(row["track"]))] = SizeEstimate(
                    rim=Ellipse(*row["rim"]),
                    pitch=Ellipse(*row["pitch"]),
                    diameter_mm=float(row["diameter_mm"]),
                    confidence=float(row["confidence"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ProviderError(f"{path}:{ln}: bad size record ({exc})") from exc
    return sizes


def cmd_track(args) -> int:
    cfg = load_config(args.config)
    dets_a = ExternalDetectionSource(args.dets_a)
    dets_b = ExternalDetectionSource(args.dets_b) if args.dets_b else None
    classes = ExternalClassSource(args.classes) if args.classes else None
    sizes = _load_sizes(args.sizes) if args.sizes else {}
    num_frames = args.num_frames
    if num_frames is None:
        num_frames = dets_a.max_frame + 1
        if dets_b is not None:
            num_frames = max(num_frames, dets_b.max_frame + 1)
    frame_width = args.frame_size[0]

    assembler = StreamAssembler(cfg, frame_width)

    def attach_from_files(frame, mirror_id, det, entry):
        del det
        if classes is not None:
            scores = classes.scores(frame=frame, track=mirror_id)
            if scores is not None:
                entry.rim_class = int(np.argmax(scores))
                entry.margins = scores
        entry.size = sizes.get((frame, mirror_id))

    for frame in range(num_frames):
        cars = dets_a.detections(frame, None, Label.CAR)
        wheels = dets_a.detections(frame, None, Label.WHEEL)
        b_wheels = dets_b.detections(frame, None, Label.WHEEL) if dets_b else []
        assign = assembler.step(frame, cars, wheels, b_wheels)
        for det, tid in zip(wheels, assign.wheel_track_ids):
            rim_class = margins = None
            if classes is not None:
                scores = classes.scores(frame=frame, track=tid)
                if scores is not None:
                    rim_class = int(np.argmax(scores))
                    margins = scores
            assembler.tracker.add_observation(
                tid,
                frame,
                rim_class=rim_class,
                margins=margins,
                size=sizes.get((frame, tid)),
            )
        done = assembler.tracker.pop_completed()
        if done:
            assembler.complete(done, attach_from_files)
    assembler.complete(assembler.tracker.finish(), attach_from_files)

    if args.out_tracks:
        write_track_rows(args.out_tracks, assembler.track_rows)
        print(f"wrote {len(assembler.track_rows)} track rows to {args.out_tracks}")
    if args.out_verdicts:
        write_verdicts(args.out_verdicts, assembler.verdicts)
        print(f"wrote {len(assembler.verdicts)} verdicts to {args.out_verdicts}")
    return 0


def cmd_eval(args) -> int:
    gts = read_yolo_ground_truth(
        args.gt,
        label_names=tuple(args.gt_classes.split(",")),
        frame_size=tuple(args.frame_size) if args.frame_size else None,
    )
    label = Label(args.label)
    gts = [g for g in gts if g.label == label]
    if not gts:
        raise ProviderError(f"no ground truth with label {label.value!r}")
    source = ExternalDetectionSource(args.dets)
    dets = []
    for frame in range(source.max_frame + 1):
        dets.extend(source.detections(frame, None, label))
    operating = precision_recall_best_f1(dets, gts, iou_t=0.5)
    result = map_range(dets, gts)
    report = {
        "label": label.value,
        "instances": len(gts),
        "precision": operating["precision"],
        "recall": operating["recall"],
        "operating_point": "best-F1 score threshold "
        f"{operating['score_threshold']:.4f} at IoU 0.5",
        "map@.5": result.per_threshold[0.5],
        "map@.5:.95": result.mean_ap,
    }
    text = json.dumps(report, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return 0


def _class_id_from_dirname(name: str) -> int:
    digits = "".join(ch for ch in name if ch.isdigit())
    if not digits:
        raise ProviderError(f"class directory {name!r} has no numeric id")
    return int(digits)


def cmd_train_svm(args) -> int:
    data_dir = Path(args.data)
    class_dirs = sorted(p for p in data_dir.iterdir() if p.is_dir())
    if len(class_dirs) < 2:
        raise ProviderError(f"need at least 2 class directories in {data_dir}")
    hog = HogConfig(
        orientations=args.orientations,
        cell=args.cell,
        block=args.block,
        block_stride=args.stride,
    )
    rng = np.random.default_rng(args.seed)
    train_x, train_y, test_x, test_y = [], [], [], []
    side = None
    for cdir in class_dirs:
        cls = _class_id_from_dirname(cdir.name)
        files = sorted(cdir.glob("*.png")) + sorted(cdir.glob("*.jpg")) + sorted(
            cdir.glob("*.pgm")
        )
        if len(files) < 2:
            raise ProviderError(f"class {cdir.name} has fewer than 2 images")
        order = rng.permutation(len(files))
        n_test = max(1, int(round(args.holdout * len(files))))
        for rank, idx in enumerate(order):
            gray = to_grayscale(read_image(files[idx]))
            if gray.shape[0] != gray.shape[1]:
                raise ProviderError(f"{files[idx]}: crops must be square")
            if side is None:
                side = gray.shape[0]
            elif gray.shape[0] != side:
                raise ProviderError(f"{files[idx]}: all crops must be {side}x{side}")
            feat = hog_features(gray, hog)
            if rank < n_test:
                test_x.append(feat)
                test_y.append(cls)
            else:
                train_x.append(feat)
                train_y.append(cls)
    model = svm_train(
        np.array(train_x),
        train_y,
        c=args.c,
        epochs=args.epochs,
        hog=hog,
        side=side,
        seed=args.seed,
    )
    correct = sum(
        svm_predict(model, feat)[0] == cls for feat, cls in zip(test_x, test_y)
    )
    accuracy = correct / len(test_y)
    save_model(args.out, model)
    report = {
        "orientations": hog.orientations,
        "pixels_per_cell": hog.cell,
        "accuracy": round(accuracy, 4),
        "features": hog_dims(hog, side),
        "classes": list(model.classes),
        "train_samples": len(train_y),
        "test_samples": len(test_y),
        "model": str(args.out),
    }
    text = json.dumps(report, indent=2)
    print(text)
    if args.report:
        Path(args.report).write_text(text + "\n", encoding="utf-8")
    return 0


def _truth_record(t) -> dict:
    return {
        "bbox": [t.bbox.x, t.bbox.y, t.bbox.w, t.bbox.h],
        "rim": [t.rim.cx, t.rim.cy, t.rim.a, t.rim.b, t.rim.theta],
        "pitch": [t.pitch.cx, t.pitch.cy, t.pitch.a, t.pitch.b, t.pitch.theta],
        "bolts": [[x, y] for x, y in t.bolt_centers],
        "class_id": t.class_id,
    }


def _truth_detections(frame: int, truths, bolt_radius_px: float) -> list[Detection]:
    dets = []
    boxes = [t.bbox for t in truths if t is not None]
    if not boxes:
        return dets
    x_lo = min(b.x for b in boxes) - 40
    x_hi = max(b.x + b.w for b in boxes) + 40
    y_hi = max(b.y + b.h for b in boxes) + 10
    y_lo = min(b.y for b in boxes) - 0.9 * max(b.h for b in boxes)
    dets.append(
        Detection(frame, Label.CAR, BBox(x_lo, y_lo, x_hi - x_lo, y_hi - y_lo), 1.0)
    )
    for t in truths:
        if t is None:
            continue
        dets.append(Detection(frame, Label.WHEEL, t.bbox, 1.0))
        for bx, by in t.bolt_centers:
            dets.append(
                Detection(
                    frame,
                    Label.BOLT,
                    BBox(
                        bx - bolt_radius_px,
                        by - bolt_radius_px,
                        2 * bolt_radius_px,
                        2 * bolt_radius_px,
                    ),
                    1.0,
                )
            )
    return dets


def cmd_synth(args) -> int:
    from .synth import BOLT_RADIUS_MM, CLASS_SPOKES

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "wheel":
        spec = SceneSpec(
            width=args.width,
            height=args.height,
            wheels=(
                WheelSpec(
                    center=(args.width / 2.0, args.height / 2.0),
                    tilt_deg=args.tilt,
                    spoke_count=CLASS_SPOKES[args.wheel_class],
                    px_per_mm=args.px_per_mm,
                ),
            ),
            noise_sigma=args.noise,
            seed=args.seed,
        )
        img, truth = render_wheel(spec)
        write_image(out / "wheel.png", img)
        (out / "truth.json").write_text(
            json.dumps({"wheels": [_truth_record(t) for t in truth.wheels]}, indent=2)
            + "\n",
            encoding="utf-8",
        )
        print(f"wrote {out / 'wheel.png'}")
        return 0

    # carpass: one car, two wheels per camera, both cameras.
    class_ids = [int(v) for v in args.classes.split(",")]
    if len(class_ids) != 4:
        raise ConfigError("--classes needs 4 ids (FR,RR,FL,RL)")
    ppm = args.px_per_mm
    y = args.height * 2 / 3.0
    rear_x, front_x = args.width * 0.19, args.width * 0.19 + args.wheelbase

    def wheel(x, cls, phase, extra=0.0):
        return WheelSpec(
            center=(x + extra, y),
            tilt_deg=args.tilt,
            spoke_count=CLASS_SPOKES[cls],
            px_per_mm=ppm,
            phase_deg=phase,
        )

    spec_a = SceneSpec(
        width=args.width,
        height=args.height,
        wheels=(wheel(front_x, class_ids[0], 0.0), wheel(rear_x, class_ids[1], 6.0)),
        noise_sigma=args.noise,
        seed=args.seed,
    )
    spec_b = SceneSpec(
        width=args.width,
        height=args.height,
        wheels=(
            wheel(front_x, class_ids[2], -6.0, extra=args.b_offset),
            wheel(rear_x, class_ids[3], 3.0, extra=args.b_offset),
        ),
        noise_sigma=args.noise,
        seed=args.seed + 9999,
    )
    frames_a, truths_a = render_sequence(spec_a, args.frames, args.velocity)
    frames_b, truths_b = render_sequence(spec_b, args.frames, args.velocity)
    (out / "frames_a").mkdir(exist_ok=True)
    (out / "frames_b").mkdir(exist_ok=True)
    dets_a: list[Detection] = []
    dets_b: list[Detection] = []
    truth_dump = []
    bolt_r = BOLT_RADIUS_MM * ppm
    for f in range(args.frames):
        write_image(out / "frames_a" / f"{f:06d}.png", frames_a[f])
        write_image(out / "frames_b" / f"{f:06d}.png", frames_b[f])
        dets_a.extend(_truth_detections(f, truths_a[f].wheels, bolt_r))
        dets_b.extend(_truth_detections(f, truths_b[f].wheels, bolt_r))
        truth_dump.append(
            {
                "frame": f,
                "camera_a": [
                    _truth_record(t) if t else None for t in truths_a[f].wheels
                ],
                "camera_b": [
                    _truth_record(t) if t else None for t in truths_b[f].wheels
                ],
            }
        )
    if args.emit_detections:
        write_detections(out / "dets_a.jsonl", dets_a)
        write_detections(out / "dets_b.jsonl", dets_b)
    (out / "truth.json").write_text(
        json.dumps(truth_dump, indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote {args.frames} frame pairs to {out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="rim-inspect", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="run the full pipeline")
    p.add_argument("--config", default=None)
    p.add_argument("--camera-a", default=None)
    p.add_argument("--camera-b", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--detections", default=None)
    p.add_argument("--detections-b", default=None)
    p.add_argument("--classes", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("detect", help="run one detection provider over frames")
    p.add_argument("--frames", default=None)
    p.add_argument("--provider", default="hough")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("classify", help="classify wheel crops along tracks")
    p.add_argument("--frames", required=True)
    p.add_argument("--frames-b", default=None)
    p.add_argument("--tracks", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("fit", help="estimate rim sizes along tracks")
    p.add_argument("--frames", required=True)
    p.add_argument("--frames-b", default=None)
    p.add_argument("--tracks", required=True)
    p.add_argument("--dets-a", default=None, help="detections with bolt boxes")
    p.add_argument("--dets-b", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--debug-overlay", default=None, metavar="DIR")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("track", help="associate detections and emit verdicts")
    p.add_argument("--dets-a", required=True)
    p.add_argument("--dets-b", default=None)
    p.add_argument("--classes", default=None)
    p.add_argument("--sizes", default=None)
    p.add_argument("--num-frames", type=int, default=None)
    p.add_argument("--frame-size", type=int, nargs=2, default=(1920, 1080))
    p.add_argument("--config", default=None)
    p.add_argument("--out-tracks", default=None)
    p.add_argument("--out-verdicts", default=None)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="detection metrics against YOLO annotations")
    p.add_argument("--dets", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--label", default="wheel")
    p.add_argument("--gt-classes", default="car,wheel")
    p.add_argument("--frame-size", type=int, nargs=2, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("train-svm", help="train the HOG+SVM rim classifier")
    p.add_argument("--data", required=True, help="class-named subdirectories of crops")
    p.add_argument("--out", required=True)
    p.add_argument("--orientations", type=int, default=13)
    p.add_argument("--cell", type=int, default=24)
    p.add_argument("--block", type=int, default=3)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--holdout", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_train_svm)

    p = sub.add_parser("synth", help="generate synthetic scenes with ground truth")
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=("wheel", "carpass"), default="carpass")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=30)
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=360)
    p.add_argument("--velocity", type=float, default=5.0)
    p.add_argument("--noise", type=float, default=2.0)
    p.add_argument("--tilt", type=float, default=12.0)
    p.add_argument("--px-per-mm", type=float, default=0.35)
    p.add_argument("--wheelbase", type=float, default=260.0)
    p.add_argument("--b-offset", type=float, default=8.0)
    p.add_argument("--classes", default="3,3,3,3", help="class ids FR,RR,FL,RL")
    p.add_argument("--wheel-class", type=int, default=3)
    p.add_argument("--emit-detections", action="store_true", default=True)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (ProviderError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except Exception as exc:  # pragma: no cover - defensive
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return INTERNAL_EXIT


if __name__ == "__main__":
    sys.exit(main())

"""TOML pipeline configuration.

Every block maps onto one stage's config dataclass; CLI flags override
individual keys.  Unknown keys are rejected so typos fail loudly instead of
silently running with defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .ellipsefit import PitchCircleSpec, RaycastConfig
from .features import HogConfig
from .hough import HoughConfig, WHEEL_CONFIG
from .tracking import TrackerConfig


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


@dataclass(frozen=True)
class SizeConfig:
    raycast: RaycastConfig = RaycastConfig()
    pitch: PitchCircleSpec = PitchCircleSpec()
    blur_sigma: float = 1.0


@dataclass(frozen=True)
class SvmTrainConfig:
    hog: HogConfig = HogConfig()
    c: float = 1.0
    epochs: int = 200
    seed: int = 0
    holdout: float = 0.25


@dataclass(frozen=True)
class PipelineConfig:
    camera_a: Path | None = None
    camera_b: Path | None = None
    out_dir: Path = Path("out")
    detections: str = "hough"  # "hough" or "external:<path>"
    detections_b: str | None = None  # external:<path>; camera B is optional
    classes: str | None = None  # "svm:<model path>" or "external:<path>"
    downscale: int = 4
    blur_sigma: float = 1.5
    latency_budget_ms: float = 400.0
    seed: int = 0
    hough: HoughConfig = WHEEL_CONFIG
    tracker: TrackerConfig = TrackerConfig()
    size: SizeConfig = SizeConfig()
    svm: SvmTrainConfig = SvmTrainConfig()
    link_window_frac: float = 0.15


def _build(cls, block: dict, where: str, remap: dict | None = None):
    remap = remap or {}
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in block.items():
        name = remap.get(key, key)
        if name not in names:
            raise ConfigError(f"unknown key {key!r} in [{where}]")
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [{where}] block: {exc}") from exc


def load_config(path: str | Path | None) -> PipelineConfig:
    """Parse a TOML file into a PipelineConfig; None gives pure defaults."""
    if path is None:
        return PipelineConfig()
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    known_blocks = {"pipeline", "providers", "hough", "tracker", "size", "svm"}
    unknown = set(raw) - known_blocks
    if unknown:
        raise ConfigError(f"unknown config blocks: {sorted(unknown)}")

    top: dict = {}
    pipeline = dict(raw.get("pipeline", {}))
    for key in ("camera_a", "camera_b", "out_dir"):
        if key in pipeline:
            top[key] = Path(pipeline.pop(key))
    for key in ("downscale", "blur_sigma", "latency_budget_ms", "seed", "link_window_frac"):
        if key in pipeline:
            top[key] = pipeline.pop(key)
    if pipeline:
        raise ConfigError(f"unknown key(s) in [pipeline]: {sorted(pipeline)}")

    providers = dict(raw.get("providers", {}))
    for key in ("detections", "detections_b", "classes"):
        if key in providers:
            top[key] = providers.pop(key)
    if providers:
        raise ConfigError(f"unknown key(s) in [providers]: {sorted(providers)}")

    if "hough" in raw:
        top["hough"] = _build(HoughConfig, raw["hough"], "hough")
    if "tracker" in raw:
        top["tracker"] = _build(TrackerConfig, raw["tracker"], "tracker")
    if "size" in raw:
        size_block = dict(raw["size"])
        ray = {}
        for key in ("spacing", "rays_per_edge"):
            if key in size_block:
                ray[key] = size_block.pop(key)
        pitch = {}
        for key in ("diameter_mm", "bolt_count"):
            if key in size_block:
                pitch[key] = size_block.pop(key)
        blur = {"blur_sigma": size_block.pop("blur_sigma")} if "blur_sigma" in size_block else {}
        if size_block:
            raise ConfigError(f"unknown key(s) in [size]: {sorted(size_block)}")
        top["size"] = SizeConfig(
            raycast=_build(RaycastConfig, ray, "size"),
            pitch=_build(PitchCircleSpec, pitch, "size"),
            **blur,
        )
    if "svm" in raw:
        svm_block = dict(raw["svm"])
        hog = {}
        for key in ("orientations", "cell", "block", "block_stride", "signed"):
            if key in svm_block:
                hog[key] = svm_block.pop(key)
        rest = {}
        for key in ("c", "epochs", "seed", "holdout"):
            if key in svm_block:
                rest[key] = svm_block.pop(key)
        if svm_block:
            raise ConfigError(f"unknown key(s) in [svm]: {sorted(svm_block)}")
        top["svm"] = SvmTrainConfig(hog=_build(HogConfig, hog, "svm"), **rest)

    try:
        return PipelineConfig(**top)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc

"""Image decode/encode at the CLI boundary: 8-bit PNG, JPEG and binary PGM."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".pgm")


def read_image(path: str | Path) -> np.ndarray:
    """Load an image as uint8, grayscale (H, W) or RGB (H, W, 3)."""
    with Image.open(path) as im:
        if im.mode in ("L", "I;16"):
            im = im.convert("L")
            return np.asarray(im, dtype=np.uint8)
        im = im.convert("RGB")
        return np.asarray(im, dtype=np.uint8)


def write_image(path: str | Path, img: np.ndarray) -> None:
    """Write a uint8 array as PNG/JPEG/PGM, chosen by the file suffix."""
    path = Path(path)
    if img.dtype != np.uint8 or img.ndim not in (2, 3):
        raise ValueError("expected a uint8 HxW or HxWx3 array")
    mode = "L" if img.ndim == 2 else "RGB"
    Image.fromarray(img, mode=mode).save(path)


def list_frames(directory: str | Path) -> list[Path]:
    """Image files of a sequence directory in lexicographic frame order."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"frame directory not found: {directory}")
    frames = sorted(
        p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    )
    if not frames:
        raise FileNotFoundError(f"no frames (*.png/*.jpg/*.pgm) in {directory}")
    return frames

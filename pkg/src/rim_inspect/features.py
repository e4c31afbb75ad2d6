"""HOG descriptor extraction and multi-class linear SVM for rim classification.

The descriptor follows Dalal-Triggs: per-cell orientation histograms with
magnitude-weighted votes split linearly between the two nearest bins, then
overlapping blocks of cells L2-normalized and concatenated.  Gradients are
unsigned (orientations folded to [0, pi)) since rim spokes carry no
meaningful gradient sign.

Classification is one-vs-rest with linear machines trained by full-batch
subgradient descent on the hinge loss with L2 regularization.  Training is
deterministic: same data and seed reproduce the model bit for bit, and the
decision function does not depend on sample order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imgproc import sobel_gradients

MODEL_MAGIC = b"RIMSVM1\n"
MODEL_VERSION = 1


@dataclass(frozen=True)
class HogConfig:
    orientations: int = 13
    cell: int = 24  # pixels per cell side
    block: int = 3  # cells per block side
    block_stride: int = 1  # cells
    signed: bool = False

    def __post_init__(self):
        if self.orientations < 2:
            raise ValueError("need at least 2 orientation bins")
        if self.cell < 2 or self.block < 1 or self.block_stride < 1:
            raise ValueError("invalid cell/block geometry")


def hog_dims(cfg: HogConfig, side: int) -> int:
    """Feature-vector length for a square side x side input."""
    if side < cfg.cell * cfg.block:
        raise ValueError(
            f"side {side} too small for one {cfg.block}x{cfg.block} block "
            f"of {cfg.cell} px cells"
        )
    n_cells = side // cfg.cell
    n_blocks = (n_cells - cfg.block) // cfg.block_stride + 1
    return n_blocks * n_blocks * cfg.block * cfg.block * cfg.orientations


def hog_features(gray: np.ndarray, cfg: HogConfig) -> np.ndarray:
    """HOG descriptor of a square grayscale image as a float64 vector."""
    if gray.ndim != 2 or gray.shape[0] != gray.shape[1]:
        raise ValueError(f"expected a square grayscale image, got {gray.shape}")
    side = gray.shape[0]
    dims = hog_dims(cfg, side)

    grad = sobel_gradients(gray)
    n_cells = side // cfg.cell
    used = n_cells * cfg.cell
    mag = grad.magnitude[:used, :used].astype(np.float64)
    ori = grad.orientation[:used, :used].astype(np.float64)

    span = 2.0 * np.pi if cfg.signed else np.pi
    k = cfg.orientations
    bin_width = span / k
    pos = ori / bin_width - 0.5
    lo = np.floor(pos)
    w_hi = pos - lo
    lo_bin = (lo.astype(np.int64)) % k
    hi_bin = (lo_bin + 1) % k

    cell_row = (np.arange(used) // cfg.cell).astype(np.int64)
    cy = np.broadcast_to(cell_row[:, None], (used, used))
    cx = np.broadcast_to(cell_row[None, :], (used, used))
    base = (cy * n_cells + cx) * k

    hists = np.bincount(
        np.concatenate([(base + lo_bin).ravel(), (base + hi_bin).ravel()]),
        weights=np.concatenate([(mag * (1.0 - w_hi)).ravel(), (mag * w_hi).ravel()]),
        minlength=n_cells * n_cells * k,
    ).reshape(n_cells, n_cells, k)

    windows = np.lib.stride_tricks.sliding_window_view(hists, (cfg.block, cfg.block, k))
    blocks = windows[:: cfg.block_stride, :: cfg.block_stride, 0]
    n_blocks = blocks.shape[0]
    flat = blocks.reshape(n_blocks, n_blocks, -1)
    norms = np.sqrt((flat**2).sum(axis=2) + 1e-6)
    feat = (flat / norms[:, :, None]).ravel()
    assert feat.size == dims
    return feat


@dataclass(frozen=True)
class SvmModel:
    """One-vs-rest linear machines plus the descriptor geometry they expect."""

    classes: tuple[int, ...]
    weights: np.ndarray  # (n_classes, dims) float64
    biases: np.ndarray  # (n_classes,) float64
    hog: HogConfig | None = None
    side: int = 0

    def __post_init__(self):
        if len(self.classes) == 0 or len(set(self.classes)) != len(self.classes):
            raise ValueError("classes must be non-empty and distinct")
        if self.weights.ndim != 2 or self.weights.shape[0] != len(self.classes):
            raise ValueError("weights shape mismatch")
        if self.biases.shape != (len(self.classes),):
            raise ValueError("biases shape mismatch")
        if self.hog is not None and self.weights.shape[1] != hog_dims(self.hog, self.side):
            raise ValueError("weight length does not match descriptor dimensions")


def svm_train(
    features: np.ndarray,
    labels,
    c: float = 1.0,
    epochs: int = 200,
    *,
    hog: HogConfig | None = None,
    side: int = 0,
    seed: int = 0,
) -> SvmModel:
    """Train one-vs-rest linear SVMs by full-batch hinge subgradient descent.

    The Pegasos step size 1/(lambda*t) with lambda = 1/(c*n) is used on the
    whole batch each epoch, which makes the result independent of sample
    order.  `seed` is part of the signature for reproducibility bookkeeping;
    the optimization itself is deterministic.
    """
    del seed  # deterministic full-batch updates; kept for API stability
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or len(x) != len(y):
        raise ValueError("features must be (n, d) with one label per row")
    if not np.isfinite(x).all():
        raise ValueError("features contain NaN or infinity")
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise ValueError("need at least 2 classes to train")
    if counts.min() < 2:
        raise ValueError("need at least 2 samples per class")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if c <= 0:
        raise ValueError("regularization parameter c must be positive")
    if hog is not None and x.shape[1] != hog_dims(hog, side):
        raise ValueError("feature length does not match the given HOG geometry")

    n = len(x)
    lam = 1.0 / (c * n)
    weights = np.zeros((len(classes), x.shape[1]))
    biases = np.zeros(len(classes))
    for ci, cls in enumerate(classes):
        target = np.where(y == cls, 1.0, -1.0)
        w = np.zeros(x.shape[1])
        b = 0.0
        for t in range(1, epochs + 1):
            margins = target * (x @ w + b)
            viol = margins < 1.0
            eta = 1.0 / (lam * t)
            coeff = target * viol
            w = (1.0 - eta * lam) * w + (eta / n) * (x.T @ coeff)
            b = b + (eta / n) * coeff.sum()
        weights[ci] = w
        biases[ci] = b
    return SvmModel(
        classes=tuple(int(v) for v in classes),
        weights=weights,
        biases=biases,
        hog=hog,
        side=side,
    )


def svm_predict(model: SvmModel, feat: np.ndarray) -> tuple[int, np.ndarray]:
    """Predicted class and per-class margins; ties go to the smaller class id."""
    feat = np.asarray(feat, dtype=np.float64)
    if feat.shape != (model.weights.shape[1],):
        raise ValueError(
            f"feature length {feat.shape} does not match model ({model.weights.shape[1]},)"
        )
    margins = model.weights @ feat + model.biases
    # classes are stored ascending, so argmax's first-hit rule is the tie-break
    return model.classes[int(np.argmax(margins))], margins


def save_model(path: str | Path, model: SvmModel) -> None:
    """Serialize a model to the portable little-endian binary layout.

    Layout (all integers little-endian):
      8s  magic "RIMSVM1\\n"
      u32 version (1)
      u32 orientations, u32 cell, u32 block, u32 block_stride
      u8  signed flag, 3 zero bytes padding
      u32 side, u32 n_classes, u32 dims
      u32[n_classes] class ids
      f64[n_classes * dims] weights, class-major
      f64[n_classes] biases
    """
    if model.hog is None:
        raise ValueError("only models with HOG geometry can be serialized")
    header = struct.pack(
        "<8sIIIIIB3xIII",
        MODEL_MAGIC,
        MODEL_VERSION,
        model.hog.orientations,
        model.hog.cell,
        model.hog.block,
        model.hog.block_stride,
        1 if model.hog.signed else 0,
        model.side,
        len(model.classes),
        model.weights.shape[1],
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.asarray(model.classes, dtype="<u4").tobytes())
        fh.write(np.ascontiguousarray(model.weights, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.biases, dtype="<f8").tobytes())


def load_model(path: str | Path) -> SvmModel:
    """Inverse of save_model; validates magic, version and payload size."""
    blob = Path(path).read_bytes()
    head_size = struct.calcsize("<8sIIIIIB3xIII")
    if len(blob) < head_size:
        raise ValueError(f"{path}: truncated model file")
    (
        magic,
        version,
        orientations,
        cell,
        block,
        stride,
        signed,
        side,
        n_classes,
        dims,
    ) = struct.unpack_from("<8sIIIIIB3xIII", blob)
    if magic != MODEL_MAGIC:
        raise ValueError(f"{path}: not a rim-inspect SVM model")
    if version != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {version}")
    expected = head_size + 4 * n_classes + 8 * n_classes * dims + 8 * n_classes
    if len(blob) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(blob)}")
    off = head_size
    classes = np.frombuffer(blob, dtype="<u4", count=n_classes, offset=off)
    off += 4 * n_classes
    weights = np.frombuffer(blob, dtype="<f8", count=n_classes * dims, offset=off)
    off += 8 * n_classes * dims
    biases = np.frombuffer(blob, dtype="<f8", count=n_classes, offset=off)
    return SvmModel(
        classes=tuple(int(v) for v in classes),
        weights=weights.reshape(n_classes, dims).copy(),
        biases=biases.copy(),
        hog=HogConfig(orientations, cell, block, stride, bool(signed)),
        side=side,
    )

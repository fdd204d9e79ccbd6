"""Core image types, resampling and frame-sequence I/O.

Conventions used throughout the package:

- A *frame* is a numpy float32 array of shape (3, H, W), planar RGB,
  values in [0, 1].
- A *tensor* is any numpy float32 array of shape (C, H, W).
- PNG (8- or 16-bit RGB) is the interchange format; the raw "LLFR"
  float32 format is available for lossless intermediates.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import cv2
import numpy as np

LLFR_MAGIC = b"LLFR"


class ImageIOError(Exception):
    """Raised for unreadable, undecodable or unwritable image files."""


def validate_frame(frame: np.ndarray, context: str = "frame") -> np.ndarray:
    """Assert the frame contract: shape (3,H,W), finite, samples in [0,1]."""
    if frame.ndim != 3 or frame.shape[0] != 3:
        raise ValueError(f"{context}: expected shape (3,H,W), got {frame.shape}")
    if not np.isfinite(frame).all():
        raise ValueError(f"{context}: contains NaN/Inf samples")
    if frame.min() < 0.0 or frame.max() > 1.0:
        raise ValueError(f"{context}: samples outside [0,1] "
                         f"(min={frame.min():.4g}, max={frame.max():.4g})")
    return frame


def load_frame(path: str, bit_depth: int = 8) -> np.ndarray:
    """Load an RGB PNG into a (3,H,W) float32 frame scaled to [0,1]."""
    if bit_depth not in (8, 16):
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    if not os.path.isfile(path):
        raise ImageIOError(f"missing image file: {path}")
    img = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if img is None:
        raise ImageIOError(f"cannot decode image file: {path}")
    if img.ndim != 3 or img.shape[2] != 3:
        raise ImageIOError(
            f"expected 3-channel RGB image, got shape {img.shape}: {path}")
    expected_dtype = np.uint8 if bit_depth == 8 else np.uint16
    if img.dtype != expected_dtype:
        raise ImageIOError(
            f"expected {bit_depth}-bit samples, file holds {img.dtype}: {path}")
    img = cv2.cvtColor(img, cv2.COLOR_BGR2RGB)
    scale = float(2 ** bit_depth - 1)
    frame = np.ascontiguousarray(img.transpose(2, 0, 1)).astype(np.float32) / scale
    return frame


def save_frame(frame: np.ndarray, path: str, bit_depth: int = 8) -> None:
    """Write a frame as an 8- or 16-bit RGB PNG (round trip bounded by
    one quantization step)."""
    if bit_depth not in (8, 16):
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    validate_frame(frame, context=path)
    scale = float(2 ** bit_depth - 1)
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    quant = np.rint(frame * scale).astype(dtype).transpose(1, 2, 0)
    bgr = cv2.cvtColor(quant, cv2.COLOR_RGB2BGR)
    ok = cv2.imwrite(path, bgr)
    if not ok:
        raise ImageIOError(f"cannot write image file: {path}")


def save_frame_llfr(frame: np.ndarray, path: str) -> None:
    """Write the raw lossless format: magic 'LLFR', u32 width, u32 height,
    then 3*H*W float32 little-endian samples."""
    validate_frame(frame, context=path)
    _, h, w = frame.shape
    try:
        with open(path, "wb") as f:
            f.write(LLFR_MAGIC)
            f.write(struct.pack("<II", w, h))
            f.write(frame.astype("<f4").tobytes())
    except OSError as e:
        raise ImageIOError(f"cannot write raw frame file: {path} ({e})") from e


def load_frame_llfr(path: str) -> np.ndarray:
    if not os.path.isfile(path):
        raise ImageIOError(f"missing raw frame file: {path}")
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != LLFR_MAGIC:
        raise ImageIOError(f"bad magic in raw frame file: {path}")
    w, h = struct.unpack_from("<II", blob, 4)
    n_bytes = len(blob) - 12
    data = np.frombuffer(blob, dtype="<f4", offset=12, count=n_bytes // 4)
    if data.size != 3 * h * w:
        raise ImageIOError(
            f"truncated raw frame file (want {3*h*w} samples, "
            f"have {data.size}): {path}")
    return data.reshape(3, h, w).astype(np.float32)


@dataclass(frozen=True)
class SequenceSpec:
    """A contiguous frame sequence addressed by a printf-style pattern,
    e.g. pattern='frames/in_%06d.png', start=0, count=13."""
    pattern: str
    start: int
    count: int
    bit_depth: int = 8

    def path(self, index: int) -> str:
        if not (self.start <= index < self.start + self.count):
            raise IndexError(f"frame index {index} outside "
                             f"[{self.start}, {self.start + self.count})")
        return self.pattern % index

    def indices(self) -> range:
        return range(self.start, self.start + self.count)


def _area_weights(n_in: int, n_out: int) -> np.ndarray:
    """Row-weight matrix (n_out, n_in) for exact fractional-footprint area
    averaging along one axis. Each output cell integrates the source
    interval it covers; rows sum to 1."""
    if n_out <= 0:
        raise ValueError("output dimension must be >= 1")
    if n_out > n_in:
        raise ValueError(f"area resize is downsampling-only ({n_in} -> {n_out})")
    w = np.zeros((n_out, n_in), dtype=np.float64)
    scale = n_in / n_out
    for i in range(n_out):
        lo = i * scale
        hi = (i + 1) * scale
        j0 = int(np.floor(lo))
        j1 = int(np.ceil(hi))
        for j in range(j0, min(j1, n_in)):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 0:
                w[i, j] = overlap / scale
    return w


def resize_area(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Downsample a (C,H,W) tensor by exact area averaging.

    Each destination sample is the average of the fractional source
    footprint it covers, so the operation is linear, preserves constants
    and preserves the global mean.
    """
    c, h, w = src.shape
    wr = _area_weights(h, out_h)
    wc = _area_weights(w, out_w)
    src64 = src.astype(np.float64)
    out = np.stack([wr @ src64[i] @ wc.T for i in range(c)])
    return out.astype(np.float32)


def to_model_domain(x: np.ndarray) -> np.ndarray:
    """Map pipeline samples [0,1] to the network domain [-1,1]."""
    return (x.astype(np.float32) * 2.0) - 1.0


def from_model_domain(x: np.ndarray) -> np.ndarray:
    """Map network output back to [0,1], clamping out-of-range values."""
    return np.clip((x.astype(np.float32) + 1.0) * 0.5, 0.0, 1.0)

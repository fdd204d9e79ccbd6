"""Overlapping tile layouts, local/region patch extraction and Gaussian-
weighted merging of enhanced tiles back into a seamless frame.

A patch pair is a (6, N_l, N_l) tensor: channels 0-2 hold the local
N_l x N_l crop, channels 3-5 the concentric N_r x N_r region crop
downsampled to N_l (area averaging).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .imagecore import resize_area


@dataclass(frozen=True)
class PatchConfig:
    n_local: int = 360
    n_region: int = 1000

    def __post_init__(self):
        if self.n_local < 2 or self.n_local % 2 != 0:
            raise ValueError(f"local patch side must be even and >= 2, "
                             f"got {self.n_local}")
        if self.n_region <= self.n_local:
            raise ValueError(f"region side ({self.n_region}) must exceed "
                             f"local side ({self.n_local})")

    @property
    def stride(self) -> int:
        return self.n_local // 2


@dataclass(frozen=True)
class TileLayout:
    width: int
    height: int
    n_local: int
    origins: tuple  # row-major (x, y) tuples


def _axis_origins(dim: int, n: int, stride: int) -> list:
    if dim < n:
        raise ValueError(f"frame dimension {dim} smaller than tile side {n}")
    last = dim - n
    origins = list(range(0, last + 1, stride))
    # covering guarantee: clamp a final tile flush with the far edge
    if origins[-1] != last:
        origins.append(last)
    return origins


def compute_layout(width: int, height: int, cfg: PatchConfig) -> TileLayout:
    """Tile origins at stride N_l/2 covering every pixel, row-major order."""
    xs = _axis_origins(width, cfg.n_local, cfg.stride)
    ys = _axis_origins(height, cfg.n_local, cfg.stride)
    origins = tuple((x, y) for y in ys for x in xs)
    return TileLayout(width=width, height=height, n_local=cfg.n_local,
                      origins=origins)


def _reflect_pad_to(frame: np.ndarray, min_h: int, min_w: int) -> np.ndarray:
    _, h, w = frame.shape
    pad_h = max(0, min_h - h)
    pad_w = max(0, min_w - w)
    if pad_h == 0 and pad_w == 0:
        return frame
    return np.pad(frame, ((0, 0), (0, pad_h), (0, pad_w)), mode="reflect")


def extract_local(frame: np.ndarray, origin: tuple, n_local: int) -> np.ndarray:
    x, y = origin
    _, h, w = frame.shape
    if not (0 <= x <= w - n_local and 0 <= y <= h - n_local):
        raise ValueError(f"tile origin {origin} out of bounds for "
                         f"{w}x{h} frame, side {n_local}")
    return frame[:, y:y + n_local, x:x + n_local]


def extract_pair(frame: np.ndarray, origin: tuple, cfg: PatchConfig) -> np.ndarray:
    """Extract the 6-channel local/region pair at the given local origin.

    The region window shares the local patch centre; where it would leave
    the frame it is translated fully inside, and frames smaller than the
    region side are reflect-padded first.
    """
    n_l, n_r = cfg.n_local, cfg.n_region
    local = extract_local(frame, origin, n_l)

    x, y = origin
    cx = x + n_l // 2
    cy = y + n_l // 2
    padded = _reflect_pad_to(frame, n_r, n_r)
    _, h, w = padded.shape
    rx = int(np.clip(cx - n_r // 2, 0, w - n_r))
    ry = int(np.clip(cy - n_r // 2, 0, h - n_r))
    region = padded[:, ry:ry + n_r, rx:rx + n_r]
    region_small = resize_area(region, n_l, n_l)
    return np.concatenate([local, region_small], axis=0)


def gaussian_weights(n_local: int) -> np.ndarray:
    """Unnormalized Gaussian merge weights, mean N_l/2 and sigma N_l/6,
    evaluated at pixel centres (x+0.5). Strictly positive everywhere."""
    if n_local < 2:
        raise ValueError("weight map needs side >= 2")
    mu = n_local / 2.0
    sigma = n_local / 6.0
    coords = np.arange(n_local, dtype=np.float64) + 0.5
    d2 = (coords - mu) ** 2
    w = np.exp(-(d2[:, None] + d2[None, :]) / (2.0 * sigma ** 2))
    return w.astype(np.float32)


def merge(tiles: Iterable, width: int, height: int,
          weights: np.ndarray) -> np.ndarray:
    """Blend (origin, (3,N_l,N_l) tensor) tiles into one frame.

    Every output pixel is the weight-normalized average of all tiles
    covering it; the covering layout plus strictly positive weights keep
    the denominator positive everywhere.
    """
    n = weights.shape[0]
    acc = np.zeros((3, height, width), dtype=np.float64)
    wacc = np.zeros((height, width), dtype=np.float64)
    w64 = weights.astype(np.float64)
    for origin, tile in tiles:
        x, y = origin
        if tile.shape != (3, n, n):
            raise ValueError(f"tile at {origin} has shape {tile.shape}, "
                             f"expected (3,{n},{n})")
        acc[:, y:y + n, x:x + n] += tile.astype(np.float64) * w64
        wacc[y:y + n, x:x + n] += w64
    if (wacc == 0).any():
        raise ValueError("merge layout leaves uncovered pixels")
    return (acc / wacc).astype(np.float32)

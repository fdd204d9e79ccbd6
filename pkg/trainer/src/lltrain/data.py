"""Patch sampling and the unpaired two-group dataset.

Frames are numpy float32 (3, H, W) in [0, 1]; sampled patch pairs are
6-channel tensors in the model domain [-1, 1] (local crop on channels
0-2, area-downsampled concentric region crop on 3-5) — the same layout
the inference engine feeds its generator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np
import torch


def _area_weights(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) row weights for exact fractional-footprint area
    averaging; rows sum to 1."""
    if n_out > n_in:
        raise ValueError(f"area resize is downsampling-only ({n_in} -> {n_out})")
    w = np.zeros((n_out, n_in), dtype=np.float64)
    scale = n_in / n_out
    for i in range(n_out):
        lo, hi = i * scale, (i + 1) * scale
        for j in range(int(np.floor(lo)), min(int(np.ceil(hi)), n_in)):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 0:
                w[i, j] = overlap / scale
    return w


def resize_area(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    c = src.shape[0]
    wr = _area_weights(src.shape[1], out_h)
    wc = _area_weights(src.shape[2], out_w)
    src64 = src.astype(np.float64)
    return np.stack([wr @ src64[i] @ wc.T for i in range(c)]) \
        .astype(np.float32)


def _reflect_pad_to(frame: np.ndarray, side: int) -> np.ndarray:
    _, h, w = frame.shape
    ph, pw = max(0, side - h), max(0, side - w)
    if ph == 0 and pw == 0:
        return frame
    return np.pad(frame, ((0, 0), (0, ph), (0, pw)), mode="reflect")


def extract_pair(frame: np.ndarray, origin: tuple, n_local: int,
                 n_region: int) -> np.ndarray:
    """6-channel local/region pair at a local origin; region window
    centered on the local patch, translated fully inside (reflect-padding
    frames smaller than the region side)."""
    x, y = origin
    local = frame[:, y:y + n_local, x:x + n_local]
    cx, cy = x + n_local // 2, y + n_local // 2
    padded = _reflect_pad_to(frame, n_region)
    _, h, w = padded.shape
    rx = int(np.clip(cx - n_region // 2, 0, w - n_region))
    ry = int(np.clip(cy - n_region // 2, 0, h - n_region))
    region = padded[:, ry:ry + n_region, rx:rx + n_region]
    return np.concatenate([local, resize_area(region, n_local, n_local)])


def sample_patches(frame: np.ndarray, n: int, n_local: int, n_region: int,
                   seed: int) -> List[np.ndarray]:
    """n patch pairs at uniformly random valid local origins,
    reproducible under the seed."""
    _, h, w = frame.shape
    if h < n_local or w < n_local:
        raise ValueError(f"frame {w}x{h} smaller than the local patch "
                         f"side {n_local}")
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n):
        x = int(rng.integers(0, w - n_local + 1))
        y = int(rng.integers(0, h - n_local + 1))
        pairs.append(extract_pair(frame, (x, y), n_local, n_region))
    return pairs


@dataclass
class UnpairedDataset:
    """Two groups of patch pairs with no correspondence between them."""
    group_a: torch.Tensor  # (n, 6, N_l, N_l), model domain
    group_b: torch.Tensor

    def __post_init__(self):
        if self.group_a.ndim != 4 or self.group_b.ndim != 4:
            raise ValueError("groups must be (n, 6, N, N) tensors")
        if self.group_a.shape[1:] != self.group_b.shape[1:]:
            raise ValueError("group patch shapes differ")
        if len(self.group_a) == 0 or len(self.group_b) == 0:
            raise ValueError("empty patch group")

    @classmethod
    def from_frames(cls, frame_a: np.ndarray, frame_b: np.ndarray,
                    n: int, n_local: int, n_region: int,
                    seed: int) -> "UnpairedDataset":
        """Sample both groups from designated first frames. Independent
        seeds keep the groups from being index-aligned."""
        a = sample_patches(frame_a, n, n_local, n_region, seed)
        b = sample_patches(frame_b, n, n_local, n_region, seed + 1)
        to_model = lambda p: torch.from_numpy(p * 2.0 - 1.0)
        return cls(group_a=torch.stack([to_model(p) for p in a]),
                   group_b=torch.stack([to_model(p) for p in b]))

    def batches(self, batch_size: int, iterations: int, seed: int):
        """Yield (a_batch, b_batch) with independent random indexing."""
        gen = torch.Generator().manual_seed(seed)
        for _ in range(iterations):
            ia = torch.randint(len(self.group_a), (batch_size,), generator=gen)
            ib = torch.randint(len(self.group_b), (batch_size,), generator=gen)
            yield self.group_a[ia], self.group_b[ib]


def synthetic_pair_frames(h: int = 256, w: int = 256, seed: int = 0,
                          dark_gain: float = 0.25, noise_std: float = 0.05):
    """A dark-noisy frame, a bright-clean frame, and the dark frame's
    clean ground truth (for evaluation only — training never sees the
    pairing)."""
    rng = np.random.default_rng(seed)

    def smooth(h_, w_):
        low = rng.random((3, (h_ + 15) // 16, (w_ + 15) // 16)) \
            .astype(np.float32)
        t = torch.from_numpy(low)[None]
        up = torch.nn.functional.interpolate(
            t, size=(h_, w_), mode="bilinear", align_corners=False)
        return up[0].numpy()

    clean_a = np.clip(smooth(h, w) * 0.6 + 0.35, 0.0, 1.0)
    dark = np.clip(clean_a * dark_gain
                   + rng.normal(0, noise_std, clean_a.shape)
                   .astype(np.float32), 0.0, 1.0).astype(np.float32)
    bright = np.clip(smooth(h, w) * 0.6 + 0.35, 0.0, 1.0).astype(np.float32)
    return dark, bright, clean_a.astype(np.float32)

"""Sequence-level orchestration: enhance / smooth / full pipeline.

Each driver is a generator of per-frame progress records (plain dicts,
one per written frame) so callers can stream them as JSON lines. At most
one frame (enhance) or one temporal window of frames (smooth) is
resident at a time.
"""

from __future__ import annotations

import os
import time
from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterator, Optional

from . import nnforward, patchwork, temporalsmooth
from .imagecore import SequenceSpec, load_frame, save_frame
from .llgw import load_weights


class PipelineError(Exception):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    input_pattern: str
    output_pattern: str
    start: int
    count: int
    weights_path: Optional[str] = None
    n_local: int = 360
    n_region: int = 1000
    n_max: int = 6
    motion_cutoff: float = 256.0
    jobs: int = 1
    bit_depth: int = 8

    def __post_init__(self):
        if self.count < 1:
            raise PipelineError("frame range is empty")
        if self.n_local % 8 != 0 or self.n_local % 2 != 0:
            raise PipelineError(
                f"local patch side must be even and divisible by 8, "
                f"got {self.n_local}")
        if self.n_region <= self.n_local:
            raise PipelineError("region side must exceed local side")
        if self.n_max < 0:
            raise PipelineError("n_max must be >= 0")
        if self.jobs < 1:
            raise PipelineError("jobs must be >= 1")

    @property
    def patch_config(self) -> patchwork.PatchConfig:
        return patchwork.PatchConfig(n_local=self.n_local,
                                     n_region=self.n_region)

    @property
    def smoothing_config(self) -> temporalsmooth.SmoothingConfig:
        return temporalsmooth.SmoothingConfig(n_max=self.n_max,
                                              motion_cutoff=self.motion_cutoff)

    def source(self) -> SequenceSpec:
        return SequenceSpec(self.input_pattern, self.start, self.count,
                            self.bit_depth)

    def sink(self) -> SequenceSpec:
        return SequenceSpec(self.output_pattern, self.start, self.count,
                            self.bit_depth)


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)


def run_enhance(cfg: PipelineConfig) -> Iterator[dict]:
    """Enhance every frame tile-by-tile and write it to the output pattern."""
    if not cfg.weights_path:
        raise PipelineError("enhance requires a weight file")
    weights = load_weights(cfg.weights_path)
    if cfg.n_local % weights.arch.downsample_factor != 0:
        raise PipelineError(
            f"local patch side {cfg.n_local} not divisible by the "
            f"generator downsampling factor {weights.arch.downsample_factor}")
    src, dst = cfg.source(), cfg.sink()
    pcfg = cfg.patch_config
    for idx in src.indices():
        t0 = time.perf_counter()
        path = src.path(idx)
        frame = load_frame(path, cfg.bit_depth)
        _, h, w = frame.shape
        if h < cfg.n_local or w < cfg.n_local:
            raise PipelineError(
                f"frame {idx} ({path}) is {w}x{h}, smaller than the "
                f"local patch side {cfg.n_local}")
        layout = patchwork.compute_layout(w, h, pcfg)
        out = nnforward.enhance_frame(frame, weights, pcfg, jobs=cfg.jobs)
        out_path = dst.path(idx)
        _ensure_parent(out_path)
        save_frame(out, out_path, cfg.bit_depth)
        yield {"stage": "enhance", "frame": idx,
               "tiles": len(layout.origins),
               "seconds": round(time.perf_counter() - t0, 4),
               "output": out_path}


def run_smooth(cfg: PipelineConfig) -> Iterator[dict]:
    """Temporally smooth the sequence with a sliding window of +-n_max
    frames (truncated at the ends)."""
    src, dst = cfg.source(), cfg.sink()
    scfg = cfg.smoothing_config
    cache: "OrderedDict[int, object]" = OrderedDict()
    dims = None

    def get_frame(i: int):
        nonlocal dims
        if i not in cache:
            f = load_frame(src.path(i), cfg.bit_depth)
            if dims is None:
                dims = f.shape
            elif f.shape != dims:
                raise PipelineError(
                    f"frame {i} has shape {f.shape[2]}x{f.shape[1]}, "
                    f"sequence started with {dims[2]}x{dims[1]}")
            cache[i] = f
            while len(cache) > 2 * scfg.n_max + 2:
                cache.popitem(last=False)
        return cache[i]

    lo_all, hi_all = cfg.start, cfg.start + cfg.count - 1
    for idx in src.indices():
        t0 = time.perf_counter()
        lo = max(lo_all, idx - scfg.n_max)
        hi = min(hi_all, idx + scfg.n_max)
        window = [get_frame(i) for i in range(lo, hi + 1)]
        out = temporalsmooth.smooth_window(window, idx - lo, scfg)
        out_path = dst.path(idx)
        _ensure_parent(out_path)
        save_frame(out, out_path, cfg.bit_depth)
        yield {"stage": "smooth", "frame": idx,
               "window": len(window),
               "seconds": round(time.perf_counter() - t0, 4),
               "output": out_path}


def run_pipeline(cfg: PipelineConfig) -> Iterator[dict]:
    """Enhance every frame, then smooth the enhanced sequence.

    Intermediates are written at the configured bit depth next to the
    final outputs (subdirectory ``enhanced/``), so the result is
    bit-identical to running enhance followed by smooth.
    """
    out_dir = os.path.dirname(cfg.output_pattern) or "."
    inter_pattern = os.path.join(out_dir, "enhanced",
                                 os.path.basename(cfg.output_pattern))
    enhance_cfg = PipelineConfig(
        input_pattern=cfg.input_pattern, output_pattern=inter_pattern,
        start=cfg.start, count=cfg.count, weights_path=cfg.weights_path,
        n_local=cfg.n_local, n_region=cfg.n_region, n_max=cfg.n_max,
        motion_cutoff=cfg.motion_cutoff, jobs=cfg.jobs,
        bit_depth=cfg.bit_depth)
    yield from run_enhance(enhance_cfg)
    smooth_cfg = PipelineConfig(
        input_pattern=inter_pattern, output_pattern=cfg.output_pattern,
        start=cfg.start, count=cfg.count, weights_path=cfg.weights_path,
        n_local=cfg.n_local, n_region=cfg.n_region, n_max=cfg.n_max,
        motion_cutoff=cfg.motion_cutoff, jobs=cfg.jobs,
        bit_depth=cfg.bit_depth)
    yield from run_smooth(smooth_cfg)

"""Motion-adaptive temporal smoothing.

Flicker left by frame-by-frame enhancement is removed by averaging each
pixel over a temporal window: neighbors are globally pre-aligned
(multi-scale gradient matching), residual motion is estimated coarse to
fine on Haar wavelet LL planes, frames are warped to the current frame,
and the per-pixel window shrinks linearly with motion magnitude (half
window N_max at rest, zero beyond the cutoff).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .imagecore import resize_area

BLOCK_SIZE = 16
SEARCH_RADIUS = 4
LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


@dataclass(frozen=True)
class SmoothingConfig:
    n_max: int = 6
    motion_cutoff: float = 256.0

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be >= 0")
        if self.motion_cutoff <= 0:
            raise ValueError("motion cutoff must be positive")


@dataclass
class MotionField:
    dx: np.ndarray  # (H, W) float32, pixels
    dy: np.ndarray
    valid: np.ndarray  # (H, W) bool

    @property
    def magnitude(self) -> np.ndarray:
        return np.sqrt(self.dx ** 2 + self.dy ** 2)


def luma(frame: np.ndarray) -> np.ndarray:
    return np.tensordot(LUMA, frame, axes=(0, 0))


# ---------------------------------------------------------------------------
# orthonormal Haar transform

def dwt2(plane: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray,
                                     np.ndarray]:
    """Single-level orthonormal Haar analysis; odd sizes are reflect-padded
    by one sample first. Energy is preserved exactly."""
    if plane.size == 0:
        raise ValueError("empty plane")
    h, w = plane.shape
    if h % 2 or w % 2:
        plane = np.pad(plane, ((0, h % 2), (0, w % 2)), mode="reflect")
    a = plane[0::2, 0::2]
    b = plane[0::2, 1::2]
    c = plane[1::2, 0::2]
    d = plane[1::2, 1::2]
    ll = (a + b + c + d) * 0.5
    lh = (a - b + c - d) * 0.5
    hl = (a + b - c - d) * 0.5
    hh = (a - b - c + d) * 0.5
    return ll, lh, hl, hh


def idwt2(ll: np.ndarray, lh: np.ndarray, hl: np.ndarray,
          hh: np.ndarray) -> np.ndarray:
    """Inverse of dwt2 (even-sized reconstruction)."""
    h, w = ll.shape
    out = np.empty((2 * h, 2 * w), dtype=ll.dtype)
    out[0::2, 0::2] = (ll + lh + hl + hh) * 0.5
    out[0::2, 1::2] = (ll - lh + hl - hh) * 0.5
    out[1::2, 0::2] = (ll + lh - hl - hh) * 0.5
    out[1::2, 1::2] = (ll - lh - hl + hh) * 0.5
    return out


def ll_pyramid(plane: np.ndarray, levels: int) -> List[np.ndarray]:
    """[level 0 (input), LL_1, ..., LL_levels]."""
    out = [plane]
    for _ in range(levels):
        ll, _, _, _ = dwt2(out[-1])
        out.append(ll)
    return out


def default_levels(height: int, width: int) -> int:
    return max(1, min(4, int(math.floor(math.log2(max(2, min(height, width))
                                                  / 32)))))


# ---------------------------------------------------------------------------
# warping

def _bilinear_sample(plane: np.ndarray, sy: np.ndarray,
                     sx: np.ndarray) -> np.ndarray:
    h, w = plane.shape[-2:]
    y0 = np.clip(np.floor(sy).astype(np.int64), 0, h - 1)
    x0 = np.clip(np.floor(sx).astype(np.int64), 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    fy = np.clip(sy - y0, 0.0, 1.0).astype(np.float32)
    fx = np.clip(sx - x0, 0.0, 1.0).astype(np.float32)
    tl = plane[..., y0, x0]
    tr = plane[..., y0, x1]
    bl = plane[..., y1, x0]
    br = plane[..., y1, x1]
    top = tl + (tr - tl) * fx
    bot = bl + (br - bl) * fx
    return (top + (bot - top) * fy).astype(np.float32)


def warp(frame: np.ndarray, field: MotionField) -> Tuple[np.ndarray, np.ndarray]:
    """Sample ``frame`` at p + field(p) with bilinear interpolation.

    Returns (warped, validity); samples that fall outside the frame or sit
    on invalid field pixels are masked out (and filled with zeros).
    """
    h, w = frame.shape[-2:]
    if field.dx.shape != (h, w):
        raise ValueError(f"field shape {field.dx.shape} does not match "
                         f"frame {h}x{w}")
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float32),
                         np.arange(w, dtype=np.float32), indexing="ij")
    sy = ys + field.dy
    sx = xs + field.dx
    inside = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)
    valid = inside & field.valid
    out = _bilinear_sample(frame, sy, sx)
    out = np.where(valid[None] if frame.ndim == 3 else valid, out, 0.0)
    return out.astype(np.float32), valid


def constant_field(height: int, width: int, dx: float, dy: float) -> MotionField:
    return MotionField(
        dx=np.full((height, width), dx, dtype=np.float32),
        dy=np.full((height, width), dy, dtype=np.float32),
        valid=np.ones((height, width), dtype=bool))


# ---------------------------------------------------------------------------
# global pre-alignment (multi-scale gradient matching)

def _integer_search(ref: np.ndarray, tgt: np.ndarray,
                    radius: int) -> Tuple[float, float]:
    """Exhaustive integer translation minimizing mean squared difference
    over the overlap; seeds Gauss-Newton on the coarsest pyramid level."""
    h, w = ref.shape
    radius = min(radius, h // 3, w // 3)
    best = None
    best_d = (0.0, 0.0)
    for ddy in range(-radius, radius + 1):
        for ddx in range(-radius, radius + 1):
            ry0, ry1 = max(0, -ddy), min(h, h - ddy)
            rx0, rx1 = max(0, -ddx), min(w, w - ddx)
            a = ref[ry0:ry1, rx0:rx1]
            b = tgt[ry0 + ddy:ry1 + ddy, rx0 + ddx:rx1 + ddx]
            if a.size == 0:
                continue
            cost = float(((a - b) ** 2).mean())
            if best is None or cost < best:
                best = cost
                best_d = (float(ddx), float(ddy))
    return best_d

def prealign(ref: np.ndarray, tgt: np.ndarray,
             levels: Optional[int] = None,
             iterations: int = 12) -> Tuple[float, float, bool]:
    """Estimate one global translation d such that tgt(p + d) ~ ref(p).

    Coarse-to-fine Gauss-Newton on luma over a 2x area pyramid. Returns
    (dx, dy, confident); degenerate (near-constant) inputs give
    (0, 0, False).
    """
    if ref.shape != tgt.shape:
        raise ValueError("prealign inputs must share dimensions")
    ref_l = luma(ref) if ref.ndim == 3 else ref.astype(np.float32)
    tgt_l = luma(tgt) if tgt.ndim == 3 else tgt.astype(np.float32)
    h, w = ref_l.shape
    if levels is None:
        levels = max(1, int(math.floor(math.log2(max(2, min(h, w)) / 16))))

    pyr = [(ref_l, tgt_l)]
    for _ in range(levels - 1):
        r, t = pyr[-1]
        ph, pw = r.shape
        if min(ph, pw) < 16:
            break
        pyr.append((resize_area(r[None], ph // 2, pw // 2)[0],
                    resize_area(t[None], ph // 2, pw // 2)[0]))

    dx, dy = _integer_search(pyr[-1][0], pyr[-1][1], radius=8)
    confident = False
    for li, (r, t) in enumerate(reversed(pyr)):
        if li > 0:
            dx *= 2.0
            dy *= 2.0
        ph, pw = r.shape
        ys, xs = np.meshgrid(np.arange(ph, dtype=np.float32),
                             np.arange(pw, dtype=np.float32), indexing="ij")
        for _ in range(iterations):
            sy = ys + dy
            sx = xs + dx
            inside = (sx >= 1) & (sx <= pw - 2) & (sy >= 1) & (sy <= ph - 2)
            if inside.sum() < 64:
                break
            warped = _bilinear_sample(t, sy, sx)
            gy, gx = np.gradient(warped.astype(np.float64))
            m = inside
            resid = (warped - r).astype(np.float64)
            a11 = (gx[m] ** 2).sum()
            a22 = (gy[m] ** 2).sum()
            a12 = (gx[m] * gy[m]).sum()
            det = a11 * a22 - a12 ** 2
            if det < 1e-12 or a11 < 1e-9 or a22 < 1e-9:
                break
            b1 = -(gx[m] * resid[m]).sum()
            b2 = -(gy[m] * resid[m]).sum()
            ddx = (a22 * b1 - a12 * b2) / det
            ddy = (a11 * b2 - a12 * b1) / det
            dx += float(ddx)
            dy += float(ddy)
            confident = True
            if abs(ddx) < 1e-4 and abs(ddy) < 1e-4:
                break
    bound = float(max(h, w))
    if not confident or abs(dx) > bound or abs(dy) > bound:
        return 0.0, 0.0, False
    return dx, dy, True


# ---------------------------------------------------------------------------
# coarse-to-fine block matching on wavelet LL planes

def _block_grid(h: int, w: int, block: int) -> Tuple[np.ndarray, np.ndarray]:
    ny = max(1, h // block)
    nx = max(1, w // block)
    cy = (np.arange(ny) * block + block // 2).clip(0, h - 1)
    cx = (np.arange(nx) * block + block // 2).clip(0, w - 1)
    return cy.astype(np.float64), cx.astype(np.float64)


def _interp_grid(values: np.ndarray, cy: np.ndarray, cx: np.ndarray,
                 ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of a block-centre grid at arbitrary
    coordinates, extending edge values outward."""
    iy = np.clip(np.searchsorted(cy, ys) - 1, 0, max(0, len(cy) - 2))
    ix = np.clip(np.searchsorted(cx, xs) - 1, 0, max(0, len(cx) - 2))
    if len(cy) == 1:
        fy = np.zeros_like(ys, dtype=np.float64)
        iy1 = iy
    else:
        fy = np.clip((ys - cy[iy]) / (cy[iy + 1] - cy[iy]), 0.0, 1.0)
        iy1 = iy + 1
    if len(cx) == 1:
        fx = np.zeros_like(xs, dtype=np.float64)
        ix1 = ix
    else:
        fx = np.clip((xs - cx[ix]) / (cx[ix + 1] - cx[ix]), 0.0, 1.0)
        ix1 = ix + 1
    tl = values[iy[:, None], ix[None, :]]
    tr = values[iy[:, None], ix1[None, :]]
    bl = values[iy1[:, None], ix[None, :]]
    br = values[iy1[:, None], ix1[None, :]]
    fyc = fy[:, None]
    fxc = fx[None, :]
    return (tl * (1 - fyc) * (1 - fxc) + tr * (1 - fyc) * fxc
            + bl * fyc * (1 - fxc) + br * fyc * fxc)


def _match_level(ref: np.ndarray, tgt: np.ndarray,
                 pred_dx: np.ndarray, pred_dy: np.ndarray,
                 block: int, radius: int):
    """Integer block matching around a per-block prediction.

    Blocks whose full search window cannot be evaluated inside the target
    plane are flagged invalid (their field keeps the prediction).
    """
    h, w = ref.shape
    cy, cx = _block_grid(h, w, block)
    ny, nx = len(cy), len(cx)
    out_dx = np.zeros((ny, nx))
    out_dy = np.zeros((ny, nx))
    valid = np.zeros((ny, nx), dtype=bool)
    half = block // 2
    for i in range(ny):
        for j in range(nx):
            y0 = int(cy[i]) - half
            x0 = int(cx[j]) - half
            y0 = min(max(y0, 0), h - block)
            x0 = min(max(x0, 0), w - block)
            blk = ref[y0:y0 + block, x0:x0 + block]
            pdx = int(round(pred_dx[i, j]))
            pdy = int(round(pred_dy[i, j]))
            best = None
            best_dd = (0, 0)
            best_full = False
            min_overlap = (block * block) // 2
            for ddy in range(-radius, radius + 1):
                for ddx in range(-radius, radius + 1):
                    ty = y0 + pdy + ddy
                    tx = x0 + pdx + ddx
                    # normalized cost over the candidate's overlap with the
                    # plane; mostly-outside candidates are not comparable
                    oy0, oy1 = max(ty, 0), min(ty + block, h)
                    ox0, ox1 = max(tx, 0), min(tx + block, w)
                    overlap = max(0, oy1 - oy0) * max(0, ox1 - ox0)
                    if overlap < min_overlap:
                        continue
                    cand = tgt[oy0:oy1, ox0:ox1]
                    sub = blk[oy0 - ty:oy1 - ty, ox0 - tx:ox1 - tx]
                    cost = float(np.abs(sub - cand).mean())
                    if best is None or cost < best:
                        best = cost
                        best_dd = (ddx, ddy)
                        best_full = overlap == block * block
            if best is None:
                out_dx[i, j] = pred_dx[i, j]
                out_dy[i, j] = pred_dy[i, j]
            else:
                bdx, bdy = best_dd
                out_dx[i, j] = pdx + bdx
                out_dy[i, j] = pdy + bdy
                # valid when the matched window lies inside the plane and
                # the optimum was not pinned to the search boundary
                valid[i, j] = best_full and abs(bdx) < radius \
                    and abs(bdy) < radius
    return out_dx, out_dy, valid, cy, cx


def estimate_motion(ref: np.ndarray, tgt: np.ndarray,
                    levels: Optional[int] = None) -> MotionField:
    """Dense displacement field d with tgt(p + d(p)) ~ ref(p).

    Block matching on Haar LL planes from the coarsest level down, doubling
    and refining the block field per level, then bilinear interpolation of
    block centres to pixels. Pixels depending on boundary-truncated blocks
    are marked invalid.
    """
    if ref.shape != tgt.shape:
        raise ValueError("estimate_motion inputs must share dimensions")
    ref_l = luma(ref) if ref.ndim == 3 else ref.astype(np.float32)
    tgt_l = luma(tgt) if tgt.ndim == 3 else tgt.astype(np.float32)
    h, w = ref_l.shape
    if levels is None:
        levels = default_levels(h, w)
    while levels > 0 and min(h, w) // 2 ** levels < BLOCK_SIZE:
        levels -= 1
    ref_pyr = ll_pyramid(ref_l, levels)
    tgt_pyr = ll_pyramid(tgt_l, levels)

    dx = dy = None
    valid_grid = None
    cy = cx = None
    for lev in range(levels, -1, -1):
        r, t = ref_pyr[lev], tgt_pyr[lev]
        lh, lw = r.shape
        gcy, gcx = _block_grid(lh, lw, BLOCK_SIZE)
        if dx is None:
            pred_dx = np.zeros((len(gcy), len(gcx)))
            pred_dy = np.zeros_like(pred_dx)
        else:
            pred_dx = 2.0 * _interp_grid(dx, cy * 2, cx * 2, gcy, gcx)
            pred_dy = 2.0 * _interp_grid(dy, cy * 2, cx * 2, gcy, gcx)
        dx, dy, valid_grid, cy, cx = _match_level(
            r, t, pred_dx, pred_dy, BLOCK_SIZE, SEARCH_RADIUS)

    ys = np.arange(h, dtype=np.float64)
    xs = np.arange(w, dtype=np.float64)
    dense_dx = _interp_grid(dx, cy, cx, ys, xs).astype(np.float32)
    dense_dy = _interp_grid(dy, cy, cx, ys, xs).astype(np.float32)
    dense_valid = _interp_grid(valid_grid.astype(np.float64),
                               cy, cx, ys, xs) > 0.999
    return MotionField(dx=dense_dx, dy=dense_dy, valid=dense_valid)


# ---------------------------------------------------------------------------
# adaptive temporal window

def adaptive_halfwindow(motion_mag: float, cfg: SmoothingConfig) -> int:
    """floor(N_max * max(0, 1 - m/M)): N_max at rest, zero at the cutoff."""
    if motion_mag < 0:
        raise ValueError("motion magnitude must be >= 0")
    return int(math.floor(cfg.n_max * max(0.0, 1.0 - motion_mag
                                          / cfg.motion_cutoff)))


def combine_window(center: np.ndarray,
                   neighbors: Sequence[Tuple[int, np.ndarray, np.ndarray,
                                             np.ndarray]],
                   cfg: SmoothingConfig) -> np.ndarray:
    """Per-pixel adaptive average of the center frame with warped neighbors.

    ``neighbors`` holds (offset, warped frame, validity mask, motion
    magnitude map) tuples. The per-pixel half window comes from the max
    magnitude over valid candidates; pixels whose window admits no
    neighbor reproduce the center frame bit-exactly.
    """
    h, w = center.shape[-2:]
    mag = np.zeros((h, w), dtype=np.float32)
    for _, _, valid, m in neighbors:
        mag = np.maximum(mag, np.where(valid, m, 0.0))
    k = np.floor(cfg.n_max * np.clip(1.0 - mag / cfg.motion_cutoff,
                                     0.0, 1.0)).astype(np.int32)

    acc = center.astype(np.float64).copy()
    count = np.ones((h, w), dtype=np.int32)
    for offset, warped, valid, _ in neighbors:
        use = valid & (abs(offset) <= k)
        acc += np.where(use[None] if center.ndim == 3 else use, warped, 0.0)
        count += use.astype(np.int32)
    averaged = (acc / count).astype(np.float32)
    untouched = count == 1
    mask = untouched[None] if center.ndim == 3 else untouched
    return np.where(mask, center, averaged)


def smooth_window(frames: Sequence[np.ndarray], center_index: int,
                  cfg: SmoothingConfig) -> np.ndarray:
    """Smooth one frame against its temporal window.

    Every neighbor is globally pre-aligned, refined with wavelet block
    matching, warped to the center in one resampling step, and fed to the
    adaptive per-pixel average.
    """
    center = frames[center_index]
    h, w = center.shape[-2:]
    for i, f in enumerate(frames):
        if f.shape != center.shape:
            raise ValueError(f"window frame {i} has shape {f.shape}, "
                             f"center has {center.shape}")
    neighbors = []
    for i, f in enumerate(frames):
        offset = i - center_index
        if offset == 0 or abs(offset) > cfg.n_max:
            continue
        gdx, gdy, _ = prealign(center, f)
        shifted, _ = warp(f, constant_field(h, w, gdx, gdy))
        residual = estimate_motion(center, shifted)
        field = MotionField(dx=residual.dx + np.float32(gdx),
                            dy=residual.dy + np.float32(gdy),
                            valid=residual.valid)
        warped, valid = warp(f, field)
        neighbors.append((offset, warped, valid, field.magnitude))
    return combine_window(center, neighbors, cfg)

"""Raster primitives shared by every stage: images, quad boxes, binary masks, logit maps.

Conventions used throughout the package:

* images are uint8 arrays, shape (H, W) for grayscale or (H, W, 3) for RGB;
* binary masks are uint8 arrays of 0/1 with the same (H, W) as their image;
* logit maps are float64 arrays clamped to [LOGIT_EPS, 1 - LOGIT_EPS];
* pixel (x, y) has its center at the integer point (x, y), so a quad touching
  an integer point covers that pixel (boundary counts as inside).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOGIT_EPS = 1e-6

# BT.601 luma weights; they sum to exactly 1.0
_LUMA_R, _LUMA_G, _LUMA_B = 0.299, 0.587, 0.114


class RasterError(ValueError):
    """Malformed raster input: bad shape, channel count, or dimension mismatch."""


def validate_image(img: np.ndarray) -> np.ndarray:
    """Check image conventions (uint8, (H, W) or (H, W, 3), nonempty) and return the array."""
    arr = np.asarray(img)
    if arr.dtype != np.uint8:
        raise RasterError(f"image must be uint8, got {arr.dtype}")
    if arr.ndim == 2:
        h, w = arr.shape
    elif arr.ndim == 3 and arr.shape[2] == 3:
        h, w = arr.shape[:2]
    else:
        raise RasterError(f"image must have shape (H, W) or (H, W, 3), got {arr.shape}")
    if h < 1 or w < 1:
        raise RasterError(f"image dimensions must be >= 1, got {arr.shape}")
    return arr


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Convert to a single-channel image.

    Grayscale input is returned unchanged. RGB is reduced with luma weights
    0.299/0.587/0.114 and rounded half-up, matching the clustering stages
    which operate on grayscale values.
    """
    arr = validate_image(img)
    if arr.ndim == 2:
        return arr
    f = arr.astype(np.float64)
    luma = _LUMA_R * f[..., 0] + _LUMA_G * f[..., 1] + _LUMA_B * f[..., 2]
    return np.floor(luma + 0.5).astype(np.uint8)


def clamp_logits(values: np.ndarray) -> np.ndarray:
    """Clamp probabilities into [eps, 1-eps] so -y*log(y) is finite everywhere."""
    return np.clip(np.asarray(values, dtype=np.float64), LOGIT_EPS, 1.0 - LOGIT_EPS)


def validate_mask(mask: np.ndarray, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Check a 0/1 uint8 mask, optionally against an expected (H, W)."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise RasterError(f"mask must be 2-D, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise RasterError(f"mask shape {arr.shape} does not match expected {tuple(shape)}")
    if arr.dtype != np.uint8:
        raise RasterError(f"mask must be uint8, got {arr.dtype}")
    return arr


@dataclass(frozen=True)
class QuadBox:
    """Four-point box with sub-pixel corners, labeled left-top/left-bottom/right-top/right-bottom.

    The perimeter is traversed lt -> rt -> rb -> lb, which is simple
    (non-self-intersecting) for correctly labeled corners.
    """

    lt: tuple[float, float]
    lb: tuple[float, float]
    rt: tuple[float, float]
    rb: tuple[float, float]

    def perimeter(self) -> list[tuple[float, float]]:
        return [self.lt, self.rt, self.rb, self.lb]

    def as_list(self) -> list[list[float]]:
        """Corners in storage order lt, lb, rt, rb."""
        return [list(self.lt), list(self.lb), list(self.rt), list(self.rb)]

    def area(self) -> float:
        """Shoelace area of the lt -> rt -> rb -> lb perimeter."""
        pts = self.perimeter()
        s = 0.0
        for i in range(4):
            x1, y1 = pts[i]
            x2, y2 = pts[(i + 1) % 4]
            s += x1 * y2 - x2 * y1
        return abs(s) / 2.0

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for p in self.as_list() for v in p)

    def is_simple(self) -> bool:
        """True when no two non-adjacent perimeter edges properly cross."""
        pts = self.perimeter()
        edges = [(pts[i], pts[(i + 1) % 4]) for i in range(4)]
        return not (_edges_cross(edges[0], edges[2]) or _edges_cross(edges[1], edges[3]))

    @staticmethod
    def from_list(points) -> "QuadBox":
        """Build from [[x, y] * 4] in storage order lt, lb, rt, rb."""
        if len(points) != 4 or any(len(p) != 2 for p in points):
            raise RasterError("quad must be 4 points of 2 coordinates")
        lt, lb, rt, rb = (tuple(float(v) for v in p) for p in points)
        return QuadBox(lt=lt, lb=lb, rt=rt, rb=rb)


def _edges_cross(e1, e2) -> bool:
    # proper intersection of two open segments
    (ax, ay), (bx, by) = e1
    (cx, cy), (dx, dy) = e2

    def orient(px, py, qx, qy, rx, ry):
        return (qx - px) * (ry - py) - (qy - py) * (rx - px)

    d1 = orient(ax, ay, bx, by, cx, cy)
    d2 = orient(ax, ay, bx, by, dx, dy)
    d3 = orient(cx, cy, dx, dy, ax, ay)
    d4 = orient(cx, cy, dx, dy, bx, by)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def rasterize_quad(box: QuadBox, width: int, height: int) -> np.ndarray:
    """Fill a quad onto a (height, width) 0/1 mask.

    Even-odd fill evaluated at pixel centers, with points on the perimeter
    counted as inside. Output is clipped to the image bounds; a zero-area quad
    yields an empty mask rather than an error.
    """
    if width < 1 or height < 1:
        raise RasterError(f"target dimensions must be >= 1, got {width}x{height}")
    mask = np.zeros((height, width), dtype=np.uint8)
    if box.area() <= 0.0:
        return mask

    pts = box.perimeter()
    xs_all = [p[0] for p in pts]
    ys_all = [p[1] for p in pts]
    x0 = max(0, math.ceil(min(xs_all)))
    x1 = min(width - 1, math.floor(max(xs_all)))
    y0 = max(0, math.ceil(min(ys_all)))
    y1 = min(height - 1, math.floor(max(ys_all)))
    if x0 > x1 or y0 > y1:
        return mask

    gx, gy = np.meshgrid(np.arange(x0, x1 + 1, dtype=np.float64),
                         np.arange(y0, y1 + 1, dtype=np.float64))
    inside = np.zeros(gx.shape, dtype=bool)
    on_edge = np.zeros(gx.shape, dtype=bool)
    for i in range(4):
        ex1, ey1 = pts[i]
        ex2, ey2 = pts[(i + 1) % 4]
        crosses = (ey1 > gy) != (ey2 > gy)
        if np.any(crosses):
            xint = ex1 + (gy - ey1) * (ex2 - ex1) / (ey2 - ey1)
            inside ^= crosses & (gx < xint)
        dx, dy = ex2 - ex1, ey2 - ey1
        apx, apy = gx - ex1, gy - ey1
        seg_len2 = dx * dx + dy * dy
        if seg_len2 > 0.0:
            tol = 1e-7 * (1.0 + abs(dx) + abs(dy))
            cross = dx * apy - dy * apx
            dot = apx * dx + apy * dy
            on_edge |= (np.abs(cross) <= tol) & (dot >= -tol) & (dot <= seg_len2 + tol)

    mask[y0:y1 + 1, x0:x1 + 1] = (inside | on_edge).astype(np.uint8)
    return mask

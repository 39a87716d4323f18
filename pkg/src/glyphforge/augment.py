"""Weak and strong augmentation with shared geometry.

Geometric changes (horizontal flip, scale jitter about the image center) are
drawn once as a transform object and applied identically to the image, its
masks, and raw box coordinates, so spatial alignment survives augmentation
by construction. Photometric changes (brightness, contrast, blur, grayscale
collapse) apply to images only and never touch masks.

Flips are exact: with pixel centers at integer coordinates, x' = W-1-x is a
permutation of columns, so flipping a rasterized mask equals rasterizing the
flipped box. Scale jitter resamples by nearest neighbor through one shared
index map; box coordinates transform through the exact inverse of that map's
defining affine, which keeps boxes and rasters aligned to within the
nearest-neighbor rounding of the resampler.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .raster import QuadBox, to_grayscale


@dataclass(frozen=True)
class AugmentationSpec:
    flip_prob: float = 0.5
    scale_range: tuple = (0.9, 1.1)
    brightness_range: tuple = (0.75, 1.25)
    contrast_range: tuple = (0.75, 1.25)
    blur_sigma_range: tuple = (0.0, 1.5)
    grayscale_prob: float = 0.2

    def __post_init__(self):
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError("flip_prob must lie in [0, 1]")
        if not 0.0 <= self.grayscale_prob <= 1.0:
            raise ValueError("grayscale_prob must lie in [0, 1]")
        for lo, hi in (self.scale_range, self.brightness_range,
                       self.contrast_range, self.blur_sigma_range):
            if lo > hi:
                raise ValueError("range bounds must be ordered")
        if self.scale_range[0] <= 0:
            raise ValueError("scale must be positive")


@dataclass(frozen=True)
class GeomTransform:
    """One sampled geometric augmentation, reusable across rasters."""
    flip: bool
    scale: float
    height: int
    width: int

    def index_maps(self):
        """Nearest-neighbor source indices for each output row/column."""
        cy = (self.height - 1) / 2.0
        cx = (self.width - 1) / 2.0
        ys = np.arange(self.height, dtype=np.float64)
        xs = np.arange(self.width, dtype=np.float64)
        if self.flip:
            xs = (self.width - 1) - xs
        src_y = cy + (ys - cy) / self.scale
        src_x = cx + (xs - cx) / self.scale
        yi = np.clip(np.floor(src_y + 0.5), 0, self.height - 1).astype(np.intp)
        xi = np.clip(np.floor(src_x + 0.5), 0, self.width - 1).astype(np.intp)
        return yi, xi

    def apply_to_raster(self, raster: np.ndarray) -> np.ndarray:
        arr = np.asarray(raster)
        if arr.shape[:2] != (self.height, self.width):
            raise ValueError("raster dimensions do not match the transform")
        yi, xi = self.index_maps()
        return arr[yi[:, None], xi[None, :]].copy()

    def apply_to_point(self, x: float, y: float):
        cy = (self.height - 1) / 2.0
        cx = (self.width - 1) / 2.0
        nx = cx + self.scale * (x - cx)
        ny = cy + self.scale * (y - cy)
        if self.flip:
            nx = (self.width - 1) - nx
        return nx, ny

    def apply_to_box(self, box: QuadBox) -> QuadBox:
        pts = [self.apply_to_point(x, y) for x, y in box.as_list()]
        return QuadBox.from_list(pts)


def draw_geom_transform(height, width, rng, spec: AugmentationSpec) -> GeomTransform:
    """Sample flip then scale; fixed draw order so streams replay."""
    flip = bool(rng.random() < spec.flip_prob)
    lo, hi = spec.scale_range
    scale = float(rng.uniform(lo, hi))
    return GeomTransform(flip=flip, scale=scale, height=height, width=width)


def identity_transform(height, width) -> GeomTransform:
    return GeomTransform(flip=False, scale=1.0, height=height, width=width)


def photometric_augment(img: np.ndarray, rng, spec: AugmentationSpec) -> np.ndarray:
    """Brightness, contrast, Gaussian blur, chance of grayscale collapse.

    Draw order per call: brightness u, contrast u, blur sigma, grayscale u.
    Accumulates in float and rounds half-up once at the end.
    """
    b = float(rng.uniform(*spec.brightness_range))
    c = float(rng.uniform(*spec.contrast_range))
    sigma = float(rng.uniform(*spec.blur_sigma_range))
    to_gray = bool(rng.random() < spec.grayscale_prob)

    v = np.asarray(img, dtype=np.float64)
    v = v * b
    mean = float(v.mean())
    v = mean + (v - mean) * c
    if sigma > 1e-3:
        if v.ndim == 3:
            for ch in range(v.shape[2]):
                v[:, :, ch] = ndimage.gaussian_filter(v[:, :, ch], sigma,
                                                      mode="reflect")
        else:
            v = ndimage.gaussian_filter(v, sigma, mode="reflect")
    v = np.clip(np.floor(v + 0.5), 0, 255).astype(np.uint8)
    if to_gray and v.ndim == 3:
        gray = to_grayscale(v)
        v = np.repeat(gray[:, :, None], 3, axis=2)
    return v


def weak_augment(img, masks, rng, spec: AugmentationSpec):
    """Geometric-only view: returns (image', masks', transform)."""
    h, w = np.asarray(img).shape[:2]
    t = draw_geom_transform(h, w, rng, spec)
    out_img = t.apply_to_raster(img)
    out_masks = [t.apply_to_raster(m) for m in masks]
    return out_img, out_masks, t


def strong_augment(img, masks, rng, spec: AugmentationSpec):
    """Geometric + photometric view; masks see only the geometry."""
    out_img, out_masks, t = weak_augment(img, masks, rng, spec)
    out_img = photometric_augment(out_img, rng, spec)
    return out_img, out_masks, t

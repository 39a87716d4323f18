"""Character-structure mask extraction by per-box two-cluster K-means.

Each annotated box is clustered on grayscale intensity into two groups; the
group that is rarer on the box's boundary ring is taken to be the glyph
(strokes rarely touch their own bounding box, background always does). Glyph
pixels from all boxes are OR-ed into one full-image mask.

A box whose intensity range is below ``min_intensity_range`` carries no
recoverable structure; it contributes nothing rather than a solid block,
since pasting whole rectangles is exactly the boundary artifact this mask is
meant to avoid.

The whole-image clustering variant exists only as an evaluation baseline. It
applies the same boundary-vote rule to the 1-pixel image frame; the mapping
from whole-image clusters to glyph/background is an interpretation, since a
frame vote is the only rule that needs no extra supervision.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .raster import QuadBox, rasterize_quad, to_grayscale


@dataclass(frozen=True)
class GlyphParams:
    kmeans_max_iters: int = 20
    kmeans_tol: float = 0.5
    min_intensity_range: float = 8.0
    border_vote_margin: float = 0.0

    def __post_init__(self):
        if self.kmeans_max_iters < 1:
            raise ValueError("kmeans_max_iters must be >= 1")
        if self.kmeans_tol < 0 or self.min_intensity_range < 0 or self.border_vote_margin < 0:
            raise ValueError("tolerances must be >= 0")


@dataclass
class GlyphMaskReport:
    mask: np.ndarray
    boxes_processed: int
    boxes_skipped_degenerate: int
    glyph_pixel_fraction: float


def kmeans2(values, rng, params: GlyphParams):
    """Two-cluster Lloyd iteration on scalar intensities.

    Centroids start at the observed min and max, which is deterministic and
    near-optimal for the bimodal distributions boxes produce; ``rng`` is
    accepted for interface stability but never drawn from. Ties in the
    assignment go to centroid 0. The caller guarantees a non-degenerate
    intensity range.

    Returns (labels, (c0, c1)) with labels in {0, 1} indexing the nearer
    centroid and c0 <= c1.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("kmeans2 requires at least one value")
    c0, c1 = float(v.min()), float(v.max())
    labels = np.zeros(v.shape, dtype=np.uint8)
    for _ in range(params.kmeans_max_iters):
        # nearer centroid; equidistant points take label 0
        labels = (np.abs(v - c1) < np.abs(v - c0)).astype(np.uint8)
        n0, n1 = float(np.sum(labels == 0)), float(np.sum(labels == 1))
        new_c0 = float(v[labels == 0].mean()) if n0 else c0
        new_c1 = float(v[labels == 1].mean()) if n1 else c1
        shift = max(abs(new_c0 - c0), abs(new_c1 - c1))
        c0, c1 = new_c0, new_c1
        if shift < params.kmeans_tol:
            break
    labels = (np.abs(v - c1) < np.abs(v - c0)).astype(np.uint8)
    return labels, (c0, c1)


def _boundary_ring(mask: np.ndarray) -> np.ndarray:
    """1-pixel-wide ring of a mask: pixels with any 8-neighbor outside it."""
    eroded = ndimage.binary_erosion(mask.astype(bool), structure=np.ones((3, 3), bool),
                                    border_value=0)
    return mask.astype(bool) & ~eroded


def _pick_glyph_cluster(labels: np.ndarray, ring_flags: np.ndarray,
                        first_pixel_label: int, margin: float) -> int:
    """Boundary-vote cluster disambiguation.

    The cluster with the smaller boundary-ring share is the glyph. When the
    ring vote is within the margin, fall back to the smaller cluster overall,
    then to the cluster not containing the first in-box pixel in row-major
    order. Every rule is a function of the pixel partition alone, so invert-
    ing intensities (which swaps the two clusters) selects the same pixels.
    """
    ring_labels = labels[ring_flags]
    c0 = int(np.sum(ring_labels == 0))
    c1 = int(ring_labels.size - c0)
    if abs(c0 - c1) > margin * max(ring_labels.size, 1):
        return 0 if c0 < c1 else 1
    n0 = int(np.sum(labels == 0))
    n1 = int(labels.size - n0)
    if n0 != n1:
        return 0 if n0 < n1 else 1
    return 1 - first_pixel_label


def glyph_mask_for_box(img: np.ndarray, box: QuadBox, rng, params: GlyphParams):
    """Glyph pixels of one box, in full-image coordinates.

    Returns (fragment, skipped). A box with no rasterized area or with an
    intensity range below params.min_intensity_range yields an empty fragment
    and skipped=True.
    """
    gray = to_grayscale(img)
    return _fragment_for_box(gray, box, rng, params)


def _fragment_for_box(gray: np.ndarray, box: QuadBox, rng, params: GlyphParams):
    h, w = gray.shape
    fragment = np.zeros((h, w), dtype=np.uint8)
    box_mask = rasterize_quad(box, w, h)
    ys, xs = np.nonzero(box_mask)
    if ys.size == 0:
        return fragment, True
    values = gray[ys, xs].astype(np.float64)
    if values.max() - values.min() < params.min_intensity_range:
        return fragment, True

    labels, _ = kmeans2(values, rng, params)
    ring = _boundary_ring(box_mask)
    ring_flags = ring[ys, xs]
    glyph_cluster = _pick_glyph_cluster(labels, ring_flags, int(labels[0]),
                                        params.border_vote_margin)
    sel = labels == glyph_cluster
    fragment[ys[sel], xs[sel]] = 1
    return fragment, False


def build_glyph_mask(img: np.ndarray, boxes, rng, params: GlyphParams | None = None,
                     workers: int = 1, clock=None) -> GlyphMaskReport:
    """Union of per-box glyph fragments over all boxes.

    Fragments are independent, so they may be extracted on a thread pool; the
    OR-merge is commutative and the result does not depend on worker count.
    ``clock`` optionally receives per-stage timings (grayscale, kmeans).
    """
    params = params or GlyphParams()
    if clock is not None:
        t0 = clock.start()
    gray = to_grayscale(img)
    if clock is not None:
        clock.add("grayscale", t0)
        t0 = clock.start()
    h, w = gray.shape
    mask = np.zeros((h, w), dtype=np.uint8)
    boxes = list(boxes)

    if workers > 1 and len(boxes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                lambda b: _fragment_for_box(gray, b, rng, params), boxes))
    else:
        results = [_fragment_for_box(gray, b, rng, params) for b in boxes]

    skipped = 0
    for fragment, was_skipped in results:
        if was_skipped:
            skipped += 1
        else:
            np.bitwise_or(mask, fragment, out=mask)
    if clock is not None:
        clock.add("kmeans", t0)
    return GlyphMaskReport(
        mask=mask,
        boxes_processed=len(boxes) - skipped,
        boxes_skipped_degenerate=skipped,
        glyph_pixel_fraction=float(mask.mean()) if mask.size else 0.0,
    )


def whole_image_glyph_mask(img: np.ndarray, rng, params: GlyphParams | None = None):
    """Baseline: cluster every pixel of the image at once.

    The boundary vote runs on the 1-pixel image frame. Returns
    (mask, skipped); a near-uniform image is skipped like a degenerate box.
    """
    params = params or GlyphParams()
    gray = to_grayscale(img)
    h, w = gray.shape
    mask = np.zeros((h, w), dtype=np.uint8)
    values = gray.astype(np.float64).ravel()
    if values.max() - values.min() < params.min_intensity_range:
        return mask, True
    labels, _ = kmeans2(values, rng, params)
    frame = np.zeros((h, w), dtype=bool)
    frame[0, :] = frame[-1, :] = True
    frame[:, 0] = frame[:, -1] = True
    glyph_cluster = _pick_glyph_cluster(labels, frame.ravel(), int(labels[0]),
                                        params.border_vote_margin)
    mask = (labels.reshape(h, w) == glyph_cluster).astype(np.uint8)
    return mask, False


def eval_glyph_mask(mask: np.ndarray, ground_truth: np.ndarray, region: np.ndarray) -> float:
    """Pixel accuracy of mask vs ground truth restricted to a region mask."""
    mask = np.asarray(mask)
    ground_truth = np.asarray(ground_truth)
    region = np.asarray(region)
    if not (mask.shape == ground_truth.shape == region.shape):
        raise ValueError("mask, ground truth, and region must share dimensions")
    flags = region.astype(bool)
    total = int(flags.sum())
    if total == 0:
        raise ValueError("evaluation region is empty")
    matches = int(np.sum(mask[flags] == ground_truth[flags]))
    return matches / total

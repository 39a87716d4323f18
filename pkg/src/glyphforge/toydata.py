"""Procedural toy corpora.

Two synthetic-looking and real-looking scene generators sized for CPU-scale
experiments:

* synthetic scenes: exactly flat backgrounds carrying flat "cards", each
  card holding stroke glyphs of strong contrast in both polarities, with
  character and word boxes and exact stroke-level ground truth. No noise,
  no blur: the clean, rendered texture is the point.
* real-looking scenes: smooth low-frequency fields, soft elliptical
  clutter, moderate-contrast slightly blurred strokes, and Gaussian sensor
  noise everywhere. Ground truth is produced but meant to be withheld from
  training and used only for evaluation.

The texture gap (flat vs noisy) is what both the domain classifier and the
end-to-end training comparison exercise.
"""

from __future__ import annotations

from dataclasses import dataclass
import os

import numpy as np
from scipy import ndimage

from .annotations import AnnotationSet, write_annotations
from .imgio import write_image, write_mask
from .raster import QuadBox


@dataclass(frozen=True)
class SynthScene:
    image: np.ndarray
    char_boxes: tuple
    word_boxes: tuple
    glyph_truth: np.ndarray


@dataclass(frozen=True)
class RealScene:
    image: np.ndarray
    text_truth: np.ndarray


def _paint_segment(mask, ax, ay, bx, by, thickness):
    """Mark pixels within thickness/2 of the segment (a, b)."""
    h, w = mask.shape
    half = thickness / 2.0
    x0 = max(int(np.floor(min(ax, bx) - half)) - 1, 0)
    x1 = min(int(np.ceil(max(ax, bx) + half)) + 1, w - 1)
    y0 = max(int(np.floor(min(ay, by) - half)) - 1, 0)
    y1 = min(int(np.ceil(max(ay, by) + half)) + 1, h - 1)
    if x1 < x0 or y1 < y0:
        return
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    dx, dy = bx - ax, by - ay
    seg_len2 = dx * dx + dy * dy
    if seg_len2 < 1e-12:
        t = np.zeros_like(xs, dtype=np.float64)
    else:
        t = np.clip(((xs - ax) * dx + (ys - ay) * dy) / seg_len2, 0.0, 1.0)
    px = ax + t * dx
    py = ay + t * dy
    d2 = (xs - px) ** 2 + (ys - py) ** 2
    mask[y0:y1 + 1, x0:x1 + 1] |= d2 <= half * half


def _draw_glyph(mask, cx, cy, cw, ch, rng, margin=3.0, thickness=2.2):
    """Random stroke pattern inside a cell, kept `margin` off the border."""
    x_lo, x_hi = cx + margin, cx + cw - margin
    y_lo, y_hi = cy + margin, cy + ch - margin
    n_pts = int(rng.integers(3, 6))
    for _ in range(3):
        trial = np.zeros_like(mask)
        px = rng.uniform(x_lo, x_hi, size=n_pts)
        py = rng.uniform(y_lo, y_hi, size=n_pts)
        for i in range(n_pts - 1):
            _paint_segment(trial, px[i], py[i], px[i + 1], py[i + 1], thickness)
        if trial.sum() >= 8:
            mask |= trial
            return
    mask |= trial


def _jittered_rect_box(x0, y0, x1, y1, rng, jitter=0.3):
    j = lambda: float(rng.uniform(-jitter, jitter))
    return QuadBox(lt=(x0 + j(), y0 + j()), lb=(x0 + j(), y1 + j()),
                   rt=(x1 + j(), y0 + j()), rb=(x1 + j(), y1 + j()))


def make_synth_scene(rng, height=96, width=96) -> SynthScene:
    """Flat scene with carded stroke glyphs and exact ground truth.

    The first two words get opposite stroke polarities so a single global
    two-way intensity split can never explain a whole scene.
    """
    value = np.full((height, width), float(rng.integers(100, 171)))
    occupied = np.zeros((height, width), dtype=bool)
    truth = np.zeros((height, width), dtype=bool)
    char_boxes = []
    word_boxes = []

    # rendered-text corpora vary widely in density: some sheets scatter a
    # few words, others stack full text lines. Line layouts pack far denser
    # than random placement, which jams near a third of the frame.
    line_layout = rng.random() < 0.35
    if line_layout:
        slots = []
        y_cur = int(rng.integers(2, 10))
        while True:
            cell_h = int(rng.integers(14, 23))
            pad = int(rng.integers(2, 5))
            total_h = cell_h + 2 * pad
            if y_cur + total_h + 2 >= height:
                break
            slots.append((y_cur, cell_h, pad))
            y_cur += total_h + int(rng.integers(1, 4))
        n_words = len(slots)
    else:
        n_words = int(rng.integers(5, 13))

    for word_idx in range(n_words):
        if line_layout:
            y0, cell_h, pad = slots[word_idx]
            span = rng.uniform(0.6, 1.0) * (width - 8)
            cell_w = int(rng.integers(14, 23))
            n_chars = max(2, int((span - 2 * pad) / cell_w))
            total_w = n_chars * cell_w + 2 * pad
            total_h = cell_h + 2 * pad
            if total_w + 4 >= width:
                n_chars -= 1
                total_w = n_chars * cell_w + 2 * pad
            if n_chars < 2:
                continue
            x0 = int(rng.integers(2, width - total_w - 2))
        else:
            n_chars = int(rng.integers(2, 7))
            if word_idx == 0 and rng.random() < 0.5:
                cell_w = int(rng.integers(22, 33))
                cell_h = int(rng.integers(22, 33))
            else:
                cell_w = int(rng.integers(14, 23))
                cell_h = int(rng.integers(14, 23))
            pad = int(rng.integers(2, 6))
            total_w = n_chars * cell_w + 2 * pad
            total_h = cell_h + 2 * pad
            if total_w + 4 >= width or total_h + 4 >= height:
                continue

            placed = None
            for _ in range(60):
                x0 = int(rng.integers(2, width - total_w - 2))
                y0 = int(rng.integers(2, height - total_h - 2))
                region = occupied[y0:y0 + total_h, x0:x0 + total_w]
                if not region.any():
                    placed = (x0, y0)
                    break
            if placed is None:
                continue
            x0, y0 = placed
        occupied[y0:y0 + total_h, x0:x0 + total_w] = True

        card_sign = 1.0 if rng.random() < 0.5 else -1.0
        card_value = float(np.clip(value[0, 0] + card_sign * rng.uniform(22, 45),
                                   20, 235))
        value[y0:y0 + total_h, x0:x0 + total_w] = card_value

        if word_idx == 0:
            stroke_sign = -1.0
        elif word_idx == 1:
            stroke_sign = 1.0
        else:
            stroke_sign = 1.0 if rng.random() < 0.5 else -1.0
        stroke_value = float(np.clip(card_value + stroke_sign * rng.uniform(38, 72),
                                     5, 250))

        word_mask = np.zeros((height, width), dtype=bool)
        for c in range(n_chars):
            cx = x0 + pad + c * cell_w
            cy = y0 + pad
            _draw_glyph(word_mask, cx, cy, cell_w, cell_h, rng)
            char_boxes.append(_jittered_rect_box(cx, cy, cx + cell_w - 1,
                                                 cy + cell_h - 1, rng))
        # antialiased rendering: feathered alpha, binary ground truth
        alpha = np.clip(ndimage.gaussian_filter(word_mask.astype(np.float64),
                                                0.7) * 1.5, 0.0, 1.0)
        value = value * (1.0 - alpha) + stroke_value * alpha
        truth |= word_mask
        word_boxes.append(_jittered_rect_box(x0, y0,
                                             x0 + total_w - 1,
                                             y0 + total_h - 1, rng))

    offsets = rng.uniform(-8, 8, size=3)
    image = np.clip(value[:, :, None] + offsets[None, None, :], 0, 255)
    image = np.floor(image + 0.5).astype(np.uint8)
    return SynthScene(image=image, char_boxes=tuple(char_boxes),
                      word_boxes=tuple(word_boxes),
                      glyph_truth=truth.astype(np.uint8))


def make_real_scene(rng, height=96, width=96) -> RealScene:
    """Noisy photograph-like scene with moderate-contrast text strokes."""
    coarse = rng.uniform(70, 185, size=(height // 16 + 2, width // 16 + 2))
    field = ndimage.zoom(coarse, 16, order=1)[:height, :width]

    for _ in range(int(rng.integers(2, 5))):
        cx = rng.uniform(0, width)
        cy = rng.uniform(0, height)
        a = rng.uniform(6, 22)
        b = rng.uniform(6, 22)
        theta = rng.uniform(0, np.pi)
        ys, xs = np.mgrid[0:height, 0:width]
        xr = (xs - cx) * np.cos(theta) + (ys - cy) * np.sin(theta)
        yr = -(xs - cx) * np.sin(theta) + (ys - cy) * np.cos(theta)
        blob = ((xr / a) ** 2 + (yr / b) ** 2 <= 1.0).astype(np.float64)
        field += ndimage.gaussian_filter(blob, 1.5) * rng.uniform(-30, 30)

    truth = np.zeros((height, width), dtype=bool)
    n_words = int(rng.integers(1, 4))
    for _ in range(n_words):
        n_chars = int(rng.integers(1, 5))
        cell_w = int(rng.integers(13, 19))
        cell_h = int(rng.integers(13, 19))
        total_w = n_chars * cell_w
        if total_w + 4 >= width or cell_h + 4 >= height:
            continue
        x0 = int(rng.integers(2, width - total_w - 2))
        y0 = int(rng.integers(2, height - cell_h - 2))
        word_mask = np.zeros((height, width), dtype=bool)
        for c in range(n_chars):
            _draw_glyph(word_mask, x0 + c * cell_w, y0, cell_w, cell_h, rng,
                        margin=2.5, thickness=2.0)
        local = float(field[y0:y0 + cell_h, x0:x0 + total_w].mean())
        sign = 1.0 if local < 128 else -1.0
        field[word_mask] = np.clip(local + sign * rng.uniform(50, 80), 5, 250)
        truth |= word_mask

    field = ndimage.gaussian_filter(field, 0.5)
    # keep headroom so additive noise cannot clip into flat plateaus
    field = np.clip(field, 20, 235)
    field += rng.normal(0.0, rng.uniform(5, 11), size=(height, width))
    offsets = rng.uniform(-6, 6, size=3)
    image = np.clip(field[:, :, None] + offsets[None, None, :], 0, 255)
    image = np.floor(image + 0.5).astype(np.uint8)
    return RealScene(image=image, text_truth=truth.astype(np.uint8))


def build_synth_corpus(count, seed, height=96, width=96):
    return [make_synth_scene(np.random.default_rng([seed, 101, i]),
                             height, width) for i in range(count)]


def build_real_corpus(count, seed, height=96, width=96):
    return [make_real_scene(np.random.default_rng([seed, 102, i]),
                            height, width) for i in range(count)]


def write_synth_corpus(scenes, out_dir):
    """Images, a JSONL annotation file, and stroke truth masks on disk.

    Returns the annotation file path. Truth masks go to a `truth/` subdir
    so they never masquerade as pool images.
    """
    os.makedirs(out_dir, exist_ok=True)
    truth_dir = os.path.join(out_dir, "truth")
    os.makedirs(truth_dir, exist_ok=True)
    records = []
    for i, scene in enumerate(scenes):
        name = f"synth_{i:05d}.png"
        write_image(scene.image, os.path.join(out_dir, name))
        write_mask(scene.glyph_truth, os.path.join(truth_dir, name))
        records.append(AnnotationSet(image_path=name,
                                     char_boxes=tuple(scene.char_boxes),
                                     word_boxes=tuple(scene.word_boxes),
                                     transcriptions=None))
    ann_path = os.path.join(out_dir, "annotations.jsonl")
    write_annotations(records, ann_path)
    return ann_path


def write_real_corpus(scenes, out_dir, with_truth=False):
    """Plain image files; optional truth masks under `truth/`."""
    os.makedirs(out_dir, exist_ok=True)
    if with_truth:
        os.makedirs(os.path.join(out_dir, "truth"), exist_ok=True)
    for i, scene in enumerate(scenes):
        name = f"real_{i:05d}.png"
        write_image(scene.image, os.path.join(out_dir, name))
        if with_truth:
            write_mask(scene.text_truth, os.path.join(out_dir, "truth", name))
    return out_dir

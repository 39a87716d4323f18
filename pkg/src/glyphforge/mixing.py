"""Label-carrying image mixing.

Mixers combine two images per pixel under a binary mask, and the mask is
applied identically to labels, reliability maps, and a per-pixel provenance
tag, so every output stays mutually consistent by construction.

Two mixers form the main composition:

* glyph paste: only the character-shaped pixels of a fully labeled image
  land on the unlabeled one, avoiding the rectangular seams that whole-box
  pasting leaves behind;
* text-weighted rectangle swap: of k random candidate windows, the one
  covering the most positive label pixels is swapped between two images of
  the same domain, so the swap rarely degenerates into background-only
  crops.

Reference mixers (mixup, cutmix, classmix) exist for the domain-gap
benchmark; they return bare images and carry no reliability information.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np


class Provenance(IntEnum):
    REAL1 = 0
    REAL2 = 1
    SYNTH = 2


@dataclass
class MixPair:
    """One mixed sample: image plus aligned label, reliability, provenance."""
    image: np.ndarray
    label: np.ndarray
    reliability: np.ndarray
    provenance: np.ndarray


@dataclass
class TimParams:
    num_candidates: int = 3
    side_fraction_range: tuple = (0.25, 0.5)
    rng: np.random.Generator | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.num_candidates < 1:
            raise ValueError("num_candidates must be >= 1")
        lo, hi = self.side_fraction_range
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError("side_fraction_range must satisfy 0 < lo <= hi <= 1")


def _spatial_shape(arr):
    a = np.asarray(arr)
    if a.ndim not in (2, 3):
        raise ValueError("rasters must be 2-D or (H, W, C)")
    return a.shape[:2]


def masked_compose(a, b, m):
    """Pixelwise select: m==1 takes a, m==0 takes b.

    a and b must agree in shape; m matches their spatial dimensions and
    broadcasts over channels.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("compose requires rasters of identical shape")
    if np.asarray(m).shape != _spatial_shape(a):
        raise ValueError("mask dimensions do not match the rasters")
    flags = np.asarray(m).astype(bool)
    if a.ndim == 3:
        flags = flags[:, :, None]
    return np.where(flags, a, b)


def gim(x_u, y_u, e_u, x_l, y_l, m_g) -> MixPair:
    """Paste glyph-shaped pixels of a labeled image onto an unlabeled one.

    The donor side is fully supervised, so its reliability is an implicit
    all-one map: wherever glyph pixels land, reliability is forced to 1;
    elsewhere the receiving image's own reliability survives.
    """
    m = np.asarray(m_g).astype(bool)
    image = masked_compose(x_l, x_u, m_g)
    label = masked_compose(np.asarray(y_l, dtype=np.uint8),
                           np.asarray(y_u, dtype=np.uint8), m_g)
    reliability = np.where(m, np.uint8(1),
                           np.asarray(e_u, dtype=np.uint8)).astype(np.uint8)
    provenance = np.where(m, np.uint8(Provenance.SYNTH),
                          np.uint8(Provenance.REAL1))
    return MixPair(image=image, label=label, reliability=reliability,
                   provenance=provenance)


def draw_tim_candidates(height, width, rng, params: TimParams):
    """k axis-aligned windows with sides drawn from side_fraction_range.

    Per candidate the draw order is (u_h, u_w, y0, x0): each side is
    max(1, round(u * extent)) and the placement is uniform over positions
    that keep the window inside the image. Fixed draw order lets an oracle
    replay the stream from the same seed.
    """
    out = []
    lo, hi = params.side_fraction_range
    for _ in range(params.num_candidates):
        bh = max(1, int(round(rng.uniform(lo, hi) * height)))
        bw = max(1, int(round(rng.uniform(lo, hi) * width)))
        y0 = int(rng.integers(0, height - bh + 1))
        x0 = int(rng.integers(0, width - bw + 1))
        out.append((y0, x0, bh, bw))
    return out


def draw_cutmix_rect(height, width, rng):
    """Conventional single-crop draw: area fraction uniform in (0, 1),
    sides scaled by its square root, placement uniform. Draw order is
    (area u, y0, x0)."""
    frac = np.sqrt(rng.uniform(0.0, 1.0))
    bh = max(1, int(round(frac * height)))
    bw = max(1, int(round(frac * width)))
    y0 = int(rng.integers(0, height - bh + 1))
    x0 = int(rng.integers(0, width - bw + 1))
    return (y0, x0, bh, bw)


def score_candidates(label_map, candidates):
    """Sum of positive label pixels inside each candidate window."""
    label = np.asarray(label_map)
    scores = np.empty(len(candidates), dtype=np.int64)
    for i, (y0, x0, bh, bw) in enumerate(candidates):
        scores[i] = int(label[y0:y0 + bh, x0:x0 + bw].sum())
    return scores


def tim_select_mask(y2, params: TimParams):
    """Draw k candidate windows and keep the one covering the most text.

    Scores are in-window sums of y2; ties resolve to the lowest candidate
    index (np.argmax on the score vector). Returns (mask, chosen_index).
    """
    label = np.asarray(y2)
    h, w = label.shape
    rng = params.rng if params.rng is not None else np.random.default_rng()
    candidates = draw_tim_candidates(h, w, rng, params)
    scores = score_candidates(label, candidates)
    idx = int(np.argmax(scores))
    y0, x0, bh, bw = candidates[idx]
    mask = np.zeros((h, w), dtype=np.uint8)
    mask[y0:y0 + bh, x0:x0 + bw] = 1
    return mask, idx


def tim(x1, y1, e1, x2, y2, e2, params: TimParams | None = None) -> MixPair:
    """Text-weighted rectangle swap inside one domain.

    Candidates are scored on the donor's label map y2, and the winning
    window replaces the corresponding region of the first triple.
    """
    params = params or TimParams()
    if np.asarray(x1).shape != np.asarray(x2).shape:
        raise ValueError("compose requires rasters of identical shape")
    m_t, _ = tim_select_mask(y2, params)
    flags = m_t.astype(bool)
    image = masked_compose(x2, x1, m_t)
    label = masked_compose(np.asarray(y2, np.uint8), np.asarray(y1, np.uint8), m_t)
    reliability = masked_compose(np.asarray(e2, np.uint8),
                                 np.asarray(e1, np.uint8), m_t)
    provenance = np.where(flags, np.uint8(Provenance.REAL2),
                          np.uint8(Provenance.REAL1))
    return MixPair(image=image, label=label, reliability=reliability,
                   provenance=provenance)


def glyphmix(x_u1, y_u1, e_u1, x_u2, y_u2, e_u2, x_l, y_l, m_g,
             params: TimParams | None = None) -> MixPair:
    """Full composition: rectangle-swap the real pair, then paste glyphs.

    Glyph pixels win wherever both masks select; outside them the swap's
    provenance survives.
    """
    inner = tim(x_u1, y_u1, e_u1, x_u2, y_u2, e_u2, params)
    outer = gim(inner.image, inner.label, inner.reliability, x_l, y_l, m_g)
    flags = np.asarray(m_g).astype(bool)
    outer.provenance = np.where(flags, np.uint8(Provenance.SYNTH),
                                inner.provenance).astype(np.uint8)
    return outer


def mixup(x1, x2, lam: float):
    """Convex pixel blend: out = round((1 - lam) * x1 + lam * x2).

    Rounding is floor(v + 0.5) so lam in {0, 1} reproduces an input
    bit-exactly.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    a = np.asarray(x1)
    b = np.asarray(x2)
    if a.shape != b.shape:
        raise ValueError("compose requires rasters of identical shape")
    blend = (1.0 - lam) * a.astype(np.float64) + lam * b.astype(np.float64)
    return np.floor(blend + 0.5).astype(np.uint8)


def cutmix(x1, x2, rect):
    """Paste one rectangle of x2 into x1; rect = (y0, x0, height, width)."""
    a = np.asarray(x1)
    b = np.asarray(x2)
    if a.shape != b.shape:
        raise ValueError("compose requires rasters of identical shape")
    y0, x0, bh, bw = rect
    if bh < 0 or bw < 0:
        raise ValueError("rectangle sides must be nonnegative")
    out = a.copy()
    out[y0:y0 + bh, x0:x0 + bw] = b[y0:y0 + bh, x0:x0 + bw]
    return out


def classmix(x1, x2, class_mask):
    """Paste x2 wherever class_mask is 1 (typically the donor's box-level
    label map, so whole annotation boxes transfer with their borders)."""
    return masked_compose(x2, x1, class_mask)

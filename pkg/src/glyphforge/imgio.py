"""PNG/JPEG image and mask I/O.

Masks are stored as 8-bit PNG with values 0/255. Provenance maps use a fixed
3-level encoding so they survive a PNG round trip byte-exactly:
real1 -> 0, real2 -> 128, synth -> 255.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .raster import RasterError, validate_image

PROVENANCE_ENCODING = np.array([0, 128, 255], dtype=np.uint8)


def read_image(path: str | os.PathLike) -> np.ndarray:
    """Load a PNG or JPEG as uint8, grayscale (H, W) or RGB (H, W, 3)."""
    with PILImage.open(path) as im:
        if im.mode == "L":
            return np.asarray(im, dtype=np.uint8)
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def write_image(path: str | os.PathLike, img: np.ndarray) -> None:
    arr = validate_image(img)
    PILImage.fromarray(arr).save(path)


def write_mask(path: str | os.PathLike, mask: np.ndarray) -> None:
    """Write a 0/1 mask as a 0/255 grayscale PNG."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise RasterError(f"mask must be 2-D, got shape {arr.shape}")
    PILImage.fromarray((arr.astype(np.uint8) * 255)).save(path)


def read_mask(path: str | os.PathLike) -> np.ndarray:
    """Read a mask PNG back to 0/1 (threshold at 128)."""
    with PILImage.open(path) as im:
        arr = np.asarray(im.convert("L"), dtype=np.uint8)
    return (arr >= 128).astype(np.uint8)


def encode_provenance(prov: np.ndarray) -> np.ndarray:
    """Map provenance codes {0, 1, 2} to the PNG levels {0, 128, 255}."""
    arr = np.asarray(prov)
    if arr.min() < 0 or arr.max() > 2:
        raise RasterError("provenance codes must be in {0, 1, 2}")
    return PROVENANCE_ENCODING[arr.astype(np.intp)]


def decode_provenance(levels: np.ndarray) -> np.ndarray:
    """Inverse of encode_provenance; unknown levels snap to the nearest code."""
    arr = np.asarray(levels, dtype=np.int16)
    codes = np.zeros(arr.shape, dtype=np.uint8)
    codes[arr >= 64] = 1
    codes[arr >= 192] = 2
    return codes


def write_provenance(path: str | os.PathLike, prov: np.ndarray) -> None:
    PILImage.fromarray(encode_provenance(prov)).save(path)


def read_provenance(path: str | os.PathLike) -> np.ndarray:
    with PILImage.open(path) as im:
        return decode_provenance(np.asarray(im.convert("L"), dtype=np.uint8))


def resolve_path(path: str, base: str | os.PathLike | None) -> Path:
    """Resolve a possibly relative path against the directory of its source file."""
    p = Path(path)
    if p.is_absolute() or base is None:
        return p
    return Path(base) / p

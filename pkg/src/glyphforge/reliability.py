"""Entropy-based pseudo-label gating and the annealed keep-percentile schedule.

The gate keeps pixels whose per-pixel entropy is at or below a dynamic
threshold: the threshold sits at the (100 - gamma)-th percentile of the
entropy map, so the top gamma percent highest-entropy pixels are excluded.
Annealing gamma from 80 down to 20 grows the supervised fraction from roughly
20% to 80% as pseudo-labels become more reliable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .raster import clamp_logits

ENTROPY_FORMS = ("one_sided", "binary")


def entropy_map(logits: np.ndarray, form: str = "one_sided") -> np.ndarray:
    """Per-pixel entropy of a probability map (natural log).

    one_sided: h = -y*ln(y), the form used for gating. It vanishes at both
    extremes (confident positives AND confident negatives pass the gate) and
    peaks at y = 1/e. binary: full -y*ln(y) - (1-y)*ln(1-y).
    """
    y = clamp_logits(logits)
    h = -y * np.log(y)
    if form == "one_sided":
        return h
    if form == "binary":
        return h - (1.0 - y) * np.log(1.0 - y)
    raise ValueError(f"unknown entropy form {form!r}; expected one of {ENTROPY_FORMS}")


def threshold_for_gamma(h: np.ndarray, gamma: float) -> float:
    """Nearest-rank (100 - gamma)-th percentile of the entropy multiset.

    gamma = 0 returns the maximum (everything kept); gamma = 100 the minimum
    (only minimum-entropy pixels survive the <= comparison).
    """
    if not 0.0 <= gamma <= 100.0:
        raise ValueError(f"gamma must be in [0, 100], got {gamma}")
    flat = np.sort(np.asarray(h, dtype=np.float64), axis=None)
    n = flat.size
    if n == 0:
        raise ValueError("empty entropy map")
    rank = math.ceil((100.0 - gamma) / 100.0 * n)
    rank = min(max(rank, 1), n)
    return float(flat[rank - 1])


def reliability_mask(logits: np.ndarray, gamma: float, form: str = "one_sided") -> np.ndarray:
    """Binary keep-mask: 1 where entropy <= the gamma-derived threshold."""
    h = entropy_map(logits, form=form)
    zeta = threshold_for_gamma(h, gamma)
    return (h <= zeta).astype(np.uint8)


@dataclass(frozen=True)
class GammaSchedule:
    """Linear anneal of the excluded percentile, inclusive at both endpoints."""

    start: float = 80.0
    end: float = 20.0
    total_steps: int = 1

    def __post_init__(self):
        if not (0.0 <= self.start <= 100.0 and 0.0 <= self.end <= 100.0):
            raise ValueError("gamma endpoints must be in [0, 100]")
        if self.total_steps < 1:
            raise ValueError("total_steps must be >= 1")


def gamma_at(s: GammaSchedule, step: int) -> float:
    """Value of the schedule at a step in [0, total_steps)."""
    if not 0 <= step < s.total_steps:
        raise ValueError(f"step {step} outside [0, {s.total_steps})")
    if s.total_steps == 1:
        return float(s.start)
    return s.start + (s.end - s.start) * step / (s.total_steps - 1)

"""Domain-gap measurement for mixing strategies.

A binary classifier is trained to tell the synthetic-looking domain (label
0) from the real-looking one (label 1) on whole-image texture features. A
mixing strategy is then scored by the fraction of mixed images the
classifier still calls real: the closer a mixer's output stays to the real
domain, the higher its score. The classifier must clear a holdout-accuracy
gate before any score is trusted, since an inseparable classifier would
make every mixer look perfect.

The exhaustive all-pairs average is replaced by a uniform Monte-Carlo
estimate with a declared pair budget; per-pair RNG streams are spawned from
the parent generator so the estimate does not depend on how pairs are
distributed over workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from scipy import ndimage

from .mixing import TimParams, classmix, cutmix, draw_cutmix_rect, glyphmix, mixup
from .raster import to_grayscale
from .training import SynthSample

FEATURE_DIM = 32 + 32 + 16 + 6
GRAD_HIST_MAX = 64.0
EDGE_GRAD_THRESHOLD = 8.0
FLAT_STD_THRESHOLD = 1.5


class ClassifierNotSeparableError(RuntimeError):
    """Holdout accuracy below the validity gate; domain scores would be noise."""


@dataclass
class DomainClassifier:
    weights: np.ndarray
    bias: float
    feat_mean: np.ndarray
    feat_std: np.ndarray
    holdout_accuracy: float

    def predict_proba(self, img: np.ndarray) -> float:
        f = (domain_features(img) - self.feat_mean) / self.feat_std
        z = float(f @ self.weights + self.bias)
        return 1.0 / (1.0 + np.exp(-z))


@dataclass
class DcaReport:
    mixer: str
    pairs: int
    skipped: int
    dca: float
    holdout_accuracy: float


def domain_features(img: np.ndarray) -> np.ndarray:
    """Whole-image texture features.

    Histograms (intensity, gradient magnitude) and an edge-density grid
    describe the overall texture, but they move only in proportion to how
    much of the image a paste covers, so a linear head on them can never
    flip its decision over a partial paste. The last six features therefore
    saturate instead of average: low percentiles of the local-deviation map
    and flat-region fractions jump to their rendered-domain value as soon
    as any appreciable noise-free region exists, the way a patch-level
    classifier would fire on the pasted region alone. Sensor noise makes
    truly flat neighborhoods essentially impossible in a photograph.
    """
    gray = to_grayscale(img)
    n = gray.size
    out = np.empty(FEATURE_DIM, dtype=np.float64)
    out[:32] = np.bincount((gray >> 3).ravel(), minlength=32)[:32] / n

    g = gray.astype(np.float64)
    gy, gx = np.gradient(g)
    gmag = np.hypot(gx, gy)
    clipped = np.minimum(gmag, GRAD_HIST_MAX - 1e-9)
    out[32:64] = np.histogram(clipped, bins=32, range=(0.0, GRAD_HIST_MAX))[0] / n

    h, w = gray.shape
    edges = (gmag >= EDGE_GRAD_THRESHOLD).astype(np.float64)
    ys = np.linspace(0, h, 5).astype(int)
    xs = np.linspace(0, w, 5).astype(int)
    k = 64
    for i in range(4):
        for j in range(4):
            block = edges[ys[i]:ys[i + 1], xs[j]:xs[j + 1]]
            out[k] = float(block.mean()) if block.size else 0.0
            k += 1

    m = ndimage.uniform_filter(g, size=3, mode="reflect")
    m2 = ndimage.uniform_filter(g * g, size=3, mode="reflect")
    lstd = np.sqrt(np.maximum(m2 - m * m, 0.0))
    out[80] = float(np.percentile(lstd, 5))
    out[81] = float(np.percentile(lstd, 10))
    out[82] = float(np.percentile(lstd, 25))
    out[83] = float(np.mean(lstd < FLAT_STD_THRESHOLD))
    bh, bw = (h // 8) * 8, (w // 8) * 8
    blocks = g[:bh, :bw].reshape(bh // 8, 8, bw // 8, 8)
    block_std = blocks.std(axis=(1, 3))
    out[84] = float(np.mean(block_std < FLAT_STD_THRESHOLD)) if block_std.size else 0.0
    out[85] = float(np.mean(gmag < 1.0))
    return out


def train_domain_classifier(synth_images, real_images, rng,
                            holdout_fraction=0.25, iters=400, lr=0.5,
                            l2=1e-3, min_holdout_accuracy=0.9) -> DomainClassifier:
    """Balanced logistic regression with a holdout validity gate.

    Raises ClassifierNotSeparableError when holdout accuracy falls below
    the gate; a score computed against an undiscriminating classifier says
    nothing about domain alignment.
    """
    if not synth_images or not real_images:
        raise ValueError("both image sets must be non-empty")
    n = min(len(synth_images), len(real_images))
    s_idx = rng.permutation(len(synth_images))[:n]
    r_idx = rng.permutation(len(real_images))[:n]
    s_feats = np.stack([domain_features(synth_images[int(i)]) for i in s_idx])
    r_feats = np.stack([domain_features(real_images[int(i)]) for i in r_idx])

    n_hold = max(1, int(round(holdout_fraction * n)))
    if n_hold >= n:
        raise ValueError("not enough images for a train/holdout split")
    x_train = np.concatenate([s_feats[n_hold:], r_feats[n_hold:]])
    y_train = np.concatenate([np.zeros(n - n_hold), np.ones(n - n_hold)])
    x_hold = np.concatenate([s_feats[:n_hold], r_feats[:n_hold]])
    y_hold = np.concatenate([np.zeros(n_hold), np.ones(n_hold)])

    mean = x_train.mean(axis=0)
    std = np.maximum(x_train.std(axis=0), 1e-6)
    xs = (x_train - mean) / std

    w = np.zeros(FEATURE_DIM)
    b = 0.0
    m = xs.shape[0]
    for _ in range(iters):
        p = 1.0 / (1.0 + np.exp(-(xs @ w + b)))
        delta = (p - y_train) / m
        w -= lr * (xs.T @ delta + l2 * w)
        b -= lr * float(delta.sum())

    xh = (x_hold - mean) / std
    pred = (1.0 / (1.0 + np.exp(-(xh @ w + b)))) >= 0.5
    acc = float(np.mean(pred == y_hold.astype(bool)))
    if acc < min_holdout_accuracy:
        raise ClassifierNotSeparableError(
            f"holdout accuracy {acc:.3f} below required "
            f"{min_holdout_accuracy:.2f}; domains are not separable")
    return DomainClassifier(weights=w, bias=b, feat_mean=mean, feat_std=std,
                            holdout_accuracy=acc)


def _mix_glyphmix(synth: SynthSample, real1, real2, rng):
    h, w = real1.shape[:2]
    zeros = np.zeros((h, w), dtype=np.uint8)
    ones = np.ones((h, w), dtype=np.uint8)
    pair = glyphmix(real1, zeros, ones, real2, zeros, ones,
                    synth.image, synth.label, synth.glyph_mask,
                    TimParams(rng=rng))
    return pair.image


def _mix_classmix(synth: SynthSample, real1, real2, rng):
    return classmix(real1, synth.image, synth.label)


def _mix_cutmix(synth: SynthSample, real1, real2, rng):
    h, w = real1.shape[:2]
    rect = draw_cutmix_rect(h, w, rng)
    return cutmix(real1, synth.image, rect)


def _mix_mixup(synth: SynthSample, real1, real2, rng):
    return mixup(real1, synth.image, float(rng.uniform(0.0, 1.0)))


def _mix_identity_real(synth, real1, real2, rng):
    return real1


def _mix_identity_synth(synth, real1, real2, rng):
    return synth.image


MIXERS = {
    "glyphmix": _mix_glyphmix,
    "classmix": _mix_classmix,
    "cutmix": _mix_cutmix,
    "mixup": _mix_mixup,
    "identity_real": _mix_identity_real,
    "identity_synth": _mix_identity_synth,
}


def dca(classifier: DomainClassifier, mixer, synth_samples, real_images,
        budget: int, rng, soft: bool = False) -> DcaReport:
    """Monte-Carlo real-domain score of one mixer.

    ``mixer`` is a name from MIXERS or a callable (synth, real1, real2,
    rng) -> image. Pairs are drawn uniformly; a mixer failure skips the
    pair and is counted. ``soft`` averages probabilities instead of hard
    0.5 decisions.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    name = mixer if isinstance(mixer, str) else getattr(mixer, "__name__", "custom")
    fn = MIXERS[mixer] if isinstance(mixer, str) else mixer

    n_s = len(synth_samples)
    n_r = len(real_images)
    total = 0.0
    evaluated = 0
    skipped = 0
    for child in rng.spawn(budget):
        si = int(child.integers(0, n_s))
        r1 = int(child.integers(0, n_r))
        r2 = int(child.integers(0, n_r))
        try:
            mixed = fn(synth_samples[si], real_images[r1], real_images[r2], child)
        except Exception:
            skipped += 1
            continue
        p = classifier.predict_proba(mixed)
        total += p if soft else float(p >= 0.5)
        evaluated += 1
    if evaluated == 0:
        raise RuntimeError(f"mixer {name} failed on every sampled pair")
    return DcaReport(mixer=name, pairs=evaluated, skipped=skipped,
                     dca=total / evaluated,
                     holdout_accuracy=classifier.holdout_accuracy)

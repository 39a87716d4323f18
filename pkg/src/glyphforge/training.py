"""Student-teacher pre-training at desk scale.

The model is a linear per-pixel scorer over nine fixed local features (local
mean, local deviation, and local gradient energy at window radii 1, 2, 4 on
normalized grayscale) plus a bias. It is deliberately small: the point of
this harness is to exercise the data pipeline (mixing, gating, EMA) end to
end on a CPU in minutes, with the scorer acting as a stand-in interface for
a real detector.

Per step: the teacher scores a weakly augmented (geometry-only) view of each
real image to produce pseudo-labels and an entropy-gated reliability mask;
the strong view adds photometric jitter on the same geometry so labels stay
aligned; mixed samples are assembled; the student takes one SGD step on the
masked cross-entropy; the teacher follows by exponential moving average.

Everything is driven by seed-split RNG streams keyed on (seed, step, slot),
so metrics are bit-reproducible and independent of how batch assembly is
parallelized.
"""

from __future__ import annotations

import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .augment import AugmentationSpec, draw_geom_transform, photometric_augment
from .glyphs import GlyphParams, build_glyph_mask
from .mixing import TimParams, gim, glyphmix
from .raster import clamp_logits, to_grayscale
from .reliability import GammaSchedule, gamma_at, reliability_mask
from .seeding import split_rng

FEATURE_RADII = (1, 2, 4)
FEATURE_COUNT = 3 * len(FEATURE_RADII)
CHECKPOINT_MAGIC = b"GFCK"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class PixelScorer:
    """Linear per-pixel text scorer: FEATURE_COUNT weights plus a bias."""
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (FEATURE_COUNT + 1,):
            raise ValueError(f"scorer expects {FEATURE_COUNT + 1} weights")
        object.__setattr__(self, "weights", w)

    @classmethod
    def initial(cls, rng, weight_scale: float = 0.01, bias: float = -2.0):
        # negative bias encodes a "mostly not text" prior; a neutral start
        # would make the teacher emit 0.5 everywhere, which binarizes to
        # all-ones and locks the loop into self-confirming pseudo-labels
        w = np.empty(FEATURE_COUNT + 1, dtype=np.float64)
        w[:FEATURE_COUNT] = weight_scale * rng.standard_normal(FEATURE_COUNT)
        w[FEATURE_COUNT] = bias
        return cls(weights=w)


def feature_stack(img: np.ndarray) -> np.ndarray:
    """(H, W, FEATURE_COUNT) float features on grayscale scaled to [0, 1].

    Per radius r: mean and standard deviation over the (2r+1)-square window,
    and the window mean of the central-difference gradient magnitude. All
    filters use reflected borders.
    """
    gray = to_grayscale(img).astype(np.float64) / 255.0
    gy, gx = np.gradient(gray)
    gmag = np.hypot(gx, gy)
    feats = np.empty(gray.shape + (FEATURE_COUNT,), dtype=np.float64)
    for i, r in enumerate(FEATURE_RADII):
        size = 2 * r + 1
        m = ndimage.uniform_filter(gray, size=size, mode="reflect")
        m2 = ndimage.uniform_filter(gray * gray, size=size, mode="reflect")
        var = np.maximum(m2 - m * m, 0.0)
        feats[:, :, 3 * i] = m
        feats[:, :, 3 * i + 1] = np.sqrt(var)
        feats[:, :, 3 * i + 2] = ndimage.uniform_filter(gmag, size=size,
                                                        mode="reflect")
    return feats


def score_features(model: PixelScorer, feats: np.ndarray) -> np.ndarray:
    z = feats @ model.weights[:FEATURE_COUNT] + model.weights[FEATURE_COUNT]
    return clamp_logits(1.0 / (1.0 + np.exp(-z)))


def score(model: PixelScorer, img: np.ndarray) -> np.ndarray:
    """Clamped sigmoid of the linear feature score, per pixel."""
    return score_features(model, feature_stack(img))


def pseudo_label(teacher: PixelScorer, img: np.ndarray, threshold: float = 0.5):
    """Teacher logits plus their binarization (>= threshold counts as text)."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    logits = score(teacher, img)
    return logits, (logits >= threshold).astype(np.uint8)


def masked_bce(pred: np.ndarray, target: np.ndarray, keep: np.ndarray,
               feats: np.ndarray):
    """Mean binary cross-entropy over kept pixels, with its weight gradient.

    ``feats`` must be the same stack ``pred`` was scored from; the gradient
    uses the standard sigmoid identity d(loss)/d(z) = pred - target, which
    is exact away from the logit clamp.
    """
    flags = np.asarray(keep).astype(bool)
    n = int(flags.sum())
    if n == 0:
        raise ValueError("reliability mask keeps no pixels; nothing to train on")
    p = pred[flags]
    t = target[flags].astype(np.float64)
    loss = float(np.mean(-(t * np.log(p) + (1.0 - t) * np.log(1.0 - p))))
    delta = (p - t) / n
    f = feats[flags]
    grad = np.empty(FEATURE_COUNT + 1, dtype=np.float64)
    grad[:FEATURE_COUNT] = f.T @ delta
    grad[FEATURE_COUNT] = float(delta.sum())
    return loss, grad


def ema_update(teacher: PixelScorer, student: PixelScorer,
               alpha: float) -> PixelScorer:
    """teacher' = alpha * teacher + (1 - alpha) * student, elementwise."""
    if teacher.weights.shape != student.weights.shape:
        raise ValueError("teacher and student weight shapes differ")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return PixelScorer(alpha * teacher.weights + (1.0 - alpha) * student.weights)


@dataclass(frozen=True)
class TrainConfig:
    total_steps: int = 2000
    batch_size: int = 24
    ema_alpha: float = 0.996
    base_lr: float | None = None
    lr_floor: float = 0.0
    warmup_fraction: float = 0.1
    binarize_threshold: float = 0.5
    gamma_start: float = 80.0
    gamma_end: float = 20.0
    entropy_form: str = "one_sided"
    mode: str = "glyphmix"
    use_tim: bool = True
    tim_candidates: int = 3
    tim_side_fractions: tuple = (0.25, 0.5)
    init_bias: float = -2.0
    init_weight_scale: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.total_steps < 0:
            raise ValueError("total_steps must be >= 0")
        if self.batch_size < 2 or self.batch_size % 2:
            raise ValueError("batch_size must be even (two equal halves)")
        if not 0.0 <= self.ema_alpha < 1.0:
            raise ValueError("ema_alpha must lie in [0, 1)")
        if self.mode not in ("glyphmix", "synth_only"):
            raise ValueError("mode must be glyphmix or synth_only")
        if not 0.0 <= self.warmup_fraction <= 1.0:
            raise ValueError("warmup_fraction must lie in [0, 1]")

    def effective_lr(self) -> float:
        # default peak follows the linear batch-size scaling rule
        if self.base_lr is not None:
            return self.base_lr
        return 0.003 * self.batch_size / 256.0

    def gamma_schedule(self) -> GammaSchedule:
        return GammaSchedule(start=self.gamma_start, end=self.gamma_end,
                             total_steps=max(self.total_steps, 1))


def lr_at(config: TrainConfig, step: int) -> float:
    """Linear warm-up to the peak, then cosine decay to the floor.

    The last warm-up step equals the peak exactly, and the final step of the
    run sits exactly on the floor.
    """
    total = config.total_steps
    if total <= 0:
        return config.effective_lr()
    base = config.effective_lr()
    warm = int(round(config.warmup_fraction * total))
    if step < warm:
        return base * (step + 1) / warm
    last = total - 1
    if last <= warm:
        return base if step <= warm else config.lr_floor
    phase = (step - warm) / (last - warm)
    return config.lr_floor + 0.5 * (base - config.lr_floor) * (1.0 + math.cos(math.pi * phase))


@dataclass(frozen=True)
class SynthSample:
    image: np.ndarray
    label: np.ndarray
    glyph_mask: np.ndarray


@dataclass(frozen=True)
class RealSample:
    image: np.ndarray


@dataclass
class TrainState:
    config: TrainConfig
    student: PixelScorer
    teacher: PixelScorer
    step: int = 0
    aug: AugmentationSpec = field(default_factory=AugmentationSpec)


def init_state(config: TrainConfig,
               aug: AugmentationSpec | None = None) -> TrainState:
    rng = split_rng(config.seed, 2)
    student = PixelScorer.initial(rng, config.init_weight_scale, config.init_bias)
    teacher = PixelScorer(student.weights.copy())
    return TrainState(config=config, student=student, teacher=teacher, step=0,
                      aug=aug or AugmentationSpec())


def _assemble_slot(state: TrainState, srec: SynthSample, r1: RealSample,
                   r2: RealSample, gamma: float, slot_rng):
    """One mixed training sample; returns (image, label, keep, kept_fraction)."""
    cfg = state.config
    h, w = r1.image.shape[:2]

    def real_view(sample):
        geom = draw_geom_transform(h, w, slot_rng, state.aug)
        weak = geom.apply_to_raster(sample.image)
        logits, y = pseudo_label(state.teacher, weak, cfg.binarize_threshold)
        keep = reliability_mask(logits, gamma, cfg.entropy_form)
        strong = photometric_augment(weak, slot_rng, state.aug)
        return strong, y, keep

    img1, y1, e1 = real_view(r1)
    if cfg.use_tim:
        img2, y2, e2 = real_view(r2)
        params = TimParams(num_candidates=cfg.tim_candidates,
                           side_fraction_range=cfg.tim_side_fractions,
                           rng=slot_rng)
        pair = glyphmix(img1, y1, e1, img2, y2, e2,
                        srec.image, srec.label, srec.glyph_mask, params)
        kept = 0.5 * (float(e1.mean()) + float(e2.mean()))
    else:
        pair = gim(img1, y1, e1, srec.image, srec.label, srec.glyph_mask)
        kept = float(e1.mean())
    return pair.image, pair.label, pair.reliability, kept


def _assemble_synth_slot(state: TrainState, srec: SynthSample, slot_rng):
    """Ablation slot: strongly augmented synthetic sample, full supervision."""
    h, w = srec.image.shape[:2]
    geom = draw_geom_transform(h, w, slot_rng, state.aug)
    img = geom.apply_to_raster(srec.image)
    label = geom.apply_to_raster(srec.label)
    img = photometric_augment(img, slot_rng, state.aug)
    return img, label, np.ones_like(label), 1.0


def pretrain_step(state: TrainState, synth_batch, real_batch):
    """One optimization step; returns (new_state, metrics dict).

    The teacher is read-only here except for the closing EMA move.
    """
    cfg = state.config
    if not synth_batch or (cfg.mode == "glyphmix" and not real_batch):
        raise ValueError("pretrain_step requires non-empty batches")
    gamma = gamma_at(cfg.gamma_schedule(),
                     min(state.step, max(cfg.total_steps - 1, 0)))

    slots = []
    kept_fractions = []
    half = len(synth_batch)
    for i in range(half):
        slot_rng = split_rng(cfg.seed, 1, state.step, i)
        if cfg.mode == "synth_only":
            slot = _assemble_synth_slot(state, synth_batch[i], slot_rng)
        else:
            r1 = real_batch[i % len(real_batch)]
            r2 = real_batch[(i + half) % len(real_batch)]
            slot = _assemble_slot(state, synth_batch[i], r1, r2, gamma, slot_rng)
        slots.append(slot[:3])
        kept_fractions.append(slot[3])

    feats = np.concatenate([feature_stack(img).reshape(-1, FEATURE_COUNT)
                            for img, _, _ in slots])
    target = np.concatenate([lab.ravel() for _, lab, _ in slots])
    keep = np.concatenate([k.ravel() for _, _, k in slots])
    pred = score_features(state.student, feats)

    loss, grad = masked_bce(pred, target, keep, feats)
    lr = lr_at(cfg, state.step)
    student = PixelScorer(state.student.weights - lr * grad)
    teacher = ema_update(state.teacher, student, cfg.ema_alpha)

    metrics = {
        "step": state.step,
        "loss": loss,
        "gamma": gamma,
        "kept_fraction": float(np.mean(kept_fractions)),
        "lr": lr,
    }
    new_state = TrainState(config=cfg, student=student, teacher=teacher,
                           step=state.step + 1, aug=state.aug)
    return new_state, metrics


def prepare_synth_samples(records, glyph_params: GlyphParams | None = None,
                          seed: int = 0):
    """Attach label maps and glyph masks to (image, boxes) records.

    Glyph masks are cached per (image, seed) by virtue of being computed
    once here; pass recompute by calling again.
    """
    from .annotations import label_map

    out = []
    params = glyph_params or GlyphParams()
    for idx, (image, boxes) in enumerate(records):
        h, w = image.shape[:2]
        rng = split_rng(seed, 3, idx)
        report = build_glyph_mask(image, boxes, rng, params)
        out.append(SynthSample(image=image, label=label_map(boxes, w, h),
                               glyph_mask=report.mask))
    return out


def save_checkpoint(path, state: TrainState):
    """Versioned binary blob: magic, JSON header, float64 weight planes."""
    header = {
        "version": CHECKPOINT_VERSION,
        "step": state.step,
        "feature_count": FEATURE_COUNT,
        "config": {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in vars(state.config).items()},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = (CHECKPOINT_MAGIC
               + np.uint32(len(blob)).tobytes()
               + blob
               + state.student.weights.tobytes()
               + state.teacher.weights.tobytes())
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path):
    """Returns (student, teacher, header dict)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    hlen = int(np.frombuffer(blob[4:8], dtype=np.uint32)[0])
    header = json.loads(blob[8:8 + hlen].decode("utf-8"))
    n = header["feature_count"] + 1
    body = np.frombuffer(blob[8 + hlen:], dtype=np.float64)
    if body.size != 2 * n:
        raise ValueError(f"{path}: truncated weight payload")
    return PixelScorer(body[:n].copy()), PixelScorer(body[n:].copy()), header


def run_pretraining(config: TrainConfig, synth_samples, real_samples,
                    out_dir=None, aug: AugmentationSpec | None = None,
                    log_every: int = 0):
    """Full loop: T steps, checkpoint and JSONL metrics under out_dir.

    Returns (final_state, metrics list). out_dir=None keeps everything in
    memory.
    """
    if not synth_samples:
        raise ValueError("no synthetic samples")
    if config.mode == "glyphmix" and not real_samples:
        raise ValueError("no real samples")
    state = init_state(config, aug)
    half = config.batch_size // 2
    history = []

    metrics_fh = None
    try:
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            metrics_fh = open(os.path.join(out_dir, "metrics.jsonl"), "w",
                              encoding="utf-8")
        for step in range(config.total_steps):
            step_rng = split_rng(config.seed, 0, step)
            si = step_rng.integers(0, len(synth_samples), size=half)
            synth_batch = [synth_samples[int(i)] for i in si]
            if config.mode == "glyphmix":
                ri = step_rng.integers(0, len(real_samples), size=2 * half)
                real_batch = [real_samples[int(i)] for i in ri]
            else:
                real_batch = []
            try:
                state, metrics = pretrain_step(state, synth_batch, real_batch)
            except Exception as exc:
                raise RuntimeError(f"training failed at step {step}: {exc}") from exc
            history.append(metrics)
            if metrics_fh is not None:
                metrics_fh.write(json.dumps(metrics, sort_keys=True) + "\n")
            if log_every and step % log_every == 0:
                logging.getLogger("glyphforge").info(
                    "step %d loss %.4f gamma %.1f kept %.3f lr %.2e",
                    step, metrics["loss"], metrics["gamma"],
                    metrics["kept_fraction"], metrics["lr"])
    finally:
        if metrics_fh is not None:
            metrics_fh.close()
    if out_dir is not None:
        save_checkpoint(os.path.join(out_dir, "checkpoint.bin"), state)
    return state, history


def evaluate_f_measure(model: PixelScorer, samples,
                       threshold: float = 0.5) -> float:
    """Pixel-level F-measure pooled over (image, ground truth) pairs."""
    tp = fp = fn = 0
    for image, truth in samples:
        pred = (score(model, image) >= threshold)
        t = np.asarray(truth).astype(bool)
        tp += int(np.sum(pred & t))
        fp += int(np.sum(pred & ~t))
        fn += int(np.sum(~pred & t))
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


def evaluate_best_f(model: PixelScorer, samples,
                    thresholds=None) -> float:
    """Best pooled F-measure over a grid of score thresholds.

    Detector comparisons conventionally report F at the best probability-map
    cutoff, so differently calibrated models are compared on discrimination.
    """
    if thresholds is None:
        thresholds = np.linspace(0.05, 0.95, 19)
    preds = [(score(model, image), np.asarray(truth).astype(bool))
             for image, truth in samples]
    best = 0.0
    for tau in thresholds:
        tp = fp = fn = 0
        for p, t in preds:
            b = p >= tau
            tp += int(np.sum(b & t))
            fp += int(np.sum(b & ~t))
            fn += int(np.sum(~b & t))
        if tp:
            precision = tp / (tp + fp)
            recall = tp / (tp + fn)
            best = max(best, 2.0 * precision * recall / (precision + recall))
    return best

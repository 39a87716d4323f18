"""Mixed-pair generation engine.

One function, generate_pair, owns the complete recipe for producing sample
`index` from (seed, pools, config): it derives a private RNG stream from
[seed, index], draws source images, builds masks, and composes. Everything
downstream (CLI output, benchmarking, in-memory batch APIs) calls this same
function, which is what makes byte-level parity across interfaces and
worker counts a structural property instead of a test hope.

Real images may carry optional sidecar files next to them:

* ``<stem>.label.png``   binary text map used as the real side's label
* ``<stem>.logits.npy``  float map in (0,1) used for entropy gating

Without sidecars the label is all-zero and the reliability all-one.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .annotations import Granularity, label_map, parse_annotations
from .glyphs import GlyphParams, build_glyph_mask
from .imgio import read_image, resolve_path, write_image, write_mask, write_provenance
from .mixing import (MixPair, Provenance, TimParams, draw_cutmix_rect, gim,
                     glyphmix, mixup)
from .reliability import reliability_mask

MIX_MODES = ("glyphmix", "mixup", "cutmix", "classmix")


@dataclass
class EngineConfig:
    mode: str = "glyphmix"
    use_tim: bool = True
    granularity: Granularity = Granularity.CHAR
    gamma: float | None = None
    entropy_form: str = "one_sided"
    glyph: GlyphParams = field(default_factory=GlyphParams)
    tim_candidates: int = 3
    tim_side_fractions: tuple = (0.25, 0.5)

    def __post_init__(self):
        if self.mode not in MIX_MODES:
            raise ValueError(f"unknown mix mode {self.mode!r}")
        if isinstance(self.granularity, str):
            self.granularity = Granularity(self.granularity)


@dataclass
class SynthRecord:
    image: np.ndarray
    boxes: tuple
    path: str = ""


@dataclass
class RealRecord:
    image: np.ndarray
    label: np.ndarray
    logits: np.ndarray | None
    path: str = ""


def _as_rgb(img):
    if img.ndim == 2:
        return np.repeat(img[:, :, None], 3, axis=2)
    return img


def load_synth_pool(annotations_path, granularity=Granularity.CHAR):
    """Parse annotations and load their images; image paths resolve
    relative to the annotation file. Records lacking the requested
    granularity are dropped."""
    if isinstance(granularity, str):
        granularity = Granularity(granularity)
    result = parse_annotations(annotations_path)
    pool = []
    for rec in result:
        boxes = (rec.char_boxes if granularity is Granularity.CHAR
                 else rec.word_boxes)
        if not boxes:
            continue
        path = resolve_path(rec.image_path, annotations_path)
        pool.append(SynthRecord(image=_as_rgb(read_image(path)),
                                boxes=tuple(boxes), path=path))
    if not pool:
        raise ValueError(
            f"{annotations_path}: no usable records at granularity "
            f"{granularity.value}")
    return pool


_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
_SIDECAR_MARKERS = (".label.", ".logits.", ".truth.")


def load_real_pool(real_dir):
    """All top-level images in a directory, with optional sidecars."""
    if not os.path.isdir(real_dir):
        raise FileNotFoundError(f"real image directory not found: {real_dir}")
    names = sorted(os.listdir(real_dir))
    pool = []
    for name in names:
        lower = name.lower()
        if not lower.endswith(_IMAGE_SUFFIXES):
            continue
        if any(marker in lower for marker in _SIDECAR_MARKERS):
            continue
        path = os.path.join(real_dir, name)
        image = _as_rgb(read_image(path))
        h, w = image.shape[:2]
        stem = os.path.splitext(path)[0]

        label_path = stem + ".label.png"
        if os.path.exists(label_path):
            from .imgio import read_mask
            label = read_mask(label_path)
        else:
            label = np.zeros((h, w), dtype=np.uint8)

        logits_path = stem + ".logits.npy"
        logits = np.load(logits_path) if os.path.exists(logits_path) else None
        pool.append(RealRecord(image=image, label=label, logits=logits,
                               path=path))
    if not pool:
        raise ValueError(f"{real_dir}: no images found")
    return pool


def _real_reliability(rec: RealRecord, config: EngineConfig):
    h, w = rec.image.shape[:2]
    if config.gamma is None or rec.logits is None:
        return np.ones((h, w), dtype=np.uint8)
    return reliability_mask(rec.logits, config.gamma, config.entropy_form)


def _check_sizes(synth: SynthRecord, real: RealRecord):
    if synth.image.shape != real.image.shape:
        raise ValueError(
            f"image size mismatch: {synth.path or 'synthetic'} is "
            f"{synth.image.shape} but {real.path or 'real'} is {real.image.shape}")


def generate_pair(synth_pool, real_pool, index, seed, config: EngineConfig,
                  clock=None):
    """Deterministically generate mixed sample `index`.

    Returns (MixPair, meta dict). The RNG stream is keyed on [seed, index]
    alone, so the result is independent of batching, ordering, and worker
    count. Sources are sampled with replacement, which also covers the
    sources-smaller-than-count case.
    """
    rng = np.random.default_rng([int(seed), int(index)])
    si = int(rng.integers(0, len(synth_pool)))
    r1 = int(rng.integers(0, len(real_pool)))
    srec = synth_pool[si]
    rrec = real_pool[r1]
    _check_sizes(srec, rrec)
    h, w = rrec.image.shape[:2]

    t0 = clock.start() if clock is not None else None
    y_l = label_map(srec.boxes, w, h)
    if clock is not None:
        clock.add("rasterize", t0)

    e_u = _real_reliability(rrec, config)
    meta = {"index": int(index), "mode": config.mode, "synth_index": si,
            "real_index": r1}

    if config.mode == "glyphmix":
        report = build_glyph_mask(srec.image, srec.boxes, rng, config.glyph,
                                  clock=clock)
        t0 = clock.start() if clock is not None else None
        if config.use_tim:
            r2 = int(rng.integers(0, len(real_pool)))
            rrec2 = real_pool[r2]
            _check_sizes(srec, rrec2)
            meta["real_index2"] = r2
            params = TimParams(num_candidates=config.tim_candidates,
                               side_fraction_range=config.tim_side_fractions,
                               rng=rng)
            pair = glyphmix(rrec.image, rrec.label, e_u,
                            rrec2.image, rrec2.label, _real_reliability(rrec2, config),
                            srec.image, y_l, report.mask, params)
        else:
            pair = gim(rrec.image, rrec.label, e_u, srec.image, y_l, report.mask)
        if clock is not None:
            clock.add("compose", t0)
        return pair, meta

    t0 = clock.start() if clock is not None else None
    if config.mode == "mixup":
        lam = float(rng.uniform(0.0, 1.0))
        image = mixup(rrec.image, srec.image, lam)
        mask = np.full((h, w), np.uint8(1 if lam >= 0.5 else 0))
        meta["lam"] = lam
    elif config.mode == "cutmix":
        rect = draw_cutmix_rect(h, w, rng)
        y0, x0, bh, bw = rect
        mask = np.zeros((h, w), dtype=np.uint8)
        mask[y0:y0 + bh, x0:x0 + bw] = 1
        image = np.where(mask[:, :, None].astype(bool), srec.image, rrec.image)
        meta["rect"] = list(rect)
    else:  # classmix
        mask = y_l
        image = np.where(mask[:, :, None].astype(bool), srec.image, rrec.image)

    flags = mask.astype(bool)
    label = np.where(flags, y_l, rrec.label).astype(np.uint8)
    reliability = np.where(flags, np.uint8(1), e_u).astype(np.uint8)
    provenance = np.where(flags, np.uint8(Provenance.SYNTH),
                          np.uint8(Provenance.REAL1))
    if clock is not None:
        clock.add("compose", t0)
    return MixPair(image=image, label=label, reliability=reliability,
                   provenance=provenance), meta


def pair_digest(pair: MixPair) -> str:
    """Order-stable content hash used for cross-run parity checks."""
    h = hashlib.sha256()
    for arr in (pair.image, pair.label, pair.reliability, pair.provenance):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def write_pair(pair: MixPair, meta, out_dir):
    """PNG quartet for one pair; returns the manifest entry."""
    idx = meta["index"]
    names = {
        "image": f"pair_{idx:05d}.image.png",
        "label": f"pair_{idx:05d}.label.png",
        "reliability": f"pair_{idx:05d}.reliability.png",
        "provenance": f"pair_{idx:05d}.provenance.png",
    }
    write_image(pair.image, os.path.join(out_dir, names["image"]))
    write_mask(pair.label, os.path.join(out_dir, names["label"]))
    write_mask(pair.reliability, os.path.join(out_dir, names["reliability"]))
    write_provenance(pair.provenance, os.path.join(out_dir, names["provenance"]))
    entry = dict(meta)
    entry.update(names)
    return entry


_WORKER = {}


def _init_worker(synth_pool, real_pool, seed, config):
    _WORKER["synth"] = synth_pool
    _WORKER["real"] = real_pool
    _WORKER["seed"] = seed
    _WORKER["config"] = config


def _digest_chunk(indices):
    from .bench import StageClock
    clock = StageClock()
    out = []
    for i in indices:
        pair, _ = generate_pair(_WORKER["synth"], _WORKER["real"], i,
                                _WORKER["seed"], _WORKER["config"], clock=clock)
        out.append((i, pair_digest(pair)))
    return out, clock.stages


def generate_many(synth_pool, real_pool, count, seed, config: EngineConfig,
                  out_dir=None, workers=1, clock=None, collect=False,
                  digest=False):
    """Generate `count` pairs.

    out_dir writes the PNG quartets plus an append-only manifest.jsonl;
    collect returns the MixPair list; digest returns per-pair content
    hashes. Worker processes only ever compute digests (the cheap-to-ship
    result); file output and collection run in-process so ordering and
    manifest appends stay single-writer.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    results = {}
    digests = [None] * count

    if workers > 1 and digest and out_dir is None and not collect:
        chunk = max(1, count // (workers * 4))
        chunks = [range(lo, min(lo + chunk, count))
                  for lo in range(0, count, chunk)]
        with ProcessPoolExecutor(
                max_workers=workers, initializer=_init_worker,
                initargs=(synth_pool, real_pool, seed, config)) as pool:
            for part, stages in pool.map(_digest_chunk, chunks):
                for i, d in part:
                    digests[i] = d
                if clock is not None:
                    clock.merge(stages)
        return {"digests": digests}

    manifest_fh = None
    pairs = [] if collect else None
    try:
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            manifest_fh = open(os.path.join(out_dir, "manifest.jsonl"), "a",
                               encoding="utf-8")
        for i in range(count):
            pair, meta = generate_pair(synth_pool, real_pool, i, seed, config,
                                       clock=clock)
            if digest:
                digests[i] = pair_digest(pair)
            if out_dir is not None:
                entry = write_pair(pair, meta, out_dir)
                manifest_fh.write(json.dumps(entry, sort_keys=True) + "\n")
            if collect:
                pairs.append(pair)
    finally:
        if manifest_fh is not None:
            manifest_fh.close()
    if collect:
        results["pairs"] = pairs
    if digest:
        results["digests"] = digests
    return results

"""Throughput measurement for mixed-pair generation.

Times the exact generate_pair code path used everywhere else; the only
bench-specific behavior is that outputs are reduced to content digests
instead of being written, so measurement cannot perturb what is generated.
Source pools are procedurally built at the requested size before the clock
starts.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from .generation import EngineConfig, SynthRecord, RealRecord, generate_many
from .toydata import build_real_corpus, build_synth_corpus

STAGE_NAMES = ("grayscale", "kmeans", "rasterize", "compose")


class StageClock:
    """Accumulates per-stage wall times in milliseconds."""

    def __init__(self):
        self.stages = {}

    def start(self):
        return time.perf_counter()

    def add(self, name, t0):
        self.stages.setdefault(name, []).append(
            (time.perf_counter() - t0) * 1000.0)

    def merge(self, stages):
        for name, values in stages.items():
            self.stages.setdefault(name, []).extend(values)

    def percentiles(self):
        out = {}
        for name, values in self.stages.items():
            v = np.asarray(values)
            out[name] = {"p50_ms": float(np.percentile(v, 50)),
                         "p95_ms": float(np.percentile(v, 95)),
                         "calls": int(v.size)}
        return out

    def total_ms(self):
        return float(sum(sum(v) for v in self.stages.values()))


@dataclass
class BenchReport:
    count: int
    wall_seconds: float
    images_per_sec: float
    stage_percentiles: dict
    workers: int
    size: int
    digests: list

    def to_json(self) -> str:
        payload = {
            "count": self.count,
            "wall_seconds": self.wall_seconds,
            "images_per_sec": self.images_per_sec,
            "stages": self.stage_percentiles,
            "workers": self.workers,
            "size": self.size,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def summary_text(self) -> str:
        lines = [
            f"generated {self.count} pairs at {self.size}x{self.size} "
            f"with {self.workers} worker(s)",
            f"wall time {self.wall_seconds:.3f} s "
            f"({self.images_per_sec:.2f} images/sec)",
        ]
        for name in STAGE_NAMES:
            stats = self.stage_percentiles.get(name)
            if stats:
                lines.append(f"  {name:<10} p50 {stats['p50_ms']:7.3f} ms   "
                             f"p95 {stats['p95_ms']:7.3f} ms")
        return "\n".join(lines)


def build_bench_pools(seed, size, synth_count=6, real_count=6):
    """Procedural pools at the benchmark size, as generation-ready records."""
    synth = [SynthRecord(image=s.image, boxes=tuple(s.char_boxes),
                         path=f"bench-synth-{i}")
             for i, s in enumerate(build_synth_corpus(synth_count, seed,
                                                      size, size))]
    h = w = size
    real = [RealRecord(image=s.image,
                       label=np.zeros((h, w), dtype=np.uint8),
                       logits=None, path=f"bench-real-{i}")
            for i, s in enumerate(build_real_corpus(real_count, seed + 1,
                                                    size, size))]
    return synth, real


def bench_generate(count, size=640, workers=1, seed=0, config=None,
                   synth_pool=None, real_pool=None) -> BenchReport:
    """Generate `count` pairs in memory and report throughput.

    Pool construction happens outside the timed window. Digests of every
    pair are kept on the report so callers can assert bit-parity against
    an untimed run of the same seed.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if synth_pool is None or real_pool is None:
        synth_pool, real_pool = build_bench_pools(seed, size)
    config = config or EngineConfig()

    clock = StageClock()
    t0 = time.perf_counter()
    result = generate_many(synth_pool, real_pool, count, seed, config,
                           workers=workers, clock=clock, digest=True)
    wall = time.perf_counter() - t0
    return BenchReport(count=count, wall_seconds=wall,
                       images_per_sec=count / wall,
                       stage_percentiles=clock.percentiles(),
                       workers=workers, size=size,
                       digests=result["digests"])

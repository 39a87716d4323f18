"""Command-line interface.

Subcommands: extract-glyphs, mix, pretrain, eval-dca, bench. Exit codes:
0 success, 1 usage error, 2 runtime error. The GLYPHFORGE_LOG environment
variable sets the log level; every subcommand takes --seed and writes all
artifacts under its output directory only.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__
from .annotations import parse_annotations
from .bench import bench_generate
from .config import ConfigError, load_config
from .domain_eval import MIXERS, dca, train_domain_classifier
from .generation import EngineConfig, load_real_pool, load_synth_pool
from .glyphs import build_glyph_mask
from .imgio import read_image, resolve_path, write_mask
from .seeding import split_rng
from .training import RealSample, prepare_synth_samples, run_pretraining

log = logging.getLogger("glyphforge")


def _configure_logging():
    level = os.environ.get("GLYPHFORGE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glyphforge",
        description="glyph-level image mixing and desk-scale pre-training")
    parser.add_argument("--version", action="version",
                        version=f"glyphforge {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("extract-glyphs",
                       help="write glyph masks for annotated images")
    p.add_argument("--annotations", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--granularity", choices=("char", "word"), default="char")
    p.add_argument("--config")

    p = sub.add_parser("mix", help="generate mixed training pairs")
    p.add_argument("--synthetic", required=True,
                   help="annotation JSONL for the labeled domain")
    p.add_argument("--real", required=True, help="unlabeled image directory")
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("glyphmix", "mixup", "cutmix", "classmix"),
                   default="glyphmix")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--tim", dest="tim", action="store_true", default=True)
    p.add_argument("--no-tim", dest="tim", action="store_false")
    p.add_argument("--granularity", choices=("char", "word"), default="char")
    p.add_argument("--gamma", type=float, default=None,
                   help="entropy gating percent; needs .logits.npy sidecars")
    p.add_argument("--entropy-form", choices=("one_sided", "binary"),
                   default="one_sided")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--config")

    p = sub.add_parser("pretrain", help="run the student-teacher loop")
    p.add_argument("--config", help="TOML configuration file")
    p.add_argument("--synthetic", required=True)
    p.add_argument("--real", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="overrides run.seed from the config file")
    p.add_argument("--steps", type=int, default=None,
                   help="overrides train.total_steps")

    p = sub.add_parser("eval-dca", help="score mixers against a domain classifier")
    p.add_argument("--synthetic", required=True)
    p.add_argument("--real", required=True)
    p.add_argument("--mixers", default="glyphmix,classmix,cutmix,mixup")
    p.add_argument("--budget", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--soft", action="store_true",
                   help="average probabilities instead of hard decisions")
    p.add_argument("--out", default=None,
                   help="optional directory for dca.json")
    p.add_argument("--granularity", choices=("char", "word"), default="char")

    p = sub.add_parser("bench", help="measure generation throughput")
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--size", type=int, default=640)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true", help="JSON report only")
    return parser


def cmd_extract_glyphs(args) -> int:
    cfg = load_config(args.config) if args.config else load_config()
    result = parse_annotations(args.annotations)
    os.makedirs(args.out_dir, exist_ok=True)
    totals = {"images": 0, "boxes_processed": 0,
              "boxes_skipped_degenerate": 0, "records_without_granularity": 0}
    for idx, record in enumerate(result):
        boxes = (record.char_boxes if args.granularity == "char"
                 else record.word_boxes)
        if not boxes:
            totals["records_without_granularity"] += 1
            continue
        image = read_image(resolve_path(record.image_path, args.annotations))
        rng = split_rng(args.seed, idx)
        report = build_glyph_mask(image, boxes, rng, cfg.glyph)
        stem = os.path.splitext(os.path.basename(record.image_path))[0]
        write_mask(report.mask, os.path.join(args.out_dir, f"{stem}.mask.png"))
        totals["images"] += 1
        totals["boxes_processed"] += report.boxes_processed
        totals["boxes_skipped_degenerate"] += report.boxes_skipped_degenerate
    totals["parse_warnings"] = result.warnings
    with open(os.path.join(args.out_dir, "report.json"), "w",
              encoding="utf-8") as fh:
        json.dump(totals, fh, indent=2, sort_keys=True)
    print(json.dumps(totals, sort_keys=True))
    return 0


def cmd_mix(args) -> int:
    from .generation import generate_many

    cfg = load_config(args.config) if args.config else load_config()
    engine = EngineConfig(mode=args.mode, use_tim=args.tim,
                          granularity=args.granularity, gamma=args.gamma,
                          entropy_form=args.entropy_form, glyph=cfg.glyph,
                          tim_candidates=cfg.tim_candidates,
                          tim_side_fractions=cfg.tim_side_fractions)
    synth_pool = load_synth_pool(args.synthetic, args.granularity)
    real_pool = load_real_pool(args.real)
    generate_many(synth_pool, real_pool, args.count, args.seed, engine,
                  out_dir=args.out, workers=args.workers)
    log.info("wrote %d pairs to %s", args.count, args.out)
    return 0


def cmd_pretrain(args) -> int:
    overrides = {}
    if args.seed is not None:
        overrides["run.seed"] = args.seed
    if args.steps is not None:
        overrides["train.total_steps"] = args.steps
    cfg = load_config(args.config, overrides)

    synth_pool = load_synth_pool(args.synthetic, "char")
    records = [(rec.image, list(rec.boxes)) for rec in synth_pool]
    synth_samples = prepare_synth_samples(records, cfg.glyph, cfg.seed)
    real_pool = load_real_pool(args.real)
    real_samples = [RealSample(image=rec.image) for rec in real_pool]

    state, history = run_pretraining(cfg.train, synth_samples, real_samples,
                                     out_dir=args.out, aug=cfg.aug,
                                     log_every=100)
    final = history[-1] if history else {"loss": None}
    print(json.dumps({"steps": state.step, "final_loss": final["loss"],
                      "checkpoint": os.path.join(args.out, "checkpoint.bin")},
                     sort_keys=True))
    return 0


def cmd_eval_dca(args) -> int:
    synth_pool = load_synth_pool(args.synthetic, args.granularity)
    records = [(rec.image, list(rec.boxes)) for rec in synth_pool]
    synth_samples = prepare_synth_samples(records, seed=args.seed)
    real_images = [rec.image for rec in load_real_pool(args.real)]

    names = [m.strip() for m in args.mixers.split(",") if m.strip()]
    for name in names:
        if name not in MIXERS:
            raise ValueError(f"unknown mixer {name!r}; choices: "
                             + ", ".join(sorted(MIXERS)))

    clf = train_domain_classifier([s.image for s in synth_samples],
                                  real_images, split_rng(args.seed, 201))
    reports = []
    for name in names:
        rep = dca(clf, name, synth_samples, real_images, args.budget,
                  split_rng(args.seed, 202), soft=args.soft)
        reports.append(rep)

    width = max(len(r.mixer) for r in reports)
    print(f"domain classifier holdout accuracy: {clf.holdout_accuracy:.3f}")
    print(f"{'mixer':<{width}}  {'dca':>7}  {'pairs':>6}  {'skipped':>7}")
    for r in reports:
        print(f"{r.mixer:<{width}}  {r.dca:7.3f}  {r.pairs:6d}  {r.skipped:7d}")
    payload = [vars(r) for r in reports]
    print(json.dumps(payload, sort_keys=True))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "dca.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
    return 0


def cmd_bench(args) -> int:
    report = bench_generate(args.count, size=args.size, workers=args.workers,
                            seed=args.seed)
    if not args.json:
        print(report.summary_text())
    print(report.to_json())
    return 0


_DISPATCH = {
    "extract-glyphs": cmd_extract_glyphs,
    "mix": cmd_mix,
    "pretrain": cmd_pretrain,
    "eval-dca": cmd_eval_dca,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help/--version, 2 for usage problems
        return 0 if exc.code == 0 else 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _DISPATCH[args.command](args)
    except ConfigError as exc:
        log.error("%s", exc)
        print(f"glyphforge: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        log.debug("unhandled failure", exc_info=True)
        print(f"glyphforge: {exc}", file=sys.stderr)
        return 2


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()

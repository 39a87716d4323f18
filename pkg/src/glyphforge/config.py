"""TOML experiment configuration.

Flat sections mirror the parameter dataclasses one-to-one. Unknown sections
or keys are hard errors so a typo can never silently fall back to a
default. CLI flags are merged on top of the file (flags win).
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields

from .augment import AugmentationSpec
from .glyphs import GlyphParams
from .training import TrainConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass
class GlobalConfig:
    seed: int = 0
    workers: int = 1
    log_level: str = "WARNING"
    glyph: GlyphParams = field(default_factory=GlyphParams)
    aug: AugmentationSpec = field(default_factory=AugmentationSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    tim_candidates: int = 3
    tim_side_fractions: tuple = (0.25, 0.5)
    gamma_start: float = 80.0
    gamma_end: float = 20.0
    entropy_form: str = "one_sided"


_RUN_KEYS = {"seed", "workers", "log_level"}
_TIM_KEYS = {"num_candidates", "side_fraction_range"}
_GAMMA_KEYS = {"start", "end"}
_ENTROPY_KEYS = {"form"}
_TRAIN_KEYS = {f.name for f in fields(TrainConfig)} - {
    "gamma_start", "gamma_end", "entropy_form", "seed",
    "tim_candidates", "tim_side_fractions"}
_GLYPH_KEYS = {f.name for f in fields(GlyphParams)}
_AUG_KEYS = {f.name for f in fields(AugmentationSpec)}

_SECTIONS = {
    "run": _RUN_KEYS,
    "glyph": _GLYPH_KEYS,
    "tim": _TIM_KEYS,
    "gamma": _GAMMA_KEYS,
    "entropy": _ENTROPY_KEYS,
    "train": _TRAIN_KEYS,
    "aug": _AUG_KEYS,
}


def _check_keys(data):
    for section, content in data.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(content, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key in content:
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown config key {section}.{key}")


def _tuple2(value, where):
    if (not isinstance(value, (list, tuple)) or len(value) != 2):
        raise ConfigError(f"{where} must be a two-element array")
    return (float(value[0]), float(value[1]))


def load_config(path=None, overrides=None) -> GlobalConfig:
    """Read a TOML file (optional) and apply override key paths.

    overrides maps dotted paths like "gamma.start" or "run.seed" to values,
    validated against the same schema.
    """
    data = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}")
    _check_keys(data)

    if overrides:
        for dotted, value in overrides.items():
            if value is None:
                continue
            if "." not in dotted:
                raise ConfigError(f"override {dotted!r} must be section.key")
            section, key = dotted.split(".", 1)
            data.setdefault(section, {})[key] = value
        _check_keys(data)

    run = data.get("run", {})
    glyph_kwargs = dict(data.get("glyph", {}))
    aug_kwargs = dict(data.get("aug", {}))
    for k in ("scale_range", "brightness_range", "contrast_range",
              "blur_sigma_range"):
        if k in aug_kwargs:
            aug_kwargs[k] = _tuple2(aug_kwargs[k], f"aug.{k}")

    tim = data.get("tim", {})
    gamma = data.get("gamma", {})
    entropy = data.get("entropy", {})
    train_kwargs = dict(data.get("train", {}))
    if "base_lr" in train_kwargs and train_kwargs["base_lr"] is not None:
        train_kwargs["base_lr"] = float(train_kwargs["base_lr"])
    seed = int(run.get("seed", 0))
    side_fractions = _tuple2(tim.get("side_fraction_range", (0.25, 0.5)),
                             "tim.side_fraction_range")

    try:
        cfg = GlobalConfig(
            seed=seed,
            workers=int(run.get("workers", 1)),
            log_level=str(run.get("log_level", "WARNING")),
            glyph=GlyphParams(**glyph_kwargs),
            aug=AugmentationSpec(**aug_kwargs),
            train=TrainConfig(
                seed=seed,
                gamma_start=float(gamma.get("start", 80.0)),
                gamma_end=float(gamma.get("end", 20.0)),
                entropy_form=str(entropy.get("form", "one_sided")),
                tim_candidates=int(tim.get("num_candidates", 3)),
                tim_side_fractions=side_fractions,
                **train_kwargs,
            ),
            tim_candidates=int(tim.get("num_candidates", 3)),
            tim_side_fractions=side_fractions,
            gamma_start=float(gamma.get("start", 80.0)),
            gamma_end=float(gamma.get("end", 20.0)),
            entropy_form=str(entropy.get("form", "one_sided")),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}")
    if cfg.entropy_form not in ("one_sided", "binary"):
        raise ConfigError(f"entropy.form must be one_sided or binary, "
                          f"got {cfg.entropy_form!r}")
    return cfg

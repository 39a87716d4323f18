"""glyphforge: glyph-level image mixing and desk-scale semi-supervised
pre-training for pixel text detection.

The package turns labeled rendered text images and unlabeled photographs
into mixed training pairs (character-shaped copy-paste plus text-weighted
rectangle swaps), gates pseudo-labels by entropy, runs a student-teacher
training loop small enough for a laptop CPU, and measures how well each
mixing strategy closes the domain gap.
"""

__version__ = "0.1.0"

from .raster import (LOGIT_EPS, QuadBox, RasterError, clamp_logits,
                     rasterize_quad, to_grayscale, validate_image,
                     validate_mask)
from .seeding import make_rng, split_rng
from .imgio import (PROVENANCE_ENCODING, decode_provenance, encode_provenance,
                    read_image, read_mask, read_provenance, resolve_path,
                    write_image, write_mask, write_provenance)
from .annotations import (AbsentGranularityError, AnnotationError,
                          AnnotationSet, Granularity, ParseResult, label_map,
                          parse_annotations, select_boxes, write_annotations)
from .glyphs import (GlyphMaskReport, GlyphParams, build_glyph_mask,
                     eval_glyph_mask, glyph_mask_for_box, kmeans2,
                     whole_image_glyph_mask)
from .mixing import (MixPair, Provenance, TimParams, classmix, cutmix,
                     draw_cutmix_rect, draw_tim_candidates, gim, glyphmix,
                     masked_compose, mixup, score_candidates, tim,
                     tim_select_mask)
from .reliability import (ENTROPY_FORMS, GammaSchedule, entropy_map, gamma_at,
                          reliability_mask, threshold_for_gamma)
from .augment import (AugmentationSpec, GeomTransform, draw_geom_transform,
                      identity_transform, photometric_augment, strong_augment,
                      weak_augment)
from .training import (FEATURE_COUNT, PixelScorer, RealSample, SynthSample,
                       TrainConfig, TrainState, ema_update, evaluate_best_f,
                       evaluate_f_measure, feature_stack, init_state,
                       load_checkpoint, lr_at, masked_bce,
                       prepare_synth_samples, pretrain_step, pseudo_label,
                       run_pretraining, save_checkpoint, score,
                       score_features)
from .domain_eval import (MIXERS, ClassifierNotSeparableError, DcaReport,
                          DomainClassifier, dca, domain_features,
                          train_domain_classifier)
from .generation import (EngineConfig, RealRecord, SynthRecord, generate_many,
                         generate_pair, load_real_pool, load_synth_pool,
                         pair_digest, write_pair)
from .bench import BenchReport, StageClock, bench_generate, build_bench_pools
from .toydata import (RealScene, SynthScene, build_real_corpus,
                      build_synth_corpus, make_real_scene, make_synth_scene,
                      write_real_corpus, write_synth_corpus)
from .config import ConfigError, GlobalConfig, load_config

"""Object-level video captioning on synthetic scenes.

Pipeline: per-object temporal graphs over trajectories (local crop
features + color histograms, paired global frame features, normalized
boxes), a detail-enhancement classifier fused into the representation,
and a 2-layer GRU decoder with additive temporal attention, trained
jointly and scored with from-scratch caption metrics.
"""

from .corpus import (AnnotatedObject, Caption, Trajectory, Vocabulary,
                     build_vocabulary, encode, decode, load_dataset,
                     save_dataset, tokenize)
from .graph import (FeatureExtractor, TemporalGraph, build_graph,
                    color_histogram, normalize_box, sample_frames)
from .metrics import MetricReport, ScoredPair, bleu, cider_d, make_pair, \
    meteor_lite, rouge_l, score_pairs
from .synthgen import (ObjectProgram, SceneSpec, caption_from_program,
                       generate_corpus, generate_scene, render_crop)
from .trainer import (Checkpoint, TrainConfig, ablate, evaluate,
                      load_checkpoint, save_checkpoint, train)

__version__ = "0.1.0"

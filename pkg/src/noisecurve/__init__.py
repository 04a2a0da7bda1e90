"""Noise-robustness curves for speech-transcribed language tasks.

The package degrades a text corpus through a synthetic speech channel (or a
direct corruption model), repairs the transcripts with word-class cleaning
techniques, runs a downstream task on every variant, and reports how task
scores move against measured word error rate: degradation curves with
confidence bands, noise tolerance points, areas under the curve, and
cleaning effectiveness scores.
"""

from .alignment import (
    Alignment,
    WerCounts,
    align,
    set_wer,
    tokenize,
    transcript_counts,
    transcript_wer,
    utterance_counts,
)
from .analytics import (
    Curve,
    CurvePoint,
    area_under_curve,
    build_curve,
    cleaning_effectiveness,
    margin_of_error,
    noise_tolerance_point,
)
from .cleaning import TECHNIQUES, LexiconAnnotator, SidecarAnnotator, clean
from .config import ConfigError, RunConfig, load_config, parse_config
from .corpus import (
    Dataset,
    Transcript,
    Utterance,
    VariantKey,
    VariantStore,
    enumerate_variants,
    ingest_dataset,
)
from .runner import Runner, RunError, RunPaths
from .task_metrics import (
    classification_scores,
    qa_match,
    rouge_score,
    run_tournament,
)

__version__ = "0.1.0"

__all__ = [
    "Alignment",
    "Curve",
    "CurvePoint",
    "ConfigError",
    "Dataset",
    "LexiconAnnotator",
    "RunConfig",
    "RunError",
    "RunPaths",
    "Runner",
    "SidecarAnnotator",
    "TECHNIQUES",
    "Transcript",
    "Utterance",
    "VariantKey",
    "VariantStore",
    "WerCounts",
    "align",
    "area_under_curve",
    "build_curve",
    "clean",
    "classification_scores",
    "cleaning_effectiveness",
    "enumerate_variants",
    "ingest_dataset",
    "load_config",
    "margin_of_error",
    "noise_tolerance_point",
    "parse_config",
    "qa_match",
    "rouge_score",
    "run_tournament",
    "set_wer",
    "tokenize",
    "transcript_counts",
    "transcript_wer",
    "utterance_counts",
    "__version__",
]

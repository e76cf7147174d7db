"""Gloss-sequence recognition toolkit.

CTC loss and decoding over an extended gloss vocabulary, a small trainable
sequence network (temporal convolutions + BiLSTM + two classifiers) with
hand-rolled gradients, visual-alignment auxiliary losses, WER/WDR/WAR
scoring with three-sentence alignment, a deterministic synthetic corpus
generator, and a training/evaluation harness with a CLI.
"""

from .corpus import Corpus, CorpusConfig, generate_corpus, load_corpus, save_corpus
from .ctc import (
    BLANK_ID,
    ExtendedVocabulary,
    collapse_path,
    ctc_gradient,
    ctc_loss,
    ctc_loss_and_gradient,
    greedy_decode,
    min_path_length,
)
from .ctc_oracle import feasible_paths_oracle, oracle_path_probability
from .losses import (
    LossBreakdown,
    LossConfig,
    kl_divergence,
    softmax_with_temperature,
    total_loss,
    va_loss,
    ve_loss,
)
from .metrics import (
    AlignmentTriplet,
    EditAlignment,
    MetricsReport,
    TripletScores,
    WerResult,
    align_triplet,
    corpus_report,
    edit_align,
    render_triplet,
    wdr_war,
    wer,
)
from .model import (
    ModelConfig,
    RecognitionNetwork,
    load_checkpoint,
    save_checkpoint,
    variant_output_length,
    variant_receptive_field,
)
from .optim import Adam
from .training import RunConfig, TrainResult, evaluate, trace, train

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "AlignmentTriplet",
    "BLANK_ID",
    "Corpus",
    "CorpusConfig",
    "EditAlignment",
    "ExtendedVocabulary",
    "LossBreakdown",
    "LossConfig",
    "MetricsReport",
    "ModelConfig",
    "RecognitionNetwork",
    "RunConfig",
    "TrainResult",
    "TripletScores",
    "WerResult",
    "align_triplet",
    "collapse_path",
    "corpus_report",
    "ctc_gradient",
    "ctc_loss",
    "ctc_loss_and_gradient",
    "edit_align",
    "evaluate",
    "feasible_paths_oracle",
    "generate_corpus",
    "greedy_decode",
    "kl_divergence",
    "load_checkpoint",
    "load_corpus",
    "min_path_length",
    "oracle_path_probability",
    "render_triplet",
    "save_checkpoint",
    "save_corpus",
    "softmax_with_temperature",
    "total_loss",
    "trace",
    "train",
    "va_loss",
    "variant_output_length",
    "variant_receptive_field",
    "ve_loss",
    "wdr_war",
    "wer",
]

"""Stacked machine-generated-text detection and its synthetic-world analysis.

The package has two halves.  The detection half segments documents into
sentences, groups them, filters low-evidence groups, and rescores the
retained text with the same base detector; a filtered-retraining loop fits
the hashed logistic detector under that masking.  The analysis half samples
mixed human/machine texts from small categorical or gaussian worlds and
measures how likelihood-ratio detection degrades and recovers.
"""

from .corpus import CorpusFormatError, load_corpus, save_corpus
from .detectors import (
    Detector,
    ExternalDetector,
    NGramLMDetector,
    NGramLogRegModel,
    TrainConfig,
    bin_log_likelihood,
    grad_update,
    hashed_features,
    load_model,
    save_model,
    score_batch,
    sigmoid,
    tokenize,
)
from .errors import (
    AdapterProtocolError,
    DegenerateDataset,
    EmptyDocument,
    EmptyRetention,
    InvalidConfig,
    InvalidFilterSpec,
    MgtStackError,
    ModelFormatError,
    NumericalError,
    UnsupportedCombination,
)
from .evaluation import (
    EvalReport,
    SplitSpec,
    auroc,
    bootstrap_auroc_ci,
    consistent_sentence_proportion,
    evaluate_detector,
    evaluate_scores,
    inject_human_sentences,
    normalize_sentence,
    split_dataset,
    tpr_at_fpr,
)
from .retention import FilterConfig, RetentionMask, compute_mask, naive_mask, random_mask
from .segmentation import (
    Document,
    Span,
    SubsequenceSet,
    group_subsequences,
    group_text,
    load_abbreviations,
    reconstruct,
    split_sentences,
)
from .stacked import (
    EpochRecord,
    StackedDetector,
    StackedResult,
    TrainTrace,
    estimate_mask,
    stacked_infer,
    stacked_infer_detail,
    train_hard_em,
    train_plain,
    training_free_wrap,
)
from .synthdata import SynthSpec, human_sentence_pool, synth_corpus
from .theory import (
    FilterSpec,
    MixSpec,
    SentenceWorld,
    SimConfig,
    apply_theory_filter,
    categorical_world,
    filter_condition_ok,
    gaussian_world,
    likelihood_ratio_score,
    run_experiment,
    sample_text,
    sample_texts,
    tv_distance,
    write_rows_csv,
)

__version__ = "0.1.0"

__all__ = [
    "AdapterProtocolError",
    "CorpusFormatError",
    "DegenerateDataset",
    "Detector",
    "Document",
    "EmptyDocument",
    "EmptyRetention",
    "EpochRecord",
    "EvalReport",
    "ExternalDetector",
    "FilterConfig",
    "FilterSpec",
    "InvalidConfig",
    "InvalidFilterSpec",
    "MgtStackError",
    "MixSpec",
    "ModelFormatError",
    "NGramLMDetector",
    "NGramLogRegModel",
    "NumericalError",
    "RetentionMask",
    "SentenceWorld",
    "SimConfig",
    "Span",
    "SplitSpec",
    "StackedDetector",
    "StackedResult",
    "SubsequenceSet",
    "SynthSpec",
    "TrainConfig",
    "TrainTrace",
    "UnsupportedCombination",
    "apply_theory_filter",
    "auroc",
    "bin_log_likelihood",
    "bootstrap_auroc_ci",
    "categorical_world",
    "compute_mask",
    "consistent_sentence_proportion",
    "estimate_mask",
    "evaluate_detector",
    "evaluate_scores",
    "filter_condition_ok",
    "gaussian_world",
    "grad_update",
    "group_subsequences",
    "group_text",
    "hashed_features",
    "human_sentence_pool",
    "inject_human_sentences",
    "likelihood_ratio_score",
    "load_abbreviations",
    "load_corpus",
    "load_model",
    "naive_mask",
    "normalize_sentence",
    "random_mask",
    "reconstruct",
    "run_experiment",
    "sample_text",
    "sample_texts",
    "save_corpus",
    "save_model",
    "score_batch",
    "sigmoid",
    "split_dataset",
    "split_sentences",
    "stacked_infer",
    "stacked_infer_detail",
    "synth_corpus",
    "tokenize",
    "tpr_at_fpr",
    "train_hard_em",
    "train_plain",
    "training_free_wrap",
    "tv_distance",
    "write_rows_csv",
]

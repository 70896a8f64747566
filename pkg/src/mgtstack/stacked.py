"""Two-pass stacked inference and hard-EM training.

Inference runs the base detector twice over the same document: once per
sentence group to decide which groups carry no machine evidence, then once
over the concatenation of the retained groups.  The latent retention mask is
never read from labels, only from first-pass scores.

Training alternates a hard E-step (recompute masks for the current batch with
the current parameters) with a single gradient-ascent M-step on the masked
texts, masks held constant.  With tau = 0 nothing can be filtered and both
inference and training collapse exactly onto the plain detector: the second
pass receives the original document text, and the parameter trajectory is
bitwise identical to plain training under the same seed.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from typing import Sequence

from .detectors import (
    Detector,
    NGramLogRegModel,
    TrainConfig,
    bin_log_likelihood,
    grad_update,
)
from .errors import DegenerateDataset, InvalidConfig
from .retention import FilterConfig, RetentionMask, compute_mask
from .segmentation import Document, group_subsequences, group_texts, reconstruct


@dataclass(frozen=True)
class StackedResult:
    score: float
    n_groups: int
    n_filtered: int
    mask: RetentionMask


@dataclass(frozen=True)
class StackedDetector:
    """A base detector wrapped with group filtering.

    Satisfies the detector contract itself, so it can be evaluated, benched,
    or nested anywhere a plain detector goes.
    """

    base: Detector
    cfg: FilterConfig
    mode: str = "trained"  # "trained" | "training_free"

    def __post_init__(self) -> None:
        if self.mode not in ("trained", "training_free"):
            raise InvalidConfig(f"mode must be 'trained' or 'training_free', got {self.mode!r}")

    def score(self, text: str) -> float:
        return self.score_document(Document.from_text("", text)).score

    def score_document(self, doc: Document) -> StackedResult:
        return stacked_infer_detail(self, doc)


def training_free_wrap(base: Detector, cfg: FilterConfig | None = None) -> StackedDetector:
    """Wrap an already-built detector without any retraining."""
    return StackedDetector(base=base, cfg=cfg or FilterConfig(), mode="training_free")


def _mask_for(base: Detector, doc: Document, cfg: FilterConfig, subseq) -> RetentionMask:
    scores = [base.score(t) for t in group_texts(doc, subseq)]
    return compute_mask(scores, cfg)


def estimate_mask(base: Detector, doc: Document, cfg: FilterConfig) -> RetentionMask:
    """First pass: score each group and apply the constrained retention rule.

    Label-agnostic by construction; this is the E-step used verbatim by both
    inference and training.
    """
    return _mask_for(base, doc, cfg, group_subsequences(doc, cfg.k))


def stacked_infer_detail(sd: StackedDetector, doc: Document) -> StackedResult:
    subseq = group_subsequences(doc, sd.cfg.k)
    n_groups = len(subseq)
    if sd.cfg.budget(n_groups) == 0:
        # Nothing may be dropped, so skip the first pass entirely; the second
        # pass sees the untouched document and the whole wrapper reduces to
        # the base detector.
        mask = RetentionMask((1,) * n_groups)
        return StackedResult(sd.base.score(doc.text), n_groups, 0, mask)
    mask = _mask_for(sd.base, doc, sd.cfg, subseq)
    if all(mask):
        # A kept-everything mask means the retained text IS the document;
        # score the original so degeneration is exact for any base detector.
        retained = doc.text
    else:
        retained = reconstruct(doc, subseq, mask)
    return StackedResult(sd.base.score(retained), n_groups, mask.n_filtered, mask)


def stacked_infer(sd: StackedDetector, doc: Document) -> float:
    return stacked_infer_detail(sd, doc).score


# --------------------------------------------------------------------------
# hard-EM training


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    mean_q: float
    filtered_fraction: float
    wall_seconds: float


@dataclass(frozen=True)
class TrainTrace:
    epochs: tuple[EpochRecord, ...] = field(default_factory=tuple)


LabeledDoc = tuple[Document, int]


def _check_training_data(data: Sequence[LabeledDoc]) -> None:
    if not data:
        raise DegenerateDataset("training data is empty")
    labels = {y for _, y in data}
    if not labels <= {0, 1}:
        raise InvalidConfig(f"labels must be 0 or 1, got {sorted(labels - {0, 1})!r}")
    if labels != {0, 1}:
        raise DegenerateDataset("training data must contain both classes")


def _epoch_batches(
    n: int, batch_size: int, rng: random.Random
) -> list[list[int]]:
    order = list(range(n))
    rng.shuffle(order)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


def _masked_text(model: Detector, doc: Document, cfg: FilterConfig) -> tuple[str, int, int]:
    """Retained text plus (n_filtered, n_groups) under the current model."""
    subseq = group_subsequences(doc, cfg.k)
    if cfg.budget(len(subseq)) == 0:
        return doc.text, 0, len(subseq)
    mask = _mask_for(model, doc, cfg, subseq)
    if all(mask):
        return doc.text, 0, len(subseq)
    return reconstruct(doc, subseq, mask), mask.n_filtered, len(subseq)


def train_hard_em(
    base: NGramLogRegModel, data: Sequence[LabeledDoc], tc: TrainConfig
) -> tuple[NGramLogRegModel, TrainTrace]:
    """Alternating mask estimation and gradient steps on the masked texts.

    Per batch: masks are recomputed with the current parameters (E-step,
    labels unseen), then one ascent step is taken on the mean log-likelihood
    of the retained texts (M-step, masks constant).  Returns the final model
    and a per-epoch trace of the objective and realized filtering rate.
    """
    if not isinstance(base, NGramLogRegModel):
        raise InvalidConfig("hard-EM training requires a trainable n-gram logistic model")
    _check_training_data(data)
    cfg = tc.filter_config()
    rng = random.Random(tc.seed)
    model = base
    records: list[EpochRecord] = []
    for epoch in range(tc.epochs):
        started = time.perf_counter()
        q_sum = 0.0
        n_batches = 0
        filtered = 0
        groups_total = 0
        for batch_idx in _epoch_batches(len(data), tc.batch_size, rng):
            batch_docs = [data[i] for i in batch_idx]
            masked: list[tuple[str, int]] = []
            for doc, y in batch_docs:
                text, n_filt, n_groups = _masked_text(model, doc, cfg)
                masked.append((text, y))
                filtered += n_filt
                groups_total += n_groups
            q_sum += bin_log_likelihood(model, masked)
            n_batches += 1
            model = grad_update(model, masked, tc.lr)
        records.append(
            EpochRecord(
                epoch=epoch,
                mean_q=q_sum / n_batches,
                filtered_fraction=filtered / groups_total if groups_total else 0.0,
                wall_seconds=time.perf_counter() - started,
            )
        )
    return model, TrainTrace(tuple(records))


def train_plain(
    base: NGramLogRegModel, data: Sequence[LabeledDoc], tc: TrainConfig
) -> tuple[NGramLogRegModel, TrainTrace]:
    """The same loop with no filtering: every step sees the full text.

    Kept as an explicit function so the tau = 0 equivalence can be checked
    end to end (same seed, bitwise-identical parameter trajectory).
    """
    if not isinstance(base, NGramLogRegModel):
        raise InvalidConfig("training requires a trainable n-gram logistic model")
    _check_training_data(data)
    rng = random.Random(tc.seed)
    model = base
    records: list[EpochRecord] = []
    for epoch in range(tc.epochs):
        started = time.perf_counter()
        q_sum = 0.0
        n_batches = 0
        for batch_idx in _epoch_batches(len(data), tc.batch_size, rng):
            batch = [(data[i][0].text, data[i][1]) for i in batch_idx]
            q_sum += bin_log_likelihood(model, batch)
            n_batches += 1
            model = grad_update(model, batch, tc.lr)
        records.append(
            EpochRecord(
                epoch=epoch,
                mean_q=q_sum / n_batches,
                filtered_fraction=0.0,
                wall_seconds=time.perf_counter() - started,
            )
        )
    return model, TrainTrace(tuple(records))

"""Two-pass stacked inference and the filtered training loop."""

from __future__ import annotations

import numpy as np
import pytest

from mgtstack import (
    DegenerateDataset,
    Detector,
    Document,
    FilterConfig,
    InvalidConfig,
    NGramLMDetector,
    NGramLogRegModel,
    StackedDetector,
    SynthSpec,
    TrainConfig,
    bin_log_likelihood,
    estimate_mask,
    grad_update,
    stacked_infer,
    stacked_infer_detail,
    synth_corpus,
    train_hard_em,
    train_plain,
    training_free_wrap,
)

from conftest import MapDetector, make_doc

SENTS = ["Aa zz.", "Bb qq.", "Cc xx.", "Dd vv.", "Ee ww.", "Ff zz."]


def detector_for(doc: Document, scores: list[float], k: int = 1) -> MapDetector:
    """MapDetector scoring each k-group of ``doc`` by position."""
    from mgtstack.segmentation import group_subsequences, group_texts

    subseq = group_subsequences(doc, k)
    texts = group_texts(doc, subseq)
    assert len(texts) == len(scores)
    return MapDetector(dict(zip(texts, scores)), default=0.77)


# --------------------------------------------------------------------------
# inference


def test_two_pass_call_pattern_and_reconstruction():
    doc = make_doc(SENTS)
    scores = [0.9, 0.002, 0.8, 0.001, 0.7, 0.6]
    base = detector_for(doc, scores)
    sd = StackedDetector(base, FilterConfig(r_e=0.01, tau=0.5, k=1))
    res = stacked_infer_detail(sd, doc)
    # budget = floor(0.5 * 6) = 3; the two sub-floor scores drop.
    assert res.mask.bits == (1, 0, 1, 0, 1, 1)
    assert res.n_groups == 6
    assert res.n_filtered == 2
    # First pass scored each group, second pass the retained concatenation.
    assert base.calls[:6] == doc.sentence_texts()
    assert base.calls[6] == "Aa zz. Cc xx. Ee ww. Ff zz."
    assert len(base.calls) == res.n_groups + 1
    assert res.score == 0.77  # the default: second-pass text is new


def test_total_scored_chars_at_most_double():
    doc = make_doc(SENTS)
    base = detector_for(doc, [0.9, 0.002, 0.8, 0.001, 0.7, 0.6])
    sd = StackedDetector(base, FilterConfig(tau=0.5, k=1))
    stacked_infer_detail(sd, doc)
    assert sum(len(c) for c in base.calls) <= 2 * len(doc.text)


def test_tau_zero_skips_first_pass_entirely():
    doc = make_doc(SENTS)
    base = MapDetector({doc.text: 0.42})
    sd = StackedDetector(base, FilterConfig(tau=0.0, k=1))
    res = stacked_infer_detail(sd, doc)
    assert base.calls == [doc.text]
    assert res.score == 0.42
    assert res.n_filtered == 0
    assert res.mask.bits == (1,) * 6


def test_budget_zero_from_few_groups_skips_first_pass():
    # Three groups at tau = 0.25: floor(0.75) = 0, so no first pass either.
    doc = make_doc(SENTS[:3])
    base = MapDetector({doc.text: 0.9})
    sd = StackedDetector(base, FilterConfig(tau=0.25, k=1))
    assert stacked_infer(sd, doc) == 0.9
    assert base.calls == [doc.text]


def test_all_retained_second_pass_sees_original_text():
    # Odd inter-sentence whitespace survives when nothing is dropped, because
    # the second pass is handed the document text itself, not a re-join.
    text = "Aa zz.   Bb qq.  Cc xx. Dd vv."
    doc = Document.from_text("d", text)
    base = MapDetector(default=0.95)  # every group looks machine-ish
    sd = StackedDetector(base, FilterConfig(tau=0.5, k=1))
    res = stacked_infer_detail(sd, doc)
    assert res.n_filtered == 0
    assert base.calls[-1] == text


def test_single_sentence_document():
    doc = make_doc(["Only one here."])
    base = MapDetector({doc.text: 0.3})
    sd = StackedDetector(base, FilterConfig())
    res = stacked_infer_detail(sd, doc)
    assert res.n_groups == 1
    assert res.score == 0.3
    assert base.calls == [doc.text]


def test_grouping_respects_k():
    doc = make_doc(SENTS)  # 6 sentences, k = 3 -> 2 groups
    base = MapDetector(default=0.002)
    sd = StackedDetector(base, FilterConfig(r_e=0.01, tau=0.5, k=3))
    res = stacked_infer_detail(sd, doc)
    assert res.n_groups == 2
    # budget = 1, both groups sub-floor; the lower (score, index) pair drops.
    assert res.mask.bits == (0, 1)


def test_estimate_mask_ignores_labels():
    text = " ".join(SENTS)
    base = detector_for(Document.from_text("d", text), [0.9, 0.002, 0.8, 0.001, 0.7, 0.6])
    cfg = FilterConfig(tau=0.5, k=1)
    masks = {
        estimate_mask(base, Document.from_text("d", text, label=label), cfg).bits
        for label in (None, 0, 1)
    }
    assert len(masks) == 1


def test_stacked_detector_is_a_detector():
    sd = training_free_wrap(MapDetector())
    assert isinstance(sd, Detector)
    assert sd.mode == "training_free"
    assert sd.cfg == FilterConfig()


def test_stacked_score_on_raw_text():
    base = MapDetector(default=0.25)
    sd = StackedDetector(base, FilterConfig(tau=0.0))
    assert sd.score("Some text here. More text there.") == 0.25


def test_invalid_mode_rejected():
    with pytest.raises(InvalidConfig):
        StackedDetector(MapDetector(), FilterConfig(), mode="mystery")


# --------------------------------------------------------------------------
# training


def small_corpus(n_docs=40, seed=11):
    docs = synth_corpus(SynthSpec(n_docs=n_docs, seed=seed))
    return [(doc, doc.label) for doc in docs]


def test_tau_zero_training_is_bitwise_plain():
    data = small_corpus()
    base = NGramLogRegModel.new(hash_buckets=2**12)
    tc = TrainConfig(epochs=2, lr=0.2, batch_size=8, tau=0.0, seed=3)
    em_model, em_trace = train_hard_em(base, data, tc)
    pl_model, pl_trace = train_plain(base, data, tc)
    assert np.array_equal(em_model.weights, pl_model.weights)
    assert em_model.bias == pl_model.bias
    assert [r.mean_q for r in em_trace.epochs] == [r.mean_q for r in pl_trace.epochs]
    assert all(r.filtered_fraction == 0.0 for r in em_trace.epochs)


def test_zero_epochs_returns_base_unchanged():
    data = small_corpus()
    base = NGramLogRegModel.new(hash_buckets=2**12)
    model, trace = train_hard_em(base, data, TrainConfig(epochs=0))
    assert model is base
    assert trace.epochs == ()


def test_m_step_does_not_decrease_objective_under_frozen_masks():
    # One explicit EM step with the masks held fixed: the ascent property of
    # the inner update, checked directly on masked texts.
    data = small_corpus()
    base = NGramLogRegModel.new(hash_buckets=2**12)
    tc = TrainConfig(epochs=1, lr=0.2, batch_size=16, seed=0)
    model, _ = train_hard_em(base, data, tc)
    cfg = tc.filter_config()
    from mgtstack.stacked import _masked_text

    masked = [(_masked_text(model, doc, cfg)[0], y) for doc, y in data]
    before = bin_log_likelihood(model, masked)
    after = bin_log_likelihood(grad_update(model, masked, 1e-3), masked)
    assert after >= before


def test_training_separates_toy_classes():
    data = small_corpus(n_docs=60, seed=2)
    base = NGramLogRegModel.new(hash_buckets=2**12)
    tc = TrainConfig(epochs=10, lr=1.0, batch_size=16, seed=1)
    model, trace = train_hard_em(base, data, tc)
    correct = sum(1 for doc, y in data if (model.score(doc.text) >= 0.5) == bool(y))
    assert correct == len(data)
    assert len(trace.epochs) == 10
    assert [r.epoch for r in trace.epochs] == list(range(10))
    for rec in trace.epochs:
        assert rec.wall_seconds >= 0.0
        assert 0.0 <= rec.filtered_fraction <= tc.tau + 1e-9


def test_filtered_fraction_positive_when_filtering_engages():
    # A detector trained to near-certainty pushes human-looking groups under
    # r_e, so later epochs actually filter.
    data = small_corpus(n_docs=60, seed=2)
    base = NGramLogRegModel.new(hash_buckets=2**12)
    tc = TrainConfig(epochs=6, lr=1.0, batch_size=16, seed=1, r_e=0.2, tau=0.4, k=1)
    _, trace = train_hard_em(base, data, tc)
    assert trace.epochs[-1].filtered_fraction > 0.0


def test_training_requires_both_classes():
    docs = synth_corpus(SynthSpec(n_docs=20, seed=0))
    machine_only = [(d, 1) for d in docs]
    base = NGramLogRegModel.new(hash_buckets=256)
    with pytest.raises(DegenerateDataset):
        train_hard_em(base, machine_only, TrainConfig(epochs=1))
    with pytest.raises(DegenerateDataset):
        train_hard_em(base, [], TrainConfig(epochs=1))


def test_training_rejects_bad_labels():
    doc = make_doc(["Aa zz."])
    base = NGramLogRegModel.new(hash_buckets=256)
    with pytest.raises(InvalidConfig):
        train_hard_em(base, [(doc, 1), (doc, 2)], TrainConfig(epochs=1))


def test_training_rejects_untrainable_base():
    data = small_corpus(n_docs=10)
    lm = NGramLMDetector.fit([d for d, _ in data])
    with pytest.raises(InvalidConfig):
        train_hard_em(lm, data, TrainConfig(epochs=1))


def test_training_is_seed_deterministic():
    data = small_corpus()
    base = NGramLogRegModel.new(hash_buckets=2**12)
    tc = TrainConfig(epochs=2, lr=0.3, batch_size=8, seed=7)
    m1, _ = train_hard_em(base, data, tc)
    m2, _ = train_hard_em(base, data, tc)
    assert np.array_equal(m1.weights, m2.weights) and m1.bias == m2.bias

import json

import numpy as np
import pytest

from conftest import off, on
from seqlab.ctl import Posteriorgram
from seqlab.errors import ValidationError
from seqlab.labels import Event, StrongAnnotation, Vocabulary
from seqlab.metrics import (ClipResult, event_fscore, peak_cluster_score,
                            posteriors_to_events, segment_fscore,
                            timed_boundaries_to_annotation)


def ann(vocab, *triples):
    return StrongAnnotation(Event(vocab[c], a, b) for c, a, b in triples)


def one(vocab, pred, ref, dur=None):
    return [ClipResult(ann(vocab, *pred), ann(vocab, *ref), dur)]


# --------------------------------------------------------------------------
# segment F-score

def test_segment_exact_match(vocab2):
    rep = segment_fscore(one(vocab2, [(0, 0.0, 2.0)], [(0, 0.0, 2.0)], 2.0))
    s = rep.per_class["speech"]
    assert (s.tp, s.fp, s.fn) == (2, 0, 0)
    assert rep.macro_f1 == 1.0


def test_segment_disjoint(vocab2):
    rep = segment_fscore(one(vocab2, [(0, 1.0, 2.0)], [(0, 0.0, 1.0)], 2.0))
    s = rep.per_class["speech"]
    assert (s.tp, s.fp, s.fn) == (0, 1, 1)
    assert rep.macro_f1 == 0.0


def test_segment_any_overlap_rule(vocab2):
    rep = segment_fscore(one(vocab2, [(0, 0.9, 1.1)], [(0, 0.5, 1.5)], 2.0))
    s = rep.per_class["speech"]
    assert (s.tp, s.fp, s.fn) == (2, 0, 0)
    assert rep.macro_f1 == 1.0


def test_segment_shift_within_segments_invariant(vocab2):
    ref = [(0, 0.0, 3.0)]
    a = segment_fscore(one(vocab2, [(0, 0.2, 2.9)], ref, 3.0))
    b = segment_fscore(one(vocab2, [(0, 0.7, 2.1)], ref, 3.0))
    assert a.per_class["speech"] == b.per_class["speech"]


def test_segment_validation(vocab2):
    with pytest.raises(ValidationError):
        segment_fscore([], segment_s=0.0)


# --------------------------------------------------------------------------
# event F-score

def test_event_exact_match(vocab2):
    rep = event_fscore(one(vocab2, [(0, 1.0, 2.0)], [(0, 1.0, 2.0)]))
    assert rep.macro_f1 == 1.0


def test_event_collar_boundary(vocab2):
    inside = event_fscore(one(vocab2, [(0, 1.19, 2.0)], [(0, 1.0, 2.0)]))
    assert inside.per_class["speech"].tp == 1
    outside = event_fscore(one(vocab2, [(0, 1.21, 2.0)], [(0, 1.0, 2.0)]))
    s = outside.per_class["speech"]
    assert (s.tp, s.fp, s.fn) == (0, 1, 1)


def test_event_offset_tolerance_scales_with_duration(vocab2):
    # 4 s reference: offset tolerance max(0.2, 0.5 * 4) = 2 s
    rep = event_fscore(one(vocab2, [(0, 1.0, 3.2)], [(0, 1.0, 5.0)]))
    assert rep.per_class["speech"].tp == 1
    rep = event_fscore(one(vocab2, [(0, 1.0, 2.9)], [(0, 1.0, 5.0)]))
    assert rep.per_class["speech"].tp == 0


def test_event_one_to_one_matching(vocab2):
    rep = event_fscore(one(vocab2, [(0, 1.0, 2.0), (0, 1.05, 2.0)],
                           [(0, 1.0, 2.0)]))
    s = rep.per_class["speech"]
    assert (s.tp, s.fp, s.fn) == (1, 1, 0)


def test_event_validation(vocab2):
    with pytest.raises(ValidationError):
        event_fscore([], onset_collar_s=0.0)
    with pytest.raises(ValidationError):
        event_fscore([], offset_ratio=1.5)


def test_metrics_invariant_to_clip_order_and_class_relabel(vocab2):
    clips = [
        ClipResult(ann(vocab2, (0, 0.0, 1.0)), ann(vocab2, (0, 0.0, 1.2)), 2.0),
        ClipResult(ann(vocab2, (1, 0.5, 1.5)), ann(vocab2, (1, 0.4, 1.5)), 2.0),
        ClipResult(ann(vocab2, (0, 0.0, 0.6)), ann(vocab2, (1, 0.0, 0.6)), 2.0),
    ]
    swapped_vocab = Vocabulary(["car", "speech"])

    def swap(a):
        return StrongAnnotation(
            Event(swapped_vocab[1 - e.klass.id], e.onset_s, e.offset_s)
            for e in a.entries)

    relabeled = [ClipResult(swap(r.pred), swap(r.ref), r.duration_s)
                 for r in clips]
    for score in (segment_fscore, event_fscore):
        base = score(clips)
        assert score(list(reversed(clips))).macro_f1 == base.macro_f1
        assert score(relabeled).macro_f1 == pytest.approx(base.macro_f1)


# --------------------------------------------------------------------------
# peak clustering

def test_peak_cluster_examples(vocab2):
    assert peak_cluster_score(
        one(vocab2, [(0, 1.0, 2.0)], [(0, 0.5, 2.5)])) == 1.0
    triple = [(0, 0.6, 0.8), (0, 1.0, 1.2), (0, 1.4, 1.6)]
    assert peak_cluster_score(one(vocab2, triple, [(0, 0.5, 2.0)])) == 3.0
    assert peak_cluster_score(one(vocab2, [], [(0, 0.5, 2.0)])) == 0.0
    assert peak_cluster_score(one(vocab2, [(0, 1.0, 2.0)], [])) is None


# --------------------------------------------------------------------------
# decoding helpers

def test_posteriors_to_events_run_rule(vocab2):
    vocab1 = Vocabulary(["a"])
    post = Posteriorgram(np.array([[0.0], [1.0], [1.0], [0.0]]), 0.1)
    got = posteriors_to_events(post, 0.5, 1, vocab1)
    assert [(e.onset_s, e.offset_s) for e in got.entries] == [
        pytest.approx((0.1, 0.3))]
    low = Posteriorgram(np.full((4, 1), 0.2), 0.1)
    assert len(posteriors_to_events(low, 0.5, 1, vocab1)) == 0


def test_posteriors_to_events_median_filter_zero_pad(vocab2):
    vocab1 = Vocabulary(["a"])
    # windows with zero padding: {0,1,0} -> 0, {1,0,1} -> 1, {0,1,0} -> 0
    post = Posteriorgram(np.array([[1.0], [0.0], [1.0]]), 0.1)
    got = posteriors_to_events(post, 0.5, 3, vocab1)
    assert [(e.onset_s, e.offset_s) for e in got.entries] == [
        pytest.approx((0.1, 0.2))]
    # an isolated single-frame spike at the edge is removed
    spike = Posteriorgram(np.array([[1.0], [0.0], [0.0], [0.0]]), 0.1)
    assert len(posteriors_to_events(spike, 0.5, 3, vocab1)) == 0
    with pytest.raises(ValidationError):
        posteriors_to_events(post, 0.5, 2, vocab1)
    with pytest.raises(ValidationError):
        posteriors_to_events(post, 0.0, 1, vocab1)


def test_timed_boundaries_pairing(vocab2):
    sp, car = vocab2[0], vocab2[1]
    got = timed_boundaries_to_annotation(
        [(0.5, on(vocab2, 0)), (1.0, on(vocab2, 1)), (1.5, off(vocab2, 0)),
         (2.0, off(vocab2, 1))], clip_len_s=4.0, min_dur_s=0.1)
    assert [(e.klass, e.onset_s, e.offset_s) for e in got.entries] == [
        (sp, 0.5, 1.5), (car, 1.0, 2.0)]
    # stray offset ignored; unclosed onset closes at clip end
    got = timed_boundaries_to_annotation(
        [(0.2, off(vocab2, 0)), (1.0, on(vocab2, 0))], 4.0, 0.1)
    assert [(e.onset_s, e.offset_s) for e in got.entries] == [(1.0, 4.0)]
    # repeated onset implicitly closes the previous event
    got = timed_boundaries_to_annotation(
        [(1.0, on(vocab2, 0)), (2.0, on(vocab2, 0)), (3.0, off(vocab2, 0))],
        4.0, 0.1)
    assert [(e.onset_s, e.offset_s) for e in got.entries] == [
        (1.0, 2.0), (2.0, 3.0)]


def test_report_json_shape(vocab2):
    rep = segment_fscore(one(vocab2, [(0, 0.0, 1.0)], [(0, 0.0, 1.0)], 1.0))
    d = json.loads(rep.to_json())
    assert d["kind"] == "segment"
    assert d["classes"]["speech"]["f1"] == 1.0
    assert d["macro_f1"] == 1.0

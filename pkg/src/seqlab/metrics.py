"""Segment-based and event-based macro-averaged F-scores, plus a
peak-clustering diagnostic.

Conventions (documented so tests can be exact): segments of fixed length
with any-overlap activation; event matching is greedy in onset order with an
onset collar and an offset tolerance of max(collar, ratio * ref duration);
binarized posteriors are median-filtered with zero padding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import medfilt

from .ctl import Posteriorgram
from .errors import ValidationError
from .labels import Event, StrongAnnotation, Vocabulary

SEGMENT_S = 1.0
ONSET_COLLAR_S = 0.2
OFFSET_RATIO = 0.5


@dataclass(frozen=True)
class ClipResult:
    """Predicted and reference annotation for one clip."""

    pred: StrongAnnotation
    ref: StrongAnnotation
    duration_s: float | None = None

    def clip_end(self) -> float:
        ends = [e.offset_s for e in self.pred.entries]
        ends += [e.offset_s for e in self.ref.entries]
        if self.duration_s is not None:
            ends.append(self.duration_s)
        return max(ends, default=0.0)


@dataclass(frozen=True)
class ClassScore:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self):
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self):
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def f1(self):
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    @property
    def support(self):
        return self.tp + self.fp + self.fn


@dataclass(frozen=True)
class FScoreReport:
    kind: str
    per_class: dict[str, ClassScore]
    params: dict = field(default_factory=dict)

    @property
    def macro_f1(self) -> float:
        # unweighted mean over classes that appear at all (in ref or pred)
        scores = [s.f1 for s in self.per_class.values() if s.support > 0]
        return float(np.mean(scores)) if scores else 0.0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": self.params,
            "classes": {
                name: {"tp": s.tp, "fp": s.fp, "fn": s.fn,
                       "precision": s.precision, "recall": s.recall, "f1": s.f1}
                for name, s in self.per_class.items()
            },
            "macro_f1": self.macro_f1,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _vocab_of(results):
    classes = {}
    for r in results:
        for ann in (r.pred, r.ref):
            for e in ann.entries:
                classes[e.klass.id] = e.klass
    return [classes[i] for i in sorted(classes)]


def segment_fscore(results: list[ClipResult],
                   segment_s: float = SEGMENT_S) -> FScoreReport:
    """Cut each clip timeline into fixed segments; a class is active in a
    segment iff any of its events overlaps it.  TP/FP/FN accumulate over all
    segments and clips."""
    if segment_s <= 0:
        raise ValidationError("segment_s must be positive")
    counts: dict[str, list[int]] = {}

    def activity(ann, klass, n_seg):
        act = np.zeros(n_seg, dtype=bool)
        for e in ann.entries:
            if e.klass != klass:
                continue
            s0 = max(0, int(np.floor(e.onset_s / segment_s)))
            s1 = min(n_seg, int(np.ceil(e.offset_s / segment_s)))
            act[s0:s1] = True
        return act

    for klass in _vocab_of(results):
        tp = fp = fn = 0
        for r in results:
            n_seg = int(np.ceil(r.clip_end() / segment_s))
            p = activity(r.pred, klass, n_seg)
            g = activity(r.ref, klass, n_seg)
            tp += int((p & g).sum())
            fp += int((p & ~g).sum())
            fn += int((~p & g).sum())
        counts[klass.name] = [tp, fp, fn]
    return FScoreReport("segment",
                        {n: ClassScore(*c) for n, c in counts.items()},
                        {"segment_s": segment_s})


def event_fscore(results: list[ClipResult],
                 onset_collar_s: float = ONSET_COLLAR_S,
                 offset_ratio: float = OFFSET_RATIO) -> FScoreReport:
    """One-to-one greedy matching in onset order: a prediction matches a
    same-class reference iff |onset difference| <= collar and
    |offset difference| <= max(collar, offset_ratio * reference duration)."""
    if onset_collar_s <= 0:
        raise ValidationError("onset_collar_s must be positive")
    if not 0 < offset_ratio <= 1:
        raise ValidationError("offset_ratio must lie in (0, 1]")
    counts: dict[str, list[int]] = {}
    for klass in _vocab_of(results):
        tp = fp = fn = 0
        for r in results:
            preds = sorted((e for e in r.pred.entries if e.klass == klass),
                           key=lambda e: e.onset_s)
            refs = sorted((e for e in r.ref.entries if e.klass == klass),
                          key=lambda e: e.onset_s)
            used = [False] * len(refs)
            for p in preds:
                hit = False
                for i, g in enumerate(refs):
                    if used[i]:
                        continue
                    off_tol = max(onset_collar_s,
                                  offset_ratio * (g.offset_s - g.onset_s))
                    if (abs(p.onset_s - g.onset_s) <= onset_collar_s
                            and abs(p.offset_s - g.offset_s) <= off_tol):
                        used[i] = True
                        hit = True
                        break
                if hit:
                    tp += 1
                else:
                    fp += 1
            fn += used.count(False)
        counts[klass.name] = [tp, fp, fn]
    return FScoreReport("event",
                        {n: ClassScore(*c) for n, c in counts.items()},
                        {"onset_collar_s": onset_collar_s,
                         "offset_ratio": offset_ratio})


def peak_cluster_score(results: list[ClipResult]) -> float | None:
    """Mean number of same-class predicted events overlapping each reference
    event: 1.0 is clean detection, much greater than 1 indicates the
    clustered adjacent on/offset peaks that CTC training tends to produce.

    Returns None when no clip has any reference events.
    """
    per_ref = []
    for r in results:
        for g in r.ref.entries:
            n = sum(1 for p in r.pred.entries
                    if p.klass == g.klass
                    and p.onset_s < g.offset_s and p.offset_s > g.onset_s)
            per_ref.append(n)
    if not per_ref:
        return None
    return float(np.mean(per_ref))


def posteriors_to_events(post: Posteriorgram, threshold: float,
                         median_window: int,
                         vocab: Vocabulary) -> StrongAnnotation:
    """Binarize activities at the threshold, median-filter each class track
    (zero-padded), and turn contiguous runs into events on the frame grid."""
    if not 0 < threshold < 1:
        raise ValidationError("threshold must lie in (0, 1)")
    if median_window < 1 or median_window % 2 == 0:
        raise ValidationError("median_window must be odd and positive")
    hop = post.hop_s
    events = []
    for c in range(post.n_classes):
        act = (post.y[:, c] >= threshold).astype(np.float64)
        if median_window > 1:
            act = medfilt(act, kernel_size=median_window)
        t = 0
        T = len(act)
        while t < T:
            if act[t] > 0.5:
                t0 = t
                while t < T and act[t] > 0.5:
                    t += 1
                events.append(Event(vocab[c], t0 * hop, t * hop))
            else:
                t += 1
    events.sort(key=lambda e: (e.onset_s, e.klass.id))
    return StrongAnnotation(events)


def timed_boundaries_to_annotation(boundaries, clip_len_s: float,
                                   min_dur_s: float) -> StrongAnnotation:
    """Pair timed boundary symbols into events per class: an onset opens an
    event, the next offset of the same class closes it.  An unclosed onset
    is closed at the clip end; stray offsets are ignored.  Used to evaluate
    boundary decoders (CTC/CTL) with the event metrics."""
    open_: dict = {}
    events = []
    from .labels import BoundaryKind
    for t, sym in boundaries:
        if sym.kind is BoundaryKind.ONSET:
            if sym.klass in open_:
                # implicit close right before the repeated onset
                t0 = open_.pop(sym.klass)
                events.append(Event(sym.klass, t0, max(t, t0 + min_dur_s)))
            open_[sym.klass] = t
        else:
            if sym.klass in open_:
                t0 = open_.pop(sym.klass)
                events.append(Event(sym.klass, t0, max(t, t0 + min_dur_s)))
    for klass, t0 in open_.items():
        events.append(Event(klass, t0, max(clip_len_s, t0 + min_dur_s)))
    events.sort(key=lambda e: (e.onset_s, e.klass.id))
    return StrongAnnotation(events)

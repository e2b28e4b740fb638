"""Synthetic clip generator with controllable annotator timestamp noise.

Each class gets a fixed random template direction in feature space; frames
inside an event carry the scaled template plus white noise, all other frames
white noise only.  Annotator noise jitters each event boundary by a Gaussian
whose std is a fraction of the event duration, so long vague events get
vaguer boundaries.  Weak labels are derived from the clean annotation
(timestamp noise cannot touch them); sequential labels from the noisy one.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .labels import (Event, SequentialLabel, StrongAnnotation, Vocabulary,
                     WeakLabel, read_annotations, strong_to_sequential,
                     strong_to_weak, write_annotations)

TEMPLATE_STREAM = 0x7E3F


@dataclass
class GenSpec:
    n_classes: int = 4
    n_features: int = 16
    n_frames: int = 40
    hop_s: float = 0.2
    events_min: int = 1
    events_max: int = 3
    dur_min_s: float = 0.6
    dur_max_s: float = 2.5
    snr: float = 10.0
    noise_corr: float = 0.0
    am_depth: float = 0.0
    class_sim: float = 0.0
    distractors_max: int = 0
    distractor_sim: float = 0.6
    distractor_dur_s: float = 0.8
    jitter_frac: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if min(self.n_classes, self.n_features, self.n_frames,
               self.events_min, self.events_max) < 1:
            raise ValidationError("counts must be positive")
        if self.hop_s <= 0 or self.dur_min_s <= 0 or self.dur_max_s < self.dur_min_s:
            raise ValidationError("invalid durations")
        if self.jitter_frac < 0:
            raise ValidationError("jitter_frac must be >= 0")
        if not 0 <= self.noise_corr < 1:
            raise ValidationError("noise_corr must be in [0, 1)")
        if not 0 <= self.am_depth <= 1:
            raise ValidationError("am_depth must be in [0, 1]")
        if not 0 <= self.class_sim < 1:
            raise ValidationError("class_sim must be in [0, 1)")
        if self.distractors_max < 0 or self.distractor_dur_s <= 0:
            raise ValidationError("invalid distractor settings")
        if not 0 <= self.distractor_sim < 1:
            raise ValidationError("distractor_sim must be in [0, 1)")
        if self.dur_min_s > self.clip_len_s:
            raise ValidationError("minimum event duration exceeds the clip length")

    @property
    def clip_len_s(self) -> float:
        return self.n_frames * self.hop_s

    def vocabulary(self) -> Vocabulary:
        return Vocabulary([f"class{c}" for c in range(self.n_classes)])

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class SyntheticClip:
    clip_id: str
    features: np.ndarray          # (T, F)
    truth: StrongAnnotation       # clean
    noisy: StrongAnnotation       # jittered timestamps
    weak: WeakLabel               # from truth
    sequential: SequentialLabel   # from noisy
    hop_s: float
    n_classes: int


def class_templates(spec: GenSpec) -> np.ndarray:
    """(C, F) unit-norm template directions, fixed per vocabulary.

    class_sim > 0 mixes a shared direction into every template, making the
    classes acoustically confusable (pairwise cosine similarity about
    class_sim for independent random directions)."""
    rng = np.random.default_rng([spec.seed, TEMPLATE_STREAM])
    t = rng.normal(size=(spec.n_classes, spec.n_features))
    t /= np.linalg.norm(t, axis=1, keepdims=True)
    if spec.class_sim > 0:
        shared = rng.normal(size=spec.n_features)
        shared /= np.linalg.norm(shared)
        t = (np.sqrt(spec.class_sim) * shared
             + np.sqrt(1.0 - spec.class_sim) * t)
        t /= np.linalg.norm(t, axis=1, keepdims=True)
    return t


def jitter(ann: StrongAnnotation, sigma_frac: float, rng,
           clip_len_s: float, min_dur_s: float) -> StrongAnnotation:
    """Shift each boundary by Gaussian noise with std sigma_frac * duration.

    Boundaries are clamped so that events keep at least min_dur_s duration,
    stay inside [0, clip_len_s], and same-class events never overlap (each
    jittered boundary is confined to its side of the midpoint between
    neighboring same-class events).  Event count and classes are preserved.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    ann.validate()
    by_class: dict = {}
    for i, e in enumerate(ann.entries):
        by_class.setdefault(e.klass, []).append((i, e))
    out: list[Event | None] = [None] * len(ann.entries)
    for klass, items in by_class.items():
        items.sort(key=lambda ie: ie[1].onset_s)
        for j, (i, e) in enumerate(items):
            dur = e.offset_s - e.onset_s
            sigma = sigma_frac * dur
            min_dur = min(min_dur_s, dur)  # never ask for more than the original
            mid_prev = 0.0
            if j > 0:
                p = items[j - 1][1]
                mid_prev = 0.5 * (p.offset_s + e.onset_s)
            mid_next = clip_len_s
            if j + 1 < len(items):
                nxt = items[j + 1][1]
                mid_next = 0.5 * (e.offset_s + nxt.onset_s)
            on = e.onset_s + rng.normal() * sigma
            off = e.offset_s + rng.normal() * sigma
            on = float(np.clip(on, max(0.0, mid_prev), e.offset_s - min_dur))
            off = float(np.clip(off, on + min_dur, min(clip_len_s, mid_next)))
            out[i] = Event(klass, on, off)
    return StrongAnnotation(out).validate()


def _place_events(spec: GenSpec, rng) -> StrongAnnotation:
    """Non-overlapping events (across all classes, so the no-co-occurrence
    assumption of the sequential loss holds on clean data)."""
    n = int(rng.integers(spec.events_min, spec.events_max + 1))
    events: list[Event] = []
    for _ in range(n):
        for _attempt in range(50):
            dur = float(rng.uniform(spec.dur_min_s,
                                    min(spec.dur_max_s, spec.clip_len_s)))
            on = float(rng.uniform(0.0, spec.clip_len_s - dur))
            off = on + dur
            if all(off <= e.onset_s or on >= e.offset_s for e in events):
                c = int(rng.integers(spec.n_classes))
                events.append(Event(spec.vocabulary()[c], on, off))
                break
    events.sort(key=lambda e: (e.onset_s, e.klass.id))
    return StrongAnnotation(events)


def generate_clip(spec: GenSpec, index: int, templates=None) -> SyntheticClip:
    if templates is None:
        templates = class_templates(spec)
    rng = np.random.default_rng([spec.seed, index])
    truth = _place_events(spec, rng).validate()
    features = rng.normal(size=(spec.n_frames, spec.n_features))
    if spec.noise_corr > 0:
        # temporally correlated background (AR(1)), unit stationary variance,
        # like overlapping analysis windows on real audio
        rho = spec.noise_corr
        scale = np.sqrt(1.0 - rho * rho)
        for t in range(1, spec.n_frames):
            features[t] = rho * features[t - 1] + scale * features[t]
    # power SNR: template energy amp^2 vs unit-variance background
    amp = np.sqrt(spec.snr)
    for e in truth.entries:
        # amplitude modulation: sustained sounds fluctuate, dipping by up to
        # am_depth mid-event, at a random rate and phase per event
        am_freq = float(rng.uniform(0.5, 1.5))
        am_phase = float(rng.uniform(0.0, 2 * np.pi))
        t0 = int(np.floor(e.onset_s / spec.hop_s))
        t1 = int(np.ceil(e.offset_s / spec.hop_s))
        for t in range(max(0, t0), min(spec.n_frames, t1)):
            if t * spec.hop_s < e.offset_s and (t + 1) * spec.hop_s > e.onset_s:
                env = 1.0 - spec.am_depth * 0.5 * (
                    1.0 + np.sin(2 * np.pi * am_freq * t * spec.hop_s + am_phase))
                features[t] += amp * env * templates[e.klass.id]
    # distractors: short unannotated transients that partly resemble a random
    # target class, the kind of non-target sound that causes false alarms
    if spec.distractors_max > 0:
        for _ in range(int(rng.integers(0, spec.distractors_max + 1))):
            c = int(rng.integers(spec.n_classes))
            other = rng.normal(size=spec.n_features)
            other /= np.linalg.norm(other)
            d = (np.sqrt(spec.distractor_sim) * templates[c]
                 + np.sqrt(1.0 - spec.distractor_sim) * other)
            d /= np.linalg.norm(d)
            dur_f = max(1, int(round(spec.distractor_dur_s / spec.hop_s)))
            start = int(rng.integers(0, max(1, spec.n_frames - dur_f)))
            features[start:start + dur_f] += amp * d
    noisy = jitter(truth, spec.jitter_frac, rng, spec.clip_len_s, spec.hop_s)
    return SyntheticClip(
        clip_id=f"clip{index:05d}",
        features=features,
        truth=truth,
        noisy=noisy,
        weak=strong_to_weak(truth),
        sequential=strong_to_sequential(noisy),
        hop_s=spec.hop_s,
        n_classes=spec.n_classes,
    )


def generate(spec: GenSpec, n_clips: int, start: int = 0) -> list[SyntheticClip]:
    """Clips start..start+n_clips-1; disjoint ranges of the same spec share
    class templates but are otherwise independent, which is how train/eval
    splits are made."""
    templates = class_templates(spec)
    return [generate_clip(spec, i, templates) for i in range(start, start + n_clips)]


# --------------------------------------------------------------------------
# dataset persistence: per-clip flat binary features + manifest + TSVs

def save_dataset(dirpath, spec: GenSpec, clips: list[SyntheticClip]):
    os.makedirs(dirpath, exist_ok=True)
    vocab = spec.vocabulary()
    vocab.to_json(os.path.join(dirpath, "vocab.json"))
    manifest = {
        "spec": spec.to_dict(),
        "clips": [{"id": c.clip_id, "file": c.clip_id + ".bin",
                   "n_frames": int(c.features.shape[0]),
                   "n_features": int(c.features.shape[1])}
                  for c in clips],
    }
    with open(os.path.join(dirpath, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    for c in clips:
        c.features.astype(np.float64).tofile(os.path.join(dirpath, c.clip_id + ".bin"))
    write_annotations(os.path.join(dirpath, "clean.tsv"),
                      {c.clip_id: c.truth for c in clips})
    write_annotations(os.path.join(dirpath, "noisy.tsv"),
                      {c.clip_id: c.noisy for c in clips})


def load_dataset(dirpath) -> tuple[GenSpec, list[SyntheticClip]]:
    with open(os.path.join(dirpath, "manifest.json"), encoding="utf-8") as f:
        manifest = json.load(f)
    spec = GenSpec.from_dict(manifest["spec"])
    vocab = Vocabulary.from_json(os.path.join(dirpath, "vocab.json"))
    clean = read_annotations(os.path.join(dirpath, "clean.tsv"), vocab)
    noisy = read_annotations(os.path.join(dirpath, "noisy.tsv"), vocab)
    clips = []
    for entry in manifest["clips"]:
        feats = np.fromfile(os.path.join(dirpath, entry["file"]), dtype=np.float64)
        feats = feats.reshape(entry["n_frames"], entry["n_features"])
        truth = clean.get(entry["id"], StrongAnnotation([]))
        noise = noisy.get(entry["id"], StrongAnnotation([]))
        clips.append(SyntheticClip(
            clip_id=entry["id"],
            features=feats,
            truth=truth,
            noisy=noise,
            weak=strong_to_weak(truth),
            sequential=strong_to_sequential(noise),
            hop_s=spec.hop_s,
            n_classes=spec.n_classes,
        ))
    return spec, clips

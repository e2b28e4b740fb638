"""Supervised training: framewise, clip-level, and sequential losses combined
with configurable weights (default strong : weak : sequential = 4 : 2 : 1),
SGD with momentum, deterministic given the seed.
"""

from __future__ import annotations

import dataclasses
import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import ctc, ctl, metrics
from .common import LossResult
from .ctl import Posteriorgram
from .errors import InfeasibleTargetError, ValidationError
from .labels import (FrameActivity, SequentialLabel, Vocabulary, WeakLabel,
                     rasterize)
from .model import ToyModel

CLIP_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    w_strong: float = 4.0
    w_weak: float = 2.0
    w_seq: float = 1.0

    def __post_init__(self):
        if min(self.w_strong, self.w_weak, self.w_seq) < 0:
            raise ValidationError("loss weights must be non-negative")
        if self.w_strong == self.w_weak == self.w_seq == 0:
            raise ValidationError("at least one loss weight must be positive")


@dataclass
class TrainConfig:
    epochs: int = 15
    batch_size: int = 8
    lr: float = 0.01
    momentum: float = 0.9
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    seq_kind: str = "ctl"  # "ctl" or "ctc"
    grad_clip: float = 5.0  # global-norm clip; sequence losses can spike
    hidden: int = 32
    window: int = 2
    decode_threshold: float = 0.4
    median_window: int = 1

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValidationError("epochs and batch_size must be positive")
        if self.seq_kind not in ("ctl", "ctc"):
            raise ValidationError(f"unknown seq_kind {self.seq_kind!r}")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "weights" in d and isinstance(d["weights"], dict):
            d["weights"] = LossWeights(**d["weights"])
        return cls(**d)


# --------------------------------------------------------------------------
# losses

def strong_loss(post: Posteriorgram, target: FrameActivity) -> LossResult:
    """Mean binary cross-entropy over all T x C cells."""
    y = np.clip(post.y, CLIP_EPS, 1.0 - CLIP_EPS)
    t = np.asarray(target.grid, dtype=np.float64)
    if t.shape != y.shape:
        raise ValidationError(f"shape mismatch: activities {y.shape}, "
                              f"target {t.shape}")
    n = y.size
    loss = float(-(t * np.log(y) + (1 - t) * np.log1p(-y)).sum() / n)
    grad = (-t / y + (1 - t) / (1 - y)) / n
    return LossResult(loss, grad)


def weak_loss(post: Posteriorgram, target: WeakLabel) -> LossResult:
    """Clip-level probability per class is the max over frames; BCE against
    the membership indicator.  The gradient flows to the (first) argmax
    frame only."""
    C = post.n_classes
    pooled = post.y.max(axis=0)
    arg = post.y.argmax(axis=0)
    p = np.clip(pooled, CLIP_EPS, 1.0 - CLIP_EPS)
    member = np.zeros(C)
    for k in target.classes:
        if k.id >= C:
            raise ValidationError(f"class {k.name} outside the {C}-class model")
        member[k.id] = 1.0
    loss = float(-(member * np.log(p) + (1 - member) * np.log1p(-p)).sum() / C)
    grad = np.zeros_like(post.y)
    gpool = (-member / p + (1 - member) / (1 - p)) / C
    grad[arg, np.arange(C)] = gpool
    return LossResult(loss, grad)


@dataclass(frozen=True)
class CombinedLoss:
    loss: float
    grad_y: np.ndarray
    grad_ctc: np.ndarray | None
    terms: dict[str, float]


def combined_loss(post: Posteriorgram,
                  frame_target: FrameActivity | None,
                  weak_target: WeakLabel | None,
                  seq_target: SequentialLabel | None,
                  weights: LossWeights,
                  seq_kind: str = "ctl",
                  ctc_post: ctc.CtcPosteriorgram | None = None) -> CombinedLoss:
    """Weighted sum of the individual losses; absent targets contribute
    zero.  The sequential term uses CTL on the activity head or CTC on the
    softmax head (`ctc_post` required for the latter).  An infeasible
    sequential target propagates so callers can skip the clip."""
    if frame_target is None and weak_target is None and seq_target is None:
        raise ValidationError("at least one target must be present")
    total = 0.0
    grad_y = np.zeros_like(post.y)
    grad_ctc = None
    terms: dict[str, float] = {}
    if frame_target is not None and weights.w_strong:
        r = strong_loss(post, frame_target)
        total += weights.w_strong * r.loss
        grad_y += weights.w_strong * r.grad
        terms["strong"] = r.loss
    if weak_target is not None and weights.w_weak:
        r = weak_loss(post, weak_target)
        total += weights.w_weak * r.loss
        grad_y += weights.w_weak * r.grad
        terms["weak"] = r.loss
    if seq_target is not None and weights.w_seq:
        if seq_kind == "ctl":
            r = ctl.ctl_loss(post, seq_target)
            total += weights.w_seq * r.loss
            grad_y += weights.w_seq * r.grad
        else:
            if ctc_post is None:
                raise ValidationError("seq_kind 'ctc' needs the softmax head output")
            r = ctc.ctc_loss(ctc_post, seq_target)
            total += weights.w_seq * r.loss
            grad_ctc = weights.w_seq * r.grad
        terms["seq"] = r.loss
    return CombinedLoss(total, grad_y, grad_ctc, terms)


# --------------------------------------------------------------------------
# training loop

class SgdMomentum:
    def __init__(self, lr: float, momentum: float, size: int):
        self.lr = lr
        self.momentum = momentum
        self.v = np.zeros(size)

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.v = self.momentum * self.v - self.lr * grad
        return params + self.v


def clip_grad(grad: np.ndarray, max_norm: float) -> np.ndarray:
    if max_norm <= 0:
        return grad
    norm = float(np.linalg.norm(grad))
    if norm > max_norm:
        return grad * (max_norm / norm)
    return grad


def clip_targets(clip, config: TrainConfig):
    """(frame, weak, sequential) targets for one synthetic clip under the
    configured loss weights; frame targets come from the noisy annotation."""
    w = config.weights
    T = clip.features.shape[0]
    C = clip.n_classes
    frame_t = None
    if w.w_strong:
        frame_t, _ = rasterize(clip.noisy, T, clip.hop_s, C)
    weak_t = clip.weak if w.w_weak else None
    seq_t = clip.sequential if w.w_seq else None
    return frame_t, weak_t, seq_t


def clip_loss(model: ToyModel, clip, config: TrainConfig) -> tuple[CombinedLoss, dict]:
    cache = model.forward(clip.features)
    post = Posteriorgram(cache.y, clip.hop_s)
    frame_t, weak_t, seq_t = clip_targets(clip, config)
    ctc_post = None
    if seq_t is not None and config.seq_kind == "ctc":
        ctc_post = ctc.CtcPosteriorgram(cache.q)
    combined = combined_loss(post, frame_t, weak_t, seq_t, config.weights,
                             config.seq_kind, ctc_post)
    grads = model.backward(cache, combined.grad_y, combined.grad_ctc)
    return combined, grads


def evaluate_model(model: ToyModel, clips, config: TrainConfig,
                   vocab: Vocabulary) -> dict:
    """Decode activities to events and score against the clean truth."""
    results = []
    for clip in clips:
        cache = model.forward(clip.features)
        post = Posteriorgram(cache.y, clip.hop_s)
        pred = metrics.posteriors_to_events(post, config.decode_threshold,
                                            config.median_window, vocab)
        dur = clip.features.shape[0] * clip.hop_s
        results.append(metrics.ClipResult(pred, clip.truth, dur))
    seg = metrics.segment_fscore(results)
    ev = metrics.event_fscore(results)
    return {"segment_f1": seg.macro_f1, "event_f1": ev.macro_f1}


def train(model: ToyModel, dataset, config: TrainConfig,
          vocab: Vocabulary, eval_set=None) -> tuple[ToyModel, list[dict]]:
    """SGD-with-momentum training on the combined loss.

    Deterministic given the seed.  Clips whose sequential target is
    infeasible (or has zero probability) are skipped and counted.  A NaN
    loss aborts with the clip and loss term named.

    Returns the trained model and the per-epoch log (JSON-ready dicts).
    """
    if not dataset:
        raise ValidationError("dataset must be nonempty")
    rng = np.random.default_rng(config.seed)
    opt = SgdMomentum(config.lr, config.momentum, model.get_flat().size)
    log = []
    n = len(dataset)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_used = 0
        skipped = 0
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            gsum = np.zeros_like(opt.v)
            m = 0
            for i in batch:
                clip = dataset[i]
                try:
                    combined, grads = clip_loss(model, clip, config)
                except InfeasibleTargetError:
                    skipped += 1
                    continue
                for term, value in combined.terms.items():
                    if np.isnan(value):
                        raise RuntimeError(
                            f"NaN {term} loss on clip {clip.clip_id!r} "
                            f"at epoch {epoch}")
                if not np.isfinite(combined.loss):
                    # zero-probability sequential target; treat like infeasible
                    skipped += 1
                    continue
                gsum += model.flatten_grads(grads)
                epoch_loss += combined.loss
                m += 1
            if m == 0:
                continue
            model.set_flat(opt.step(model.get_flat(),
                                    clip_grad(gsum / m, config.grad_clip)))
            n_used += m
        record = {
            "epoch": epoch,
            "train_loss": epoch_loss / max(n_used, 1),
            "clips_used": n_used,
            "clips_skipped": skipped,
        }
        if eval_set:
            record.update(evaluate_model(model, eval_set, config, vocab))
        log.append(record)
    return model, log


def write_jsonl(path, records):
    """Atomic JSON-lines dump with stable key order (byte-reproducible)."""
    text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def read_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]

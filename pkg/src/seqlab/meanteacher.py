"""Scheduled mean-teacher semi-supervised training.

The teacher is an exponential moving average of the student.  Consistency
between student and noise-perturbed teacher predictions uses MSE for weak
(always) and strong (second phase) outputs, and the CTL loss against the
teacher's decoded boundary sequence in the first phase.  The supervised
loss follows the same schedule: sequential targets stand in for the strong
term until the schedule half-point, then swap back.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import ctl
from .ctl import Posteriorgram
from .errors import InfeasibleTargetError, ValidationError
from .labels import Vocabulary, rasterize
from .model import ToyModel
from .trainer import (LossWeights, SgdMomentum, TrainConfig, clip_grad,
                      combined_loss, evaluate_model)

PHASE_SEQUENTIAL = "sequential"
PHASE_STRONG = "strong"


@dataclass
class MeanTeacherConfig(TrainConfig):
    ema_decay: float = 0.999
    noise_sigma: float = 0.05
    rampup_steps: int = 100
    consistency_max: float = 1.0
    schedule_half: int | None = None  # None: half of the total step count
    mt_decode_threshold: float = 0.3
    keep_seq_supervised: bool = True

    def __post_init__(self):
        super().__post_init__()
        if not 0 <= self.ema_decay < 1:
            raise ValidationError("ema_decay must lie in [0, 1)")
        if self.rampup_steps < 1 or self.consistency_max < 0:
            raise ValidationError("rampup_steps >= 1 and consistency_max >= 0 required")

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "weights" in d and isinstance(d["weights"], dict):
            d["weights"] = LossWeights(**d["weights"])
        return cls(**d)


def ema_update(teacher: np.ndarray, student: np.ndarray,
               decay: float) -> np.ndarray:
    """teacher <- decay * teacher + (1 - decay) * student, elementwise."""
    teacher = np.asarray(teacher, dtype=np.float64)
    student = np.asarray(student, dtype=np.float64)
    if teacher.shape != student.shape:
        raise ValidationError(
            f"shape mismatch: teacher {teacher.shape}, student {student.shape}")
    return decay * teacher + (1.0 - decay) * student


def rampup_weight(step: int, rampup_steps: int,
                  max_weight: float = 1.0) -> float:
    """Sigmoid-shaped ramp-up: max_weight * exp(-5 (1 - step/rampup)^2) for
    step < rampup_steps, max_weight afterwards."""
    if step < 0:
        raise ValidationError("step must be >= 0")
    frac = min(1.0, step / rampup_steps)
    return max_weight * math.exp(-5.0 * (1.0 - frac) ** 2)


@dataclass(frozen=True)
class ConsistencyResult:
    loss: float
    grad_y: np.ndarray
    seq_skipped: bool


def consistency_losses(student_y: np.ndarray, teacher_y: np.ndarray,
                       phase: str, hop_s: float, vocab: Vocabulary,
                       decode_threshold: float = 0.3) -> ConsistencyResult:
    """Consistency cost for one clip and its gradient w.r.t. the student
    activities.

    Weak consistency (MSE of max-pooled clip probabilities) is always on.
    The strong phase adds framewise MSE; the sequential phase instead adds
    the CTL loss of the student against the sequence decoded from the
    teacher (skipped when the decoded sequence is empty or unreachable).
    """
    T, C = student_y.shape
    grad = np.zeros_like(student_y)

    pooled_s = student_y.max(axis=0)
    arg = student_y.argmax(axis=0)
    pooled_t = teacher_y.max(axis=0)
    loss = float(((pooled_s - pooled_t) ** 2).mean())
    grad[arg, np.arange(C)] += 2.0 * (pooled_s - pooled_t) / C

    seq_skipped = False
    if phase == PHASE_STRONG:
        diff = student_y - teacher_y
        loss += float((diff ** 2).mean())
        grad += 2.0 * diff / diff.size
    elif phase == PHASE_SEQUENTIAL:
        teacher_post = Posteriorgram(np.clip(teacher_y, 0.0, 1.0), hop_s)
        target = ctl.ctl_decode(teacher_post, decode_threshold, vocab)
        if len(target) == 0:
            seq_skipped = True
        else:
            try:
                r = ctl.ctl_loss(Posteriorgram(np.clip(student_y, 0.0, 1.0),
                                               hop_s), target)
            except InfeasibleTargetError:
                seq_skipped = True
            else:
                if np.isfinite(r.loss):
                    loss += r.loss
                    grad += r.grad
                else:
                    seq_skipped = True
    else:
        raise ValidationError(f"unknown phase {phase!r}")
    return ConsistencyResult(loss, grad, seq_skipped)


def _supervised_clip(model: ToyModel, clip, config: MeanTeacherConfig,
                     phase: str):
    """Supervised loss with the phase schedule applied: the sequential term
    takes the strong term's slot (and weight) in the first phase."""
    cache = model.forward(clip.features)
    post = Posteriorgram(cache.y, clip.hop_s)
    w = config.weights
    T, C = clip.features.shape[0], clip.n_classes
    if phase == PHASE_SEQUENTIAL:
        weights = LossWeights(0.0, w.w_weak, w.w_strong)
        frame_t = None
        seq_t = clip.sequential
    else:
        keep = config.keep_seq_supervised and w.w_seq > 0
        weights = LossWeights(w.w_strong, w.w_weak, w.w_seq if keep else 0.0)
        frame_t, _ = rasterize(clip.noisy, T, clip.hop_s, C)
        seq_t = clip.sequential if keep else None
    weak_t = clip.weak if w.w_weak else None
    combined = combined_loss(post, frame_t, weak_t, seq_t, weights, "ctl")
    return cache, combined


def train_semisupervised(model: ToyModel, labeled, unlabeled,
                         config: MeanTeacherConfig, vocab: Vocabulary,
                         eval_set=None) -> tuple[ToyModel, list[dict]]:
    """Mean-teacher training; returns the final TEACHER model and the log.

    The log holds one record per step (phase, supervised and consistency
    losses, ramp-up weight, skipped-clip counts) and one per epoch with the
    teacher's evaluation scores.  Deterministic given the seed.
    """
    if not labeled:
        raise ValidationError("labeled set must be nonempty")
    rng = np.random.default_rng(config.seed)
    teacher = model.clone()
    opt = SgdMomentum(config.lr, config.momentum, model.get_flat().size)

    # mixed pool: labeled clips first, then unlabeled; epochs walk a fresh
    # permutation of the pool so that with no unlabeled data and zero
    # consistency weight the loop degenerates to trainer.train exactly
    pool = list(labeled) + list(unlabeled)
    n_labeled = len(labeled)
    n_total = len(pool)
    steps_per_epoch = max(1, math.ceil(n_total / config.batch_size))
    total_steps = config.epochs * steps_per_epoch
    half = config.schedule_half
    if half is None:
        half = total_steps // 2

    log = []
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(n_total)
        for start in range(0, n_total, config.batch_size):
            phase = PHASE_SEQUENTIAL if step < half else PHASE_STRONG
            batch = order[start:start + config.batch_size]
            mixed = [pool[i] for i in batch]
            lab_clips = [pool[i] for i in batch if i < n_labeled]

            gsum = np.zeros_like(opt.v)
            sup_loss = 0.0
            sup_used = 0
            sup_skipped = 0
            for clip in lab_clips:
                try:
                    cache, combined = _supervised_clip(model, clip, config, phase)
                except InfeasibleTargetError:
                    sup_skipped += 1
                    continue
                for term, value in combined.terms.items():
                    if np.isnan(value):
                        raise RuntimeError(
                            f"NaN {term} loss on clip {clip.clip_id!r} at step {step}")
                if not np.isfinite(combined.loss):
                    sup_skipped += 1
                    continue
                grads = model.backward(cache, combined.grad_y)
                gsum += model.flatten_grads(grads)
                sup_loss += combined.loss
                sup_used += 1
            if sup_used:
                gsum /= sup_used

            cons_w = (rampup_weight(step, config.rampup_steps,
                                    config.consistency_max)
                      if config.consistency_max > 0 else 0.0)
            cons_loss = 0.0
            seq_skipped = 0
            if cons_w > 0 and mixed:
                csum = np.zeros_like(opt.v)
                for clip in mixed:
                    s_cache = model.forward(clip.features)
                    noisy_x = clip.features + config.noise_sigma * rng.normal(
                        size=clip.features.shape)
                    t_cache = teacher.forward(noisy_x)
                    res = consistency_losses(s_cache.y, t_cache.y, phase,
                                             clip.hop_s, vocab,
                                             config.mt_decode_threshold)
                    if np.isnan(res.loss):
                        raise RuntimeError(
                            f"NaN consistency loss on clip {clip.clip_id!r} "
                            f"at step {step}")
                    seq_skipped += int(res.seq_skipped)
                    cons_loss += res.loss
                    csum += model.flatten_grads(
                        model.backward(s_cache, res.grad_y))
                cons_loss /= len(mixed)
                gsum += cons_w * csum / len(mixed)

            model.set_flat(opt.step(model.get_flat(),
                                    clip_grad(gsum, config.grad_clip)))
            teacher.set_flat(ema_update(teacher.get_flat(), model.get_flat(),
                                        config.ema_decay))
            log.append({
                "kind": "step", "step": step, "epoch": epoch, "phase": phase,
                "sup_loss": sup_loss / max(sup_used, 1),
                "sup_skipped": sup_skipped,
                "cons_loss": cons_loss, "cons_weight": cons_w,
                "seq_skipped": seq_skipped,
            })
            step += 1
        record = {"kind": "epoch", "epoch": epoch}
        if eval_set:
            record.update(evaluate_model(teacher, eval_set, config, vocab))
        log.append(record)
    return teacher, log

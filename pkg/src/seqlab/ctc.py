"""CTC loss over the boundary-symbol alphabet with blank.

An n-class vocabulary yields 2n boundary symbols (onset/offset per class)
plus one blank, so the posteriorgram has 2n + 1 columns: column 0 is blank,
column 1 + 2c is onset of class c, column 2 + 2c its offset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .common import LossResult
from .errors import InfeasibleTargetError, ValidationError
from .labels import (BoundaryKind, BoundarySymbol, SequentialLabel, Vocabulary)

ROW_SUM_TOL = 1e-6
BLANK = 0


def symbol_index(sym: BoundarySymbol) -> int:
    """Column of a boundary symbol in the CTC alphabet (blank is 0)."""
    return 1 + 2 * sym.klass.id + (0 if sym.kind is BoundaryKind.ONSET else 1)


def index_symbol(idx: int, vocab: Vocabulary) -> BoundarySymbol:
    if idx <= 0:
        raise ValueError("blank has no boundary symbol")
    c, r = divmod(idx - 1, 2)
    return BoundarySymbol(vocab[c], BoundaryKind.ONSET if r == 0 else BoundaryKind.OFFSET)


@dataclass(frozen=True)
class CtcPosteriorgram:
    """Row-stochastic T x (2C + 1) matrix of symbol probabilities."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", p)
        if p.ndim != 2 or p.shape[1] < 3 or p.shape[1] % 2 == 0:
            raise ValidationError(
                f"probs must be T x (2C + 1) with C >= 1, got shape {p.shape}")
        if (p < -1e-12).any() or (p > 1 + 1e-12).any():
            raise ValidationError("probabilities must lie in [0, 1]")
        sums = p.sum(axis=1)
        bad = np.abs(sums - 1.0) > ROW_SUM_TOL
        if bad.any():
            t = int(np.argmax(bad))
            raise ValidationError(
                f"row {t} sums to {sums[t]:.8f}, expected 1 within {ROW_SUM_TOL}")

    @property
    def n_frames(self):
        return self.probs.shape[0]

    @property
    def n_classes(self):
        return (self.probs.shape[1] - 1) // 2


def _target_indices(target: SequentialLabel, n_classes: int) -> np.ndarray:
    idx = []
    for s in target:
        if s.klass.id >= n_classes:
            raise ValidationError(
                f"symbol {s} outside the {n_classes}-class alphabet")
        idx.append(symbol_index(s))
    return np.asarray(idx, dtype=np.int64)


def ctc_loss(post: CtcPosteriorgram, target: SequentialLabel) -> LossResult:
    """Negative log-likelihood of the target under the CTC collapse mapping
    (remove repeats, then blanks), with gradient w.r.t. the probabilities.

    Raises InfeasibleTargetError when the target cannot fit: CTC needs
    T >= S + (number of adjacent repeated symbols in the target).
    """
    labels = _target_indices(target, post.n_classes)
    S = len(labels)
    repeats = int((labels[1:] == labels[:-1]).sum()) if S > 1 else 0
    if post.n_frames < S + repeats:
        raise InfeasibleTargetError(post.n_frames, S)

    ext = np.zeros(2 * S + 1, dtype=np.int64)
    ext[1::2] = labels
    loss, grad = backend.ctc_forward_backward(post.probs, ext)
    return LossResult(loss, grad)


def ctc_greedy_decode(post: CtcPosteriorgram, vocab: Vocabulary) -> SequentialLabel:
    """Per-frame argmax, collapse repeats, drop blanks."""
    path = np.argmax(post.probs, axis=1)
    syms = []
    prev = -1
    for k in path:
        if k != prev and k != BLANK:
            syms.append(index_symbol(int(k), vocab))
        prev = k
    return SequentialLabel(syms)


def ctc_greedy_decode_timed(post: CtcPosteriorgram, vocab: Vocabulary,
                            hop_s: float) -> list[tuple[float, BoundarySymbol]]:
    """Like ctc_greedy_decode but keeps the time of each emission
    (start of the run that produced the symbol)."""
    path = np.argmax(post.probs, axis=1)
    out = []
    prev = -1
    for t, k in enumerate(path):
        if k != prev and k != BLANK:
            out.append((t * hop_s, index_symbol(int(k), vocab)))
        prev = k
    return out


def ctc_threshold_decode_timed(post: CtcPosteriorgram, threshold: float,
                               vocab: Vocabulary,
                               hop_s: float) -> list[tuple[float, BoundarySymbol]]:
    """Boundary readout matching `ctl_decode_timed`: at each frame emit the
    strongest non-blank symbol whose probability reaches the threshold (at
    most one per frame).  Unlike greedy decoding this surfaces every
    boundary peak, including clusters of repeated peaks during one event."""
    if not 0.0 < threshold < 1.0:
        raise ValidationError("threshold must lie in (0, 1)")
    out = []
    for t in range(post.n_frames):
        k = 1 + int(np.argmax(post.probs[t, 1:]))
        if post.probs[t, k] >= threshold:
            out.append((t * hop_s, index_symbol(k, vocab)))
    return out

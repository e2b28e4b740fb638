"""Connectionist temporal localization: blank-free boundary loss.

Per-frame event activities y are turned into onset/offset probabilities by a
rectified delta; a frame then either stays silent (probability eps_t, the
product of all (1 - z)) or emits exactly one boundary symbol.  The boundary
matrix has 2C columns: onset of class c at 2c, offset at 2c + 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .common import LossResult
from .errors import InfeasibleTargetError, ValidationError
from .labels import BoundaryKind, BoundarySymbol, SequentialLabel, Vocabulary


@dataclass(frozen=True)
class Posteriorgram:
    """T x C per-frame event-activity probabilities (multi-label, columns
    independent)."""

    y: np.ndarray
    hop_s: float = 1.0

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        object.__setattr__(self, "y", y)
        if y.ndim != 2:
            raise ValidationError(f"y must be a T x C matrix, got shape {y.shape}")
        if (y < -1e-12).any() or (y > 1 + 1e-12).any():
            raise ValidationError("activities must lie in [0, 1]")
        if self.hop_s <= 0:
            raise ValidationError("hop_s must be positive")

    @property
    def n_frames(self):
        return self.y.shape[0]

    @property
    def n_classes(self):
        return self.y.shape[1]


@dataclass(frozen=True)
class BoundaryProbs:
    """T x 2C onset/offset probabilities from the rectified delta."""

    z: np.ndarray

    @property
    def n_classes(self):
        return self.z.shape[1] // 2


def boundary_index(sym: BoundarySymbol) -> int:
    return 2 * sym.klass.id + (0 if sym.kind is BoundaryKind.ONSET else 1)


def index_boundary(idx: int, vocab: Vocabulary) -> BoundarySymbol:
    c, r = divmod(idx, 2)
    return BoundarySymbol(vocab[c], BoundaryKind.ONSET if r == 0 else BoundaryKind.OFFSET)


def boundary_matrix(y: np.ndarray, final_transition: bool) -> np.ndarray:
    """Rectified-delta boundary probabilities.

    Row t compares y[t] against y[t-1], with a virtual all-zero frame before
    the clip.  With final_transition a trailing row against a virtual
    all-zero frame after the clip is appended, so an event still active at
    the clip edge contributes its offset; targets built from annotations are
    always balanced, which makes them infeasible without that row whenever
    an event touches the end of the clip.
    """
    y = np.asarray(y, dtype=np.float64)
    T, C = y.shape
    prev = np.vstack([np.zeros((1, C)), y])
    cur = np.vstack([y, np.zeros((1, C))]) if final_transition else y
    if not final_transition:
        prev = prev[:-1]
    d = cur - prev
    z = np.zeros((cur.shape[0], 2 * C))
    z[:, 0::2] = np.maximum(0.0, d)
    z[:, 1::2] = np.maximum(0.0, -d)
    return z


def rectified_delta(post: Posteriorgram) -> BoundaryProbs:
    """T x 2C boundary probabilities; z_t(onset_c) = max(0, y_t - y_{t-1})
    with virtual y_{-1} = 0, and symmetrically for offsets."""
    return BoundaryProbs(boundary_matrix(post.y, final_transition=False))


def no_boundary_prob(z_row: np.ndarray) -> float:
    """Probability that no boundary occurs: product of (1 - z) over all
    boundary labels."""
    return float(np.prod(1.0 - np.asarray(z_row, dtype=np.float64)))


def boundary_emission_prob(z_row: np.ndarray, idx: int) -> float:
    """Probability of emitting exactly the boundary at column `idx`:
    z[idx] * prod over the others of (1 - z).  Equals eps * z/(1-z)
    wherever z[idx] < 1; the product form stays finite at z[idx] = 1."""
    z = np.asarray(z_row, dtype=np.float64)
    rest = np.delete(z, idx)
    return float(z[idx] * np.prod(1.0 - rest))


def _target_indices(target: SequentialLabel, n_classes: int) -> np.ndarray:
    idx = []
    for s in target:
        if s.klass.id >= n_classes:
            raise ValidationError(f"symbol {s} outside the {n_classes}-class alphabet")
        idx.append(boundary_index(s))
    return np.asarray(idx, dtype=np.int64)


def ctl_loss(post: Posteriorgram, target: SequentialLabel,
             final_transition: bool = True) -> LossResult:
    """CTL negative log-likelihood with gradient w.r.t. the activities y.

    Forward recursion: alpha_t(s) = eps_t * alpha_{t-1}(s)
    + p_t(l_s) * alpha_{t-1}(s-1); each frame emits zero or one boundary.
    The gradient chains through p, eps, and the rectified delta, with
    subgradient 0 at the max(0, .) kink.

    Raises InfeasibleTargetError when there are fewer (boundary) frames
    than target symbols.  A target with zero probability under the given
    activities yields loss = +inf and a zero gradient.
    """
    sym = _target_indices(target, post.n_classes)
    z = boundary_matrix(post.y, final_transition)
    if z.shape[0] < len(sym):
        raise InfeasibleTargetError(z.shape[0], len(sym))
    loss, gz = backend.ctl_forward_backward(z, sym)
    return LossResult(loss, _chain_to_activities(post.y, gz, final_transition))


def _chain_to_activities(y: np.ndarray, gz: np.ndarray,
                         final_transition: bool) -> np.ndarray:
    """d loss/d y from d loss/d z through the rectified delta."""
    T, C = y.shape
    gy = np.zeros_like(y)
    prev = np.vstack([np.zeros((1, C)), y[:-1]])
    on_active = (y - prev) > 0
    off_active = (prev - y) > 0
    g_on = gz[:T, 0::2] * on_active
    g_off = gz[:T, 1::2] * off_active
    gy += g_on - g_off
    gy[:-1] += g_off[1:] - g_on[1:]
    if final_transition:
        # trailing row: z(offset_c) = max(0, y[T-1, c])
        gy[-1] += gz[T, 1::2] * (y[-1] > 0)
    return gy


def ctl_decode_timed(post: Posteriorgram, threshold: float,
                     vocab: Vocabulary,
                     final_transition: bool = True) -> list[tuple[float, BoundarySymbol]]:
    """Boundary readout: at each frame emit the strongest boundary whose
    probability reaches the threshold (at most one per frame)."""
    if not 0.0 < threshold < 1.0:
        raise ValidationError("threshold must lie in (0, 1)")
    z = boundary_matrix(post.y, final_transition)
    out = []
    for t in range(z.shape[0]):
        best = int(np.argmax(z[t]))
        if z[t, best] >= threshold:
            out.append((t * post.hop_s, index_boundary(best, vocab)))
    return out


def ctl_decode(post: Posteriorgram, threshold: float, vocab: Vocabulary,
               final_transition: bool = True) -> SequentialLabel:
    return SequentialLabel(
        s for _, s in ctl_decode_timed(post, threshold, vocab, final_transition))

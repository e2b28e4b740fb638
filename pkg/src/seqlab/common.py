"""Shared small types for loss computations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Probabilities are clamped to this floor before taking logs.
PROB_FLOOR = 1e-300

#: Log-space sentinel standing in for -inf; small enough that exp() underflows
#: to 0 but finite so that arithmetic never produces NaN.
NEG_INF = -1e30


@dataclass(frozen=True)
class LossResult:
    """Scalar loss (negative log-likelihood, nats) plus the gradient with
    respect to the probability matrix the loss was computed from."""

    loss: float
    grad: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "grad", np.asarray(self.grad, dtype=np.float64))

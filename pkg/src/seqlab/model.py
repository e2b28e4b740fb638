"""Tiny windowed-linear sequence model with manual backprop.

Stands in for a full CRNN: each frame's hidden state is a tanh transform of
a centred window of input frames (so the model sees symmetric temporal
context and can localize boundaries without lag), feeding a per-class
sigmoid activity head and, optionally, a (2C + 1)-way softmax head for CTC
training.  Losses in this package differentiate w.r.t. output
probabilities, so the model applies the chain rule through its output
nonlinearities itself.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass
class ForwardCache:
    x: np.ndarray        # (T, F) input features
    xw: np.ndarray       # (T, (2w+1)*F) windowed features
    h: np.ndarray        # (T, H) hidden states
    y: np.ndarray        # (T, C) sigmoid activities
    q: np.ndarray | None  # (T, 2C + 1) softmax symbol probabilities


class ToyModel:
    """input (T, F) -> tanh windowed-linear layer (width H, window radius w)
    -> sigmoid activity head (C) and softmax boundary-symbol head (2C + 1)."""

    def __init__(self, n_features: int, n_classes: int, hidden: int = 32,
                 seed: int = 0, ctc_head: bool = True, window: int = 2):
        if window < 0:
            raise ValueError("window radius must be >= 0")
        self.n_features = n_features
        self.n_classes = n_classes
        self.hidden = hidden
        self.ctc_head = ctc_head
        self.window = window
        rng = np.random.default_rng(seed)

        def init(*shape):
            scale = 1.0 / np.sqrt(shape[-1])
            return rng.uniform(-scale, scale, size=shape)

        win_in = (2 * window + 1) * n_features
        self.params = {
            "wx": init(hidden, win_in),
            "bh": np.zeros(hidden),
            "wy": init(n_classes, hidden),
            "by": np.zeros(n_classes),
        }
        if ctc_head:
            k = 2 * n_classes + 1
            self.params["wq"] = init(k, hidden)
            self.params["bq"] = np.zeros(k)
        self._names = sorted(self.params)

    # ---- forward / backward ------------------------------------------------

    def _windowed(self, x: np.ndarray) -> np.ndarray:
        """(T, (2w+1)*F) matrix of zero-padded centred context windows."""
        T = x.shape[0]
        w = self.window
        if w == 0:
            return x
        pad = np.vstack([np.zeros((w, self.n_features)), x,
                         np.zeros((w, self.n_features))])
        return np.hstack([pad[k:k + T] for k in range(2 * w + 1)])

    def forward(self, x: np.ndarray) -> ForwardCache:
        p = self.params
        xw = self._windowed(np.asarray(x, dtype=np.float64))
        h = np.tanh(xw @ p["wx"].T + p["bh"])
        y = _sigmoid(h @ p["wy"].T + p["by"])
        q = None
        if self.ctc_head:
            q = _softmax(h @ p["wq"].T + p["bq"])
        return ForwardCache(x=x, xw=xw, h=h, y=y, q=q)

    def backward(self, cache: ForwardCache, grad_y: np.ndarray,
                 grad_q: np.ndarray | None = None) -> dict[str, np.ndarray]:
        """Gradients of a loss given d loss/d y (and optionally d loss/d q,
        both w.r.t. output probabilities)."""
        p = self.params
        h, y = cache.h, cache.y
        da_y = grad_y * y * (1.0 - y)
        dh = da_y @ p["wy"]
        grads = {n: np.zeros_like(v) for n, v in p.items()}
        grads["wy"] = da_y.T @ h
        grads["by"] = da_y.sum(axis=0)
        if grad_q is not None:
            q = cache.q
            inner = (grad_q * q).sum(axis=1, keepdims=True)
            da_q = q * (grad_q - inner)
            grads["wq"] = da_q.T @ h
            grads["bq"] = da_q.sum(axis=0)
            dh = dh + da_q @ p["wq"]

        da = dh * (1.0 - h ** 2)
        grads["wx"] = da.T @ cache.xw
        grads["bh"] = da.sum(axis=0)
        return grads

    # ---- parameter vector utilities ---------------------------------------

    def get_flat(self) -> np.ndarray:
        return np.concatenate([self.params[n].ravel() for n in self._names])

    def set_flat(self, flat: np.ndarray):
        i = 0
        for n in self._names:
            size = self.params[n].size
            self.params[n] = flat[i:i + size].reshape(self.params[n].shape).copy()
            i += size
        if i != flat.size:
            raise ValueError(f"parameter vector has {flat.size} entries, expected {i}")

    def flatten_grads(self, grads: dict[str, np.ndarray]) -> np.ndarray:
        return np.concatenate([grads[n].ravel() for n in self._names])

    def clone(self) -> "ToyModel":
        m = ToyModel(self.n_features, self.n_classes, self.hidden,
                     seed=0, ctc_head=self.ctc_head, window=self.window)
        m.set_flat(self.get_flat())
        return m

    # ---- checkpointing -----------------------------------------------------

    def save(self, path_prefix: str):
        """Flat float64 binary of parameters plus a JSON shape manifest."""
        self.get_flat().astype(np.float64).tofile(path_prefix + ".bin")
        manifest = {
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "hidden": self.hidden,
            "ctc_head": self.ctc_head,
            "window": self.window,
            "order": self._names,
            "shapes": {n: list(self.params[n].shape) for n in self._names},
        }
        with open(path_prefix + ".json", "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path_prefix: str) -> "ToyModel":
        with open(path_prefix + ".json", encoding="utf-8") as f:
            manifest = json.load(f)
        m = cls(manifest["n_features"], manifest["n_classes"],
                manifest["hidden"], seed=0, ctc_head=manifest["ctc_head"],
                window=manifest.get("window", 2))
        m.set_flat(np.fromfile(path_prefix + ".bin", dtype=np.float64))
        return m


def _sigmoid(a):
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


def _softmax(a):
    e = np.exp(a - a.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)

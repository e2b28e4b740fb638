import numpy as np
import pytest

from seqlab.labels import (BoundaryKind, BoundarySymbol, SequentialLabel,
                           Vocabulary)


@pytest.fixture
def vocab2():
    return Vocabulary(["speech", "car"])


@pytest.fixture
def vocab4():
    return Vocabulary([f"class{c}" for c in range(4)])


def on(vocab, c):
    return BoundarySymbol(vocab[c], BoundaryKind.ONSET)


def off(vocab, c):
    return BoundarySymbol(vocab[c], BoundaryKind.OFFSET)


def seq(*symbols):
    return SequentialLabel(symbols)


def random_stochastic(rng, T, K):
    p = rng.uniform(0.05, 1.0, size=(T, K))
    return p / p.sum(axis=1, keepdims=True)


def random_balanced_target(rng, vocab, n_events):
    """Random balanced sequential label with n_events onset/offset pairs
    (events of distinct classes may interleave)."""
    events = []
    for _ in range(n_events):
        c = int(rng.integers(len(vocab)))
        events.append(c)
    symbols = []
    open_ = []
    remaining = list(events)
    while remaining or open_:
        if remaining and (not open_ or rng.random() < 0.6):
            c = remaining.pop()
            if c in open_:  # same class cannot nest; close it first
                open_.remove(c)
                symbols.append(off(vocab, c))
            open_.append(c)
            symbols.append(on(vocab, c))
        else:
            c = open_.pop(int(rng.integers(len(open_))))
            symbols.append(off(vocab, c))
    return SequentialLabel(symbols)

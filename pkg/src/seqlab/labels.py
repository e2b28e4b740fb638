"""Label data model and conversions between strong, sequential, and weak forms.

Strong labels carry (class, onset, offset) per event.  Sequential labels keep
only the chronological order of event boundaries (one onset symbol and one
offset symbol per class).  Weak labels keep only the set of classes present.
"""

from __future__ import annotations

import enum
import json
import os
import tempfile
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ParseError, ValidationError


@dataclass(frozen=True, order=True)
class EventClass:
    id: int
    name: str


class Vocabulary:
    """Dense, ordered set of event classes; id == position."""

    def __init__(self, names: Iterable[str]):
        names = list(names)
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate class names in vocabulary: {names}")
        self.classes = tuple(EventClass(i, n) for i, n in enumerate(names))
        self._by_name = {c.name: c for c in self.classes}

    def __len__(self):
        return len(self.classes)

    def __iter__(self):
        return iter(self.classes)

    def __getitem__(self, idx: int) -> EventClass:
        return self.classes[idx]

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.classes == other.classes

    @property
    def names(self):
        return [c.name for c in self.classes]

    def by_name(self, name: str) -> EventClass:
        try:
            return self._by_name[name]
        except KeyError:
            raise ValidationError(f"unknown class name {name!r}") from None

    def to_json(self, path):
        _atomic_write_text(path, json.dumps(self.names) + "\n")

    @classmethod
    def from_json(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as f:
            names = json.load(f)
        if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
            raise ParseError(f"{path}: vocabulary must be a JSON array of names")
        return cls(names)


@dataclass(frozen=True)
class Event:
    klass: EventClass
    onset_s: float
    offset_s: float


@dataclass(frozen=True)
class StrongAnnotation:
    """Timestamped event list; same-class events must not overlap."""

    entries: tuple[Event, ...]

    def __init__(self, entries: Iterable[Event]):
        object.__setattr__(self, "entries", tuple(entries))

    def validate(self):
        for i, e in enumerate(self.entries):
            if e.onset_s < 0:
                raise ValidationError(f"entry {i}: negative onset {e.onset_s}")
            if e.offset_s <= e.onset_s:
                raise ValidationError(
                    f"entry {i}: offset {e.offset_s} not after onset {e.onset_s}")
        by_class: dict[EventClass, list[Event]] = {}
        for e in self.entries:
            by_class.setdefault(e.klass, []).append(e)
        for klass, evs in by_class.items():
            evs = sorted(evs, key=lambda e: e.onset_s)
            for a, b in zip(evs, evs[1:]):
                if b.onset_s < a.offset_s:
                    raise ValidationError(
                        f"class {klass.name}: overlapping events "
                        f"[{a.onset_s}, {a.offset_s}] and [{b.onset_s}, {b.offset_s}]")
        return self

    def classes(self) -> set[EventClass]:
        return {e.klass for e in self.entries}

    def __len__(self):
        return len(self.entries)


class BoundaryKind(enum.Enum):
    ONSET = "onset"
    OFFSET = "offset"


@dataclass(frozen=True)
class BoundarySymbol:
    klass: EventClass
    kind: BoundaryKind

    def __str__(self):
        return f"{self.kind.value}:{self.klass.name}"


def onset(klass: EventClass) -> BoundarySymbol:
    return BoundarySymbol(klass, BoundaryKind.ONSET)


def offset(klass: EventClass) -> BoundarySymbol:
    return BoundarySymbol(klass, BoundaryKind.OFFSET)


@dataclass(frozen=True)
class SequentialLabel:
    """Chronologically ordered boundary symbols.

    Labels converted from a valid StrongAnnotation are always balanced
    (per class: onset, offset, onset, ... ending with offset).  Decoder
    outputs may be unbalanced, so balance is checked on demand rather
    than at construction.
    """

    symbols: tuple[BoundarySymbol, ...]

    def __init__(self, symbols: Iterable[BoundarySymbol]):
        object.__setattr__(self, "symbols", tuple(symbols))

    def __len__(self):
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def is_balanced(self) -> bool:
        open_: dict[EventClass, bool] = {}
        for s in self.symbols:
            if s.kind is BoundaryKind.ONSET:
                if open_.get(s.klass):
                    return False
                open_[s.klass] = True
            else:
                if not open_.get(s.klass):
                    return False
                open_[s.klass] = False
        return not any(open_.values())

    def validate(self):
        if not self.is_balanced():
            raise ValidationError(
                "sequential label is not balanced per class: "
                + " ".join(str(s) for s in self.symbols))
        return self

    def to_strings(self) -> list[str]:
        return [str(s) for s in self.symbols]

    @classmethod
    def from_strings(cls, strings: Iterable[str], vocab: Vocabulary) -> "SequentialLabel":
        syms = []
        for s in strings:
            kind, _, name = s.partition(":")
            if kind not in ("onset", "offset") or not name:
                raise ParseError(f"bad boundary symbol {s!r}")
            syms.append(BoundarySymbol(vocab.by_name(name), BoundaryKind(kind)))
        return cls(syms)


@dataclass(frozen=True)
class WeakLabel:
    classes: frozenset[EventClass]

    def __init__(self, classes: Iterable[EventClass]):
        object.__setattr__(self, "classes", frozenset(classes))

    def __contains__(self, klass):
        return klass in self.classes

    def __len__(self):
        return len(self.classes)


@dataclass(frozen=True)
class FrameActivity:
    """Frame-rasterized strong label: binary T x C grid."""

    grid: np.ndarray
    hop_s: float

    def __post_init__(self):
        g = np.asarray(self.grid)
        if g.ndim != 2 or not np.isin(g, (0, 1)).all():
            raise ValidationError("FrameActivity grid must be a binary T x C matrix")
        if self.hop_s <= 0:
            raise ValidationError("hop_s must be positive")


# --------------------------------------------------------------------------
# conversions

def _tie_key(item):
    # (timestamp, offset-before-onset, class id): offset-first keeps per-class
    # alternation valid when one event ends exactly as the next one begins
    t, kind, klass = item
    return (t, 0 if kind is BoundaryKind.OFFSET else 1, klass.id)


def strong_to_sequential(ann: StrongAnnotation) -> SequentialLabel:
    """Extract event boundaries and sort them chronologically."""
    ann.validate()
    boundaries = []
    for e in ann.entries:
        boundaries.append((e.onset_s, BoundaryKind.ONSET, e.klass))
        boundaries.append((e.offset_s, BoundaryKind.OFFSET, e.klass))
    boundaries.sort(key=_tie_key)
    return SequentialLabel(BoundarySymbol(k, kind) for _, kind, k in boundaries)


def strong_to_weak(ann: StrongAnnotation) -> WeakLabel:
    ann.validate()
    return WeakLabel(ann.classes())


def rasterize(ann: StrongAnnotation, n_frames: int, hop_s: float,
              n_classes: int) -> tuple[FrameActivity, int]:
    """Rasterize to a binary grid; frame t is active for class c iff the
    half-open frame interval [t*hop, (t+1)*hop) overlaps an event of c
    (events are half-open [onset, offset) as well).

    Returns the grid and a count of events dropped because they lie
    entirely past the last frame.
    """
    if n_frames < 1:
        raise ValidationError("n_frames must be >= 1")
    if hop_s <= 0:
        raise ValidationError("hop_s must be positive")
    ann.validate()
    grid = np.zeros((n_frames, n_classes), dtype=np.uint8)
    dropped = 0
    clip_end = n_frames * hop_s
    for e in ann.entries:
        if e.onset_s >= clip_end:
            dropped += 1
            continue
        t0 = max(0, int(np.floor(e.onset_s / hop_s)))
        # frame t overlaps iff t*hop < offset and (t+1)*hop > onset
        t1 = min(n_frames, int(np.ceil(e.offset_s / hop_s)))
        for t in range(t0, t1):
            if t * hop_s < e.offset_s and (t + 1) * hop_s > e.onset_s:
                grid[t, e.klass.id] = 1
    return FrameActivity(grid, hop_s), dropped


def derasterize(activity: FrameActivity, vocab: Vocabulary) -> StrongAnnotation:
    """Contiguous active runs back to events (boundary-quantized inverse
    of rasterize)."""
    grid = np.asarray(activity.grid)
    hop = activity.hop_s
    events = []
    for c in range(grid.shape[1]):
        col = grid[:, c]
        t = 0
        while t < len(col):
            if col[t]:
                t0 = t
                while t < len(col) and col[t]:
                    t += 1
                events.append(Event(vocab[c], t0 * hop, t * hop))
            else:
                t += 1
    events.sort(key=lambda e: (e.onset_s, e.klass.id))
    return StrongAnnotation(events)


# --------------------------------------------------------------------------
# TSV annotation I/O (DCASE-style: clip-id, onset, offset, class-name)

def _format_seconds(x: float) -> str:
    # shortest fixed-point form with >= 2 decimals that round-trips exactly
    for d in range(2, 18):
        s = f"{x:.{d}f}"
        if float(s) == x:
            return s
    return repr(x)


def _atomic_write_text(path, text: str):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def read_annotations(path, vocab: Vocabulary) -> dict[str, StrongAnnotation]:
    """Read a tab-separated annotation file into per-clip annotations."""
    per_clip: dict[str, list[Event]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError(f"expected 4 tab-separated columns, got "
                                 f"{len(parts)}", line=lineno)
            clip, onset_s, offset_s, name = parts
            try:
                t0, t1 = float(onset_s), float(offset_s)
            except ValueError:
                raise ParseError(f"bad timestamp in {parts[1:3]}",
                                 line=lineno) from None
            if t0 < 0:
                raise ParseError(f"negative onset {t0}", line=lineno)
            if t1 <= t0:
                raise ParseError(f"offset {t1} not after onset {t0}",
                                 line=lineno)
            per_clip.setdefault(clip, []).append(Event(vocab.by_name(name), t0, t1))
    out = {}
    for clip, events in per_clip.items():
        ann = StrongAnnotation(events)
        ann.validate()
        out[clip] = ann
    return out


def write_annotations(path, annotations: dict[str, StrongAnnotation]):
    lines = []
    for clip in annotations:
        for e in annotations[clip].entries:
            lines.append("\t".join([clip, _format_seconds(e.onset_s),
                                    _format_seconds(e.offset_s), e.klass.name]))
    _atomic_write_text(path, "".join(l + "\n" for l in lines))

"""
Domain types shared across the package.

All times are in seconds. Intervals are half-open ``[start, end)``, so two
intervals that only touch at a boundary do not overlap. An unmatched
sentence (one the annotators could not ground in the video) is represented
by ``None`` wherever a ``TimeInterval`` would otherwise appear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

LANGUAGES = ("en", "zh", "es", "fr", "pt", "hi", "ru")
LANGUAGE_NAMES = {
    "en": "English",
    "zh": "Chinese",
    "es": "Spanish",
    "fr": "French",
    "pt": "Portuguese",
    "hi": "Hindi",
    "ru": "Russian",
    "other": "Other",
}
# "ch" is a common shorthand for Chinese in result tables.
_LANGUAGE_ALIASES = {"ch": "zh"}


class ValidationError(ValueError):
    """Input violates a structural or numeric invariant."""


def normalize_language(tag: str) -> str:
    tag = tag.strip().lower()
    tag = _LANGUAGE_ALIASES.get(tag, tag)
    if tag not in LANGUAGES and tag != "other":
        raise ValidationError(f"unknown language tag {tag!r}; expected one of {LANGUAGES} or 'other'")
    return tag


@dataclass(frozen=True)
class TimeInterval:
    start: float
    end: float

    def __post_init__(self):
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise ValidationError(f"interval bounds must be finite, got [{self.start}, {self.end})")
        if self.start < 0:
            raise ValidationError(f"interval start must be non-negative, got {self.start}")
        if self.end < self.start:
            raise ValidationError(f"interval end {self.end} precedes start {self.start}")

    @property
    def duration(self) -> float:
        return self.end - self.start

    def shifted(self, offset: float) -> "TimeInterval":
        return TimeInterval(self.start + offset, self.end + offset)


def interval_intersection(a: TimeInterval, b: TimeInterval) -> float:
    """Length of the overlap of two half-open intervals (0.0 when disjoint)."""
    return max(0.0, min(a.end, b.end) - max(a.start, b.start))


def interval_iou(a: Optional[TimeInterval], b: Optional[TimeInterval]) -> float:
    """Temporal IoU where ``None`` is an unmatched sentence.

    Two unmatched sentences agree (1.0); a one-sided match scores 0.0. A pair
    with zero union, e.g. two zero-length intervals, also scores 0.0.
    """
    if a is None and b is None:
        return 1.0
    if a is None or b is None:
        return 0.0
    inter = interval_intersection(a, b)
    union = a.duration + b.duration - inter
    if union <= 0.0:
        return 0.0
    return inter / union


@dataclass(frozen=True)
class ClipRecord:
    clip_index: int
    interval: TimeInterval
    video_id: str = ""


@dataclass(frozen=True)
class SentenceRecord:
    sentence_index: int
    text: str
    gold: Optional[TimeInterval]
    language: str = "other"
    video_id: str = ""

    @property
    def unmatched(self) -> bool:
        return self.gold is None


def check_clips(clips: Sequence[ClipRecord]) -> None:
    """Raise unless clips are contiguous from 0, sorted and non-overlapping."""
    for k, clip in enumerate(clips):
        if clip.clip_index != k:
            raise ValidationError(f"clip indices must be contiguous from 0; position {k} holds {clip.clip_index}")
        if k and clip.video_id != clips[0].video_id:
            raise ValidationError(f"clip {k} belongs to video {clip.video_id!r}, expected {clips[0].video_id!r}")
        if k and clip.interval.start < clips[k - 1].interval.end:
            raise ValidationError(f"clip {k} starts before clip {k - 1} ends")


def check_sentences(sentences: Sequence[SentenceRecord]) -> None:
    for k, sent in enumerate(sentences):
        if sent.sentence_index != k:
            raise ValidationError(
                f"sentence indices must be contiguous from 0; position {k} holds {sent.sentence_index}"
            )
        if k and sent.video_id != sentences[0].video_id:
            raise ValidationError(f"sentence {k} belongs to video {sent.video_id!r}, expected {sentences[0].video_id!r}")


def _check_partition(kind: str, used: Iterable[int], dropped: Iterable[int]) -> None:
    used, dropped = set(used), set(dropped)
    both = used & dropped
    if both:
        raise ValidationError(f"{kind} {sorted(both)} both assigned and dropped")
    allidx = used | dropped
    if allidx != set(range(len(allidx))):
        raise ValidationError(f"{kind} indices are not contiguous from 0: {sorted(allidx)}")


@dataclass(frozen=True)
class Alignment:
    """Monotone clip/sentence correspondence with explicit drops.

    ``assignments`` holds ``(sentence_index, clip_index)`` pairs in chain
    order. A sentence may own several clips and a clip may serve several
    sentences, but the pairs never cross.
    """

    assignments: tuple[tuple[int, int], ...]
    dropped_sentences: frozenset[int] = frozenset()
    dropped_clips: frozenset[int] = frozenset()
    total_cost: float = 0.0
    video_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "assignments", tuple((int(s), int(c)) for s, c in self.assignments))
        object.__setattr__(self, "dropped_sentences", frozenset(int(s) for s in self.dropped_sentences))
        object.__setattr__(self, "dropped_clips", frozenset(int(c) for c in self.dropped_clips))
        for (s1, c1), (s2, c2) in zip(self.assignments, self.assignments[1:]):
            if s2 < s1 or c2 < c1 or (s1, c1) == (s2, c2):
                raise ValidationError(f"assignments not strictly monotone at {(s1, c1)} -> {(s2, c2)}")
        _check_partition("sentence", (s for s, _ in self.assignments), self.dropped_sentences)
        _check_partition("clip", (c for _, c in self.assignments), self.dropped_clips)

    @property
    def n_sentences(self) -> int:
        return len({s for s, _ in self.assignments} | self.dropped_sentences)

    @property
    def n_clips(self) -> int:
        return len({c for _, c in self.assignments} | self.dropped_clips)

    def clips_of(self, sentence_index: int) -> Optional[tuple[int, ...]]:
        """Clips paired with a sentence, or None when the sentence is dropped."""
        if sentence_index in self.dropped_sentences:
            return None
        return tuple(c for s, c in self.assignments if s == sentence_index)

    def mapping(self) -> list[Optional[tuple[int, ...]]]:
        """The sentence -> clips map, one entry per sentence."""
        out: list[Optional[list[int]]] = [None] * self.n_sentences
        for s, c in self.assignments:
            if out[s] is None:
                out[s] = []
            out[s].append(c)
        return [None if v is None else tuple(v) for v in out]


@dataclass(frozen=True)
class GroundedAlignment:
    """Per-sentence predicted interval; ``None`` marks an unmatched sentence."""

    spans: tuple[Optional[TimeInterval], ...]
    video_id: str = ""

    def __len__(self):
        return len(self.spans)

    @classmethod
    def from_sentences(cls, sentences: Sequence[SentenceRecord]) -> "GroundedAlignment":
        vid = sentences[0].video_id if sentences else ""
        return cls(tuple(s.gold for s in sentences), vid)


def ground_alignment(a: Alignment, clips: Sequence[ClipRecord]) -> GroundedAlignment:
    """Turn clip indices into time spans.

    A sentence covering non-adjacent clips gets the convex span from its
    earliest clip start to its latest clip end.
    """
    spans = []
    for s, owned in enumerate(a.mapping()):
        if owned is None:
            spans.append(None)
            continue
        for c in owned:
            if not 0 <= c < len(clips):
                raise ValidationError(f"alignment references clip {c}, but only {len(clips)} clips exist")
        spans.append(
            TimeInterval(
                min(clips[c].interval.start for c in owned),
                max(clips[c].interval.end for c in owned),
            )
        )
    vid = a.video_id or (clips[0].video_id if clips else "")
    return GroundedAlignment(tuple(spans), vid)


__all__ = [
    "LANGUAGES",
    "LANGUAGE_NAMES",
    "Alignment",
    "ClipRecord",
    "GroundedAlignment",
    "SentenceRecord",
    "TimeInterval",
    "ValidationError",
    "check_clips",
    "check_sentences",
    "ground_alignment",
    "interval_intersection",
    "interval_iou",
    "normalize_language",
]

"""
Story-alignment evaluation: Clip Accuracy, Sentence IoU, F1 and annotation
agreement, plus per-language aggregation.

Clip Accuracy is time-weighted. Video time is the union of the clip
intervals; an instant counts as correct when the set of sentences whose
predicted span covers it equals the set whose gold span covers it (both
empty is correct, so unassigned time under an unmatched gold is a hit).
All arithmetic is on exact interval breakpoints; nothing is discretized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .core import (
    LANGUAGES,
    ClipRecord,
    GroundedAlignment,
    SentenceRecord,
    TimeInterval,
    ValidationError,
    interval_iou,
)


@dataclass(frozen=True)
class EvalResult:
    clip_accuracy: float
    sentence_iou: float
    f1: float
    matched_duration: float = 0.0
    total_duration: float = 0.0
    sentence_count: int = 0

    @classmethod
    def from_scores(cls, clip_accuracy, sentence_iou, matched_duration=0.0, total_duration=0.0, sentence_count=0):
        return cls(
            clip_accuracy,
            sentence_iou,
            f1(clip_accuracy, sentence_iou),
            matched_duration,
            total_duration,
            sentence_count,
        )

    def as_dict(self) -> dict:
        return {
            "clip_accuracy": self.clip_accuracy,
            "sentence_iou": self.sentence_iou,
            "f1": self.f1,
            "matched_duration": self.matched_duration,
            "total_duration": self.total_duration,
            "sentence_count": self.sentence_count,
        }


def f1(clip_accuracy: float, sentence_iou: float) -> float:
    """Harmonic mean; zero when both inputs are zero."""
    a, b = clip_accuracy, sentence_iou
    if a + b <= 0:
        return 0.0
    return 2.0 * a * b / (a + b)


def _video_ids(*groups: Iterable[str]) -> set:
    ids = set()
    for g in groups:
        ids.update(v for v in g if v)
    return ids


def _check_same_video(pred: GroundedAlignment, gold: Sequence[SentenceRecord], clips=()):
    ids = _video_ids([pred.video_id], (s.video_id for s in gold), (c.video_id for c in clips))
    if len(ids) > 1:
        raise ValidationError(f"prediction, gold and clips refer to different videos: {sorted(ids)}")


def _owners(spans: Sequence[Optional[TimeInterval]], lo: float, hi: float) -> frozenset:
    return frozenset(k for k, sp in enumerate(spans) if sp is not None and sp.start <= lo and hi <= sp.end)


def clip_time_match(pred: GroundedAlignment, gold: Sequence[SentenceRecord], clips: Sequence[ClipRecord]):
    """Return ``(correct_seconds, total_seconds)`` over the clips' time."""
    _check_same_video(pred, gold, clips)
    if len(pred) != len(gold):
        raise ValidationError(f"prediction covers {len(pred)} sentences, gold has {len(gold)}")
    gold_spans = [s.gold for s in gold]
    cuts = set()
    for c in clips:
        cuts.update((c.interval.start, c.interval.end))
    for sp in list(pred.spans) + gold_spans:
        if sp is not None:
            cuts.update((sp.start, sp.end))
    cuts = sorted(cuts)

    clip_iv = sorted((c.interval.start, c.interval.end) for c in clips)
    correct = total = 0.0
    k = 0
    for lo, hi in zip(cuts, cuts[1:]):
        while k < len(clip_iv) and clip_iv[k][1] <= lo:
            k += 1
        if k == len(clip_iv) or not (clip_iv[k][0] <= lo and hi <= clip_iv[k][1]):
            continue  # gap between clips
        total += hi - lo
        if _owners(pred.spans, lo, hi) == _owners(gold_spans, lo, hi):
            correct += hi - lo
    return correct, total


def clip_accuracy(pred: GroundedAlignment, gold: Sequence[SentenceRecord], clips: Sequence[ClipRecord]) -> float:
    correct, total = clip_time_match(pred, gold, clips)
    if total <= 0:
        raise ValidationError("clips cover no time; clip accuracy is undefined")
    return correct / total


def sentence_iou(pred: GroundedAlignment, gold: Sequence[SentenceRecord]) -> float:
    """Mean per-sentence IoU. Both unmatched scores 1, one-sided unmatched 0."""
    _check_same_video(pred, gold)
    if len(pred) != len(gold):
        raise ValidationError(f"prediction covers {len(pred)} sentences, gold has {len(gold)}")
    if not gold:
        raise ValidationError("no sentences to score")
    return math.fsum(interval_iou(p, g.gold) for p, g in zip(pred.spans, gold)) / len(gold)


def evaluate_video(pred: GroundedAlignment, gold: Sequence[SentenceRecord], clips: Sequence[ClipRecord]) -> EvalResult:
    correct, total = clip_time_match(pred, gold, clips)
    if total <= 0:
        raise ValidationError("clips cover no time; clip accuracy is undefined")
    return EvalResult.from_scores(correct / total, sentence_iou(pred, gold), correct, total, len(gold))


def agreement_iou(ann_a: Sequence[SentenceRecord], ann_b: Sequence[SentenceRecord]) -> float:
    """Mean per-sentence IoU between two annotations of the same sentences."""
    key_a = [(s.video_id, s.sentence_index) for s in ann_a]
    key_b = [(s.video_id, s.sentence_index) for s in ann_b]
    if sorted(key_a) != sorted(key_b) or len(set(key_a)) != len(key_a):
        raise ValidationError("the two annotations cover different sentence sets")
    if not key_a:
        raise ValidationError("no sentences to compare")
    b_by_key = {(s.video_id, s.sentence_index): s.gold for s in ann_b}
    return math.fsum(interval_iou(s.gold, b_by_key[(s.video_id, s.sentence_index)]) for s in ann_a) / len(ann_a)


@dataclass
class LanguageReport:
    per_language: dict[str, list[EvalResult]]
    language_means: dict[str, EvalResult]
    average: EvalResult
    pooled: bool = False
    metrics: tuple = field(default=("clip_accuracy", "sentence_iou", "f1"))

    def languages(self) -> list[str]:
        order = {lang: k for k, lang in enumerate(LANGUAGES)}
        return sorted(self.language_means, key=lambda lang: (order.get(lang, len(order)), lang))


def _mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs)


def _language_mean(results: Sequence[EvalResult], pooled: bool) -> EvalResult:
    matched = math.fsum(r.matched_duration for r in results)
    total = math.fsum(r.total_duration for r in results)
    count = sum(r.sentence_count for r in results)
    if pooled:
        if total <= 0:
            raise ValidationError("pooled aggregation needs durations on every result")
        ca = matched / total
        si = math.fsum(r.sentence_iou * r.sentence_count for r in results) / max(count, 1)
        return EvalResult.from_scores(ca, si, matched, total, count)
    return EvalResult(
        _mean([r.clip_accuracy for r in results]),
        _mean([r.sentence_iou for r in results]),
        _mean([r.f1 for r in results]),
        matched,
        total,
        count,
    )


def aggregate_report(per_video: Sequence[tuple[str, EvalResult]], pooled: bool = False) -> LanguageReport:
    """Average videos within each language, then languages with equal weight.

    Every metric, F1 included, is averaged as reported per video. With
    ``pooled=True`` clip accuracy is instead pooled over durations and
    sentence IoU over sentences, and F1 is recomputed from the pooled pair.
    """
    if not per_video:
        raise ValidationError("nothing to aggregate")
    groups: dict[str, list[EvalResult]] = {}
    for lang, res in per_video:
        groups.setdefault(lang, []).append(res)
    means = {lang: _language_mean(rs, pooled) for lang, rs in groups.items()}
    ms = list(means.values())
    average = EvalResult(
        _mean([r.clip_accuracy for r in ms]),
        _mean([r.sentence_iou for r in ms]),
        _mean([r.f1 for r in ms]),
        math.fsum(r.matched_duration for r in ms),
        math.fsum(r.total_duration for r in ms),
        sum(r.sentence_count for r in ms),
    )
    return LanguageReport(groups, means, average, pooled)

"""
Clip/sentence feature similarity and a reference InfoNCE loss.

The loss is a numeric reference: it is evaluated and differentiated here so
that training code elsewhere can be checked against it. Nothing in this
module trains an encoder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import ValidationError

DEFAULT_TEMPERATURE = 0.07


@dataclass(frozen=True)
class FeatureMatrix:
    """Row-per-item embeddings. ``role`` is ``"clip"`` or ``"sentence"``."""

    values: np.ndarray
    role: str = "clip"

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"feature matrix must be 2-D and non-empty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            row = int(np.argwhere(~np.isfinite(arr))[0][0])
            raise ValidationError(f"{self.role} feature row {row} has a non-finite value")
        if self.role not in ("clip", "sentence"):
            raise ValidationError(f"role must be 'clip' or 'sentence', got {self.role!r}")
        object.__setattr__(self, "values", arr)

    @property
    def count(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def _rows(x) -> np.ndarray:
    if isinstance(x, FeatureMatrix):
        return np.asarray(x.values, dtype=np.float64)
    return np.asarray(x, dtype=np.float64)


def _row_norms(arr: np.ndarray, role: str) -> np.ndarray:
    norms = np.linalg.norm(arr, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ValidationError(f"{role} row {int(zero[0])} has zero norm")
    return norms


def cosine_similarity(clips, sentences) -> np.ndarray:
    """M x N cosine similarities, clips on rows and sentences on columns."""
    v, t = _rows(clips), _rows(sentences)
    if v.shape[1] != t.shape[1]:
        raise ValidationError(f"dimension mismatch: clips have {v.shape[1]}, sentences have {t.shape[1]}")
    vn = v / _row_norms(v, "clip")[:, None]
    tn = t / _row_norms(t, "sentence")[:, None]
    return np.clip(vn @ tn.T, -1.0, 1.0)


@dataclass(frozen=True)
class ContrastiveBatch:
    """Positive (clip row, sentence row) pairs plus sampling settings."""

    positives: tuple[tuple[int, int], ...]
    negatives_per_anchor: int = 1
    temperature: float = DEFAULT_TEMPERATURE
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "positives", tuple((int(c), int(s)) for c, s in self.positives))
        if self.negatives_per_anchor < 1:
            raise ValidationError(f"need at least one negative per anchor, got {self.negatives_per_anchor}")
        if not self.temperature > 0:
            raise ValidationError(f"temperature must be positive, got {self.temperature}")
        if not self.positives:
            raise ValidationError("batch has no positive pairs")


@dataclass(frozen=True)
class Candidates:
    """Per positive pair: sentence rows scored against the clip, and clip rows
    scored against the sentence. The positive sits at position 0 of each list."""

    sentence_candidates: tuple[tuple[int, ...], ...]
    clip_candidates: tuple[tuple[int, ...], ...]

    @classmethod
    def positives_only(cls, batch: ContrastiveBatch) -> "Candidates":
        return cls(
            tuple((s,) for _, s in batch.positives),
            tuple((c,) for c, _ in batch.positives),
        )


class InsufficientNegatives(ValidationError):
    def __init__(self, video, need: int, have: int, side: str):
        super().__init__(f"video {video!r} has {have} other {side} items, need {need}")
        self.video = video


def _draw(rng, pool: list[int], k: int) -> tuple[int, ...]:
    picked = rng.choice(len(pool), size=k, replace=False)
    return tuple(pool[int(x)] for x in picked)


def sample_negatives(
    batch: ContrastiveBatch,
    clip_video: Sequence,
    sentence_video: Sequence,
    allow_cross_video: bool = False,
) -> Candidates:
    """Draw K same-video negatives per anchor, in both directions.

    For pair ``(c, s)`` the sentence side draws K sentences of ``c``'s video
    other than ``s``, uniformly without replacement; the clip side does the
    mirror image. With ``allow_cross_video`` a video that is too small is
    sampled from the whole corpus instead of raising.
    """
    k = batch.negatives_per_anchor
    rng = np.random.default_rng(batch.rng_seed)

    def pools(membership):
        by_video: dict = {}
        for idx, vid in enumerate(membership):
            by_video.setdefault(vid, []).append(idx)
        return by_video

    sent_pools, clip_pools = pools(sentence_video), pools(clip_video)
    sent_cands, clip_cands = [], []
    for c, s in batch.positives:
        if not (0 <= c < len(clip_video) and 0 <= s < len(sentence_video)):
            raise ValidationError(f"positive pair {(c, s)} out of range")
        vid = clip_video[c]
        for side, pool_map, total, pos, out in (
            ("sentence", sent_pools, len(sentence_video), s, sent_cands),
            ("clip", clip_pools, len(clip_video), c, clip_cands),
        ):
            pool = [x for x in pool_map.get(vid, []) if x != pos]
            if len(pool) < k:
                if not allow_cross_video:
                    raise InsufficientNegatives(vid, k, len(pool), side)
                pool = [x for x in range(total) if x != pos]
                if len(pool) < k:
                    raise InsufficientNegatives("<corpus>", k, len(pool), side)
            out.append((pos,) + _draw(rng, pool, k))
    return Candidates(tuple(sent_cands), tuple(clip_cands))


def _check_candidates(batch: ContrastiveBatch, cands: Candidates) -> None:
    if len(cands.sentence_candidates) != len(batch.positives) or len(cands.clip_candidates) != len(batch.positives):
        raise ValidationError("candidate lists do not match the number of positive pairs")
    for k, (c, s) in enumerate(batch.positives):
        if s not in cands.sentence_candidates[k] or c not in cands.clip_candidates[k]:
            raise ValidationError(f"candidates of pair {k} do not include the positive")


def _log_softmax_at(logits: np.ndarray, pos: int) -> tuple[float, np.ndarray]:
    top = logits.max()
    e = np.exp(logits - top)
    z = e.sum()
    return float(logits[pos] - top - math.log(z)), e / z


def _loss_and_grad(v, t, batch, cands, want_grad):
    tau = batch.temperature
    n = len(batch.positives)
    gv = np.zeros_like(v) if want_grad else None
    gt = np.zeros_like(t) if want_grad else None
    total = 0.0
    for k, (c, s) in enumerate(batch.positives):
        # clip anchor against sentence candidates
        sc = np.asarray(cands.sentence_candidates[k])
        logits = t[sc] @ v[c] / tau
        pos = int(np.flatnonzero(sc == s)[0])
        lp, p = _log_softmax_at(logits, pos)
        total -= lp
        if want_grad:
            w = p.copy()
            w[pos] -= 1.0
            gv[c] += w @ t[sc] / tau
            np.add.at(gt, sc, np.outer(w, v[c]) / tau)
        # sentence anchor against clip candidates
        cc = np.asarray(cands.clip_candidates[k])
        logits = v[cc] @ t[s] / tau
        pos = int(np.flatnonzero(cc == c)[0])
        lp, p = _log_softmax_at(logits, pos)
        total -= lp
        if want_grad:
            w = p.copy()
            w[pos] -= 1.0
            gt[s] += w @ v[cc] / tau
            np.add.at(gv, cc, np.outer(w, t[s]) / tau)
    if want_grad:
        gv /= n
        gt /= n
    return total / n, gv, gt


def _normalized(x):
    norms = _row_norms(x, "feature")
    return x / norms[:, None], norms


def _unnormalize_grad(g, xhat, norms):
    # gradient of x / ||x|| back to x
    return (g - xhat * np.sum(g * xhat, axis=1, keepdims=True)) / norms[:, None]


def infonce_loss(clips, sentences, batch: ContrastiveBatch, candidates: Candidates, normalize: bool = False) -> float:
    """Symmetric InfoNCE averaged over the positive pairs.

    Logits are raw inner products divided by the temperature; pass
    ``normalize=True`` to L2-normalize rows first (cosine logits). Each
    softmax runs over the positive plus its sampled negatives.
    """
    return infonce_value_and_grad(clips, sentences, batch, candidates, normalize, want_grad=False)[0]


def infonce_value_and_grad(clips, sentences, batch, candidates, normalize=False, want_grad=True):
    """Loss plus analytic gradients with respect to the clip and sentence rows."""
    if not batch.temperature > 0:
        raise ValidationError(f"temperature must be positive, got {batch.temperature}")
    _check_candidates(batch, candidates)
    v, t = _rows(clips), _rows(sentences)
    if v.shape[1] != t.shape[1]:
        raise ValidationError(f"dimension mismatch: clips have {v.shape[1]}, sentences have {t.shape[1]}")
    if not normalize:
        return _loss_and_grad(v, t, batch, candidates, want_grad)
    vh, vn = _normalized(v)
    th, tn = _normalized(t)
    loss, gv, gt = _loss_and_grad(vh, th, batch, candidates, want_grad)
    if want_grad:
        gv = _unnormalize_grad(gv, vh, vn)
        gt = _unnormalize_grad(gt, th, tn)
    return loss, gv, gt


def _relative_error(a: np.ndarray, b: np.ndarray, floor: float) -> float:
    diff = np.abs(a - b)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(diff / scale)) if diff.size else 0.0


@dataclass
class GradCheck:
    max_relative_error: float
    analytic: tuple = field(repr=False, default=())
    numeric: tuple = field(repr=False, default=())


def infonce_grad_check(
    clips,
    sentences,
    batch: ContrastiveBatch,
    candidates: Candidates,
    epsilon: float = 1e-5,
    normalize: bool = False,
    details: Optional[list] = None,
) -> float:
    """Max relative error between the analytic gradient and central differences.

    Every feature entry on both sides is perturbed by +/- ``epsilon``.
    An entry's error is ``|a - n| / max(|a|, |n|, floor)`` where ``floor`` is
    1e-6 of the largest analytic gradient entry (at least 1e-12), so entries
    many orders below the gradient's scale, e.g. from a saturated softmax,
    are judged against that scale rather than against their own magnitude. Pass a list as ``details`` to receive a
    :class:`GradCheck` with both gradients.
    """
    if not 0 < epsilon <= 1e-2:
        raise ValidationError(f"epsilon must lie in (0, 1e-2], got {epsilon}")
    v, t = _rows(clips).copy(), _rows(sentences).copy()
    _, gv, gt = infonce_value_and_grad(v, t, batch, candidates, normalize)

    def numeric(x):
        # x is v or t, perturbed in place
        g = np.zeros_like(x)
        for idx in np.ndindex(x.shape):
            orig = x[idx]
            x[idx] = orig + epsilon
            up = infonce_loss(v, t, batch, candidates, normalize)
            x[idx] = orig - epsilon
            dn = infonce_loss(v, t, batch, candidates, normalize)
            x[idx] = orig
            g[idx] = (up - dn) / (2 * epsilon)
        return g

    nv = numeric(v)
    nt = numeric(t)
    floor = max(1e-12, 1e-6 * max(float(np.max(np.abs(gv))), float(np.max(np.abs(gt)))))
    err = max(_relative_error(gv, nv, floor), _relative_error(gt, nt, floor))
    if details is not None:
        details.append(GradCheck(err, (gv, gt), (nv, nt)))
    return err

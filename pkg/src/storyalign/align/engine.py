"""DTW and Drop-DTW over clip-by-sentence similarity matrices.

Rows of a similarity matrix are clips, columns are sentences. The distance
charged for matching clip ``i`` with sentence ``j`` is ``1 - s(i, j)``.

Drop-DTW searches over every monotone chain of matched (clip, sentence)
pairs; any clip or sentence left out of the chain is dropped at cost
``drop_clip`` or ``drop_sent``. The DP keeps four tables:

``Z[i, j]``
    best cost with the first ``i`` clips and ``j`` sentences all resolved;
``D[a, b]``
    best cost of a chain whose last pair is (clip ``a``, sentence ``b``);
``R[a, b]``
    best cost entering pair ``(a, b)`` from an earlier pair on the same clip,
    with the sentences in between dropped;
``C[a, b]``
    same as ``R`` along a sentence, with the clips in between dropped.

Splitting the "same clip" and "same sentence" runs out of ``D`` is what lets
every item be charged exactly once, either matched or dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import Alignment, ValidationError
from . import _backend
from ._fallback import (
    D_FRESH,
    D_SAME_CLIP,
    DIAG,
    LEFT,
    RUN_ADJACENT,
    Z_DROP_BOTH,
    Z_DROP_CLIP,
    Z_DROP_SENT,
    Z_MATCH,
)

INF = math.inf


@dataclass(frozen=True)
class DropCosts:
    """Penalties for leaving a clip (``drop_clip``) or a sentence (``drop_sent``) unaligned.

    ``math.inf`` forbids dropping on that side.
    """

    drop_clip: float = INF
    drop_sent: float = INF

    def __post_init__(self):
        for name in ("drop_clip", "drop_sent"):
            v = float(getattr(self, name))
            if math.isnan(v) or v < 0:
                raise ValidationError(f"{name} must be >= 0 or +inf, got {v}")
            object.__setattr__(self, name, v)

    @classmethod
    def disabled(cls) -> "DropCosts":
        return cls(INF, INF)

    def charge(self, n_dropped_clips: int, n_dropped_sents: int) -> float:
        # avoids 0 * inf
        total = 0.0
        if n_dropped_clips:
            total += n_dropped_clips * self.drop_clip
        if n_dropped_sents:
            total += n_dropped_sents * self.drop_sent
        return total


def as_similarity(sim) -> np.ndarray:
    """Validate a clip x sentence similarity matrix and return it as float64."""
    arr = np.asarray(sim, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"similarity matrix must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"similarity matrix must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        i, j = np.argwhere(~np.isfinite(arr))[0]
        raise ValidationError(f"similarity matrix has non-finite value at clip {i}, sentence {j}")
    return arr


def to_cost(sim) -> np.ndarray:
    """Distance matrix ``1 - sim``."""
    return np.ascontiguousarray(1.0 - as_similarity(sim))


def alignment_cost(alignment: Alignment, cost: np.ndarray, costs: DropCosts) -> float:
    """Recompute an alignment's cost from scratch: matched distances plus drop charges."""
    matched = math.fsum(float(cost[c, s]) for s, c in alignment.assignments)
    return matched + costs.charge(len(alignment.dropped_clips), len(alignment.dropped_sentences))


def dtw_align(sim, video_id: str = "") -> Alignment:
    """Classic DTW: every clip and every sentence is matched.

    The accumulated cost is seeded with the first pair's distance, so
    ``total_cost`` is the exact sum of matched distances.
    """
    cost = to_cost(sim)
    acc, ptr = _backend.kernels.dtw_fill(cost)
    m, n = cost.shape
    i, j = m - 1, n - 1
    path = [(j, i)]
    while i or j:
        p = ptr[i, j]
        if p == DIAG:
            i, j = i - 1, j - 1
        elif p == LEFT:
            j -= 1
        else:
            i -= 1
        path.append((j, i))
    path.reverse()
    return Alignment(tuple(path), total_cost=float(acc[m - 1, n - 1]), video_id=video_id)


def drop_dtw_align(sim, costs: DropCosts, video_id: str = "") -> Alignment:
    """Minimum-cost monotone alignment where clips and sentences may be dropped.

    Ties prefer matching over dropping a sentence, over dropping a clip, over
    dropping both; a matched pair prefers a fresh diagonal entry over
    extending a run on the same clip, over extending one on the same sentence.
    With both drop costs infinite the result equals :func:`dtw_align`.
    """
    cost = to_cost(sim)
    D, R, C, Z, pD, pR, pC, pZ = _backend.kernels.drop_dtw_fill(cost, costs.drop_clip, costs.drop_sent)
    m, n = cost.shape

    pairs: list[tuple[int, int]] = []
    drop_s: list[int] = []
    drop_c: list[int] = []
    state, i, j = "Z", m, n
    while True:
        if state == "Z":
            if i == 0 and j == 0:
                break
            p = pZ[i, j]
            if p == Z_MATCH:
                state, i, j = "D", i - 1, j - 1
            elif p == Z_DROP_SENT:
                drop_s.append(j - 1)
                j -= 1
            elif p == Z_DROP_CLIP:
                drop_c.append(i - 1)
                i -= 1
            elif p == Z_DROP_BOTH:
                drop_s.append(j - 1)
                drop_c.append(i - 1)
                i, j = i - 1, j - 1
            else:  # pragma: no cover - kernel contract
                raise RuntimeError(f"bad Z pointer {p}")
        elif state == "D":
            pairs.append((j, i))
            p = pD[i, j]
            if p == D_FRESH:
                state = "Z"
            elif p == D_SAME_CLIP:
                state = "R"
            else:
                state = "C"
        elif state == "R":
            if pR[i, j] == RUN_ADJACENT:
                state, j = "D", j - 1
            else:
                drop_s.append(j - 1)
                j -= 1
        else:  # "C"
            if pC[i, j] == RUN_ADJACENT:
                state, i = "D", i - 1
            else:
                drop_c.append(i - 1)
                i -= 1

    pairs.reverse()
    return Alignment(
        tuple(pairs),
        frozenset(drop_s),
        frozenset(drop_c),
        total_cost=float(Z[m, n]),
        video_id=video_id,
    )


def percentile_drop_costs(cost, p: float) -> DropCosts:
    """Set both drop costs to the ``p``-th percentile of the distance values.

    Uses linear interpolation between order statistics.
    """
    arr = np.asarray(cost, dtype=np.float64)
    if arr.size == 0:
        raise ValidationError("cannot take a percentile of an empty cost matrix")
    if not 0.0 <= p <= 100.0:
        raise ValidationError(f"percentile must lie in [0, 100], got {p}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("cost matrix has non-finite values")
    v = float(np.percentile(arr.ravel(), p, method="linear"))
    return DropCosts(v, v)

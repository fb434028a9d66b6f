"""Exhaustive reference for Drop-DTW, used only to test the DP.

Enumerates every chain of (clip, sentence) pairs under the product order,
charges the distances of the chain plus a drop penalty for every item the
chain leaves out, and keeps the cheapest. It shares no code with the DP.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..core import Alignment, ValidationError
from .engine import DropCosts, to_cost

MAX_SIDE = 6


class InstanceTooLarge(ValidationError):
    pass


@lru_cache(maxsize=None)
def _chains(m: int, n: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """All chains (including the empty one) in the grid ``[m] x [n]``."""
    cells = [(i, j) for i in range(m) for j in range(n)]
    out: list[tuple[tuple[int, int], ...]] = [()]

    def extend(chain):
        li, lj = chain[-1]
        for i, j in cells:
            if i >= li and j >= lj and (i, j) != (li, lj):
                nxt = chain + ((i, j),)
                out.append(nxt)
                extend(nxt)

    for cell in cells:
        out.append((cell,))
        extend((cell,))
    return tuple(out)


@lru_cache(maxsize=None)
def _chain_tables(m: int, n: int):
    chains = _chains(m, n)
    mask = np.zeros((len(chains), m * n), dtype=np.float64)
    clip_cover = np.zeros((len(chains), m), dtype=bool)
    sent_cover = np.zeros((len(chains), n), dtype=bool)
    for k, chain in enumerate(chains):
        for i, j in chain:
            mask[k, i * n + j] = 1.0
            clip_cover[k, i] = True
            sent_cover[k, j] = True
    n_drop_clips = m - clip_cover.sum(axis=1)
    n_drop_sents = n - sent_cover.sum(axis=1)
    return chains, mask, n_drop_clips, n_drop_sents


def brute_force_align(sim, costs: DropCosts, video_id: str = "") -> Alignment:
    """Globally optimal alignment by enumeration; refuses instances beyond 6 x 6."""
    cost = to_cost(sim)
    m, n = cost.shape
    if m > MAX_SIDE or n > MAX_SIDE:
        raise InstanceTooLarge(f"brute force is limited to {MAX_SIDE}x{MAX_SIDE}, got {m}x{n}")
    chains, mask, ndc, nds = _chain_tables(m, n)
    with np.errstate(invalid="ignore"):
        clip_pen = np.where(ndc > 0, ndc * costs.drop_clip, 0.0)
        sent_pen = np.where(nds > 0, nds * costs.drop_sent, 0.0)
    totals = mask @ cost.ravel() + clip_pen + sent_pen
    best = int(np.argmin(totals))
    chain = chains[best]
    used_c = {i for i, _ in chain}
    used_s = {j for _, j in chain}
    return Alignment(
        tuple((j, i) for i, j in chain),
        frozenset(set(range(n)) - used_s),
        frozenset(set(range(m)) - used_c),
        total_cost=float(totals[best]),
        video_id=video_id,
    )

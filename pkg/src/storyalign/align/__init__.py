"""Alignment engine: DTW, Drop-DTW and an exhaustive test oracle."""

from ._backend import BACKEND
from .engine import (
    DropCosts,
    alignment_cost,
    as_similarity,
    drop_dtw_align,
    dtw_align,
    percentile_drop_costs,
    to_cost,
)
from .oracle import InstanceTooLarge, brute_force_align

__all__ = [
    "BACKEND",
    "DropCosts",
    "InstanceTooLarge",
    "alignment_cost",
    "as_similarity",
    "brute_force_align",
    "drop_dtw_align",
    "dtw_align",
    "percentile_drop_costs",
    "to_cost",
]

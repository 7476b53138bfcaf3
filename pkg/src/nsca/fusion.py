"""Set algebra for correcting and combining epoch labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError, ZeroTotalWeight
from .signal import EpochSet, check_horizons


@dataclass(frozen=True)
class LabeledEpochs:
    source: str
    epochs: EpochSet
    weight: float = 1.0

    def __post_init__(self):
        if not self.weight >= 0:
            raise ValidationError("vote weight must be nonnegative")


def _masks(sets):
    sets = list(sets)
    if not sets:
        raise ValidationError("need at least one epoch set")
    check_horizons(sets)
    return np.array([s.mask() for s in sets]), sets[0].horizon


def union(sets) -> EpochSet:
    masks, _ = _masks(sets)
    return EpochSet.from_mask(masks.any(axis=0))


def intersection(sets) -> EpochSet:
    masks, _ = _masks(sets)
    return EpochSet.from_mask(masks.all(axis=0))


def dilate(epochs: EpochSet, pad_before, pad_after=None) -> EpochSet:
    """Grow every index ``t`` into ``[t - pad_before, t + pad_after]``."""
    if pad_after is None:
        pad_after = pad_before
    if pad_before < 0 or pad_after < 0:
        raise ValidationError("dilation pads must be nonnegative")
    n = epochs.horizon
    if len(epochs) == 0 or (pad_before == 0 and pad_after == 0):
        return epochs
    # +1 at run starts, -1 past run ends, then a running sum
    delta = np.zeros(n + 1, dtype=np.int64)
    for start, end in epochs.intervals():
        delta[max(start - pad_before, 0)] += 1
        delta[min(end + pad_after, n)] -= 1
    return EpochSet.from_mask(np.cumsum(delta[:n]) > 0)


def exclude(base: EpochSet, removed: EpochSet, pad=0) -> EpochSet:
    """``base`` minus ``removed`` dilated by ``pad`` samples on each side."""
    check_horizons([base, removed])
    grown = dilate(removed, pad, pad)
    return EpochSet.from_mask(base.mask() & ~grown.mask())


def vote(labeled, quorum=0.5) -> EpochSet:
    """Weighted consensus: keep ``t`` when its supporting weight reaches
    ``quorum`` of the total weight. Exact ties are included."""
    labeled = list(labeled)
    if not 0 < quorum <= 1:
        raise ValidationError("quorum must be in (0, 1]")
    masks, _ = _masks([item.epochs for item in labeled])
    weights = np.array([item.weight for item in labeled], dtype=float)
    total = weights.sum()
    if not total > 0:
        raise ZeroTotalWeight("vote weights sum to zero")
    support = weights @ masks
    need = quorum * total
    return EpochSet.from_mask(support >= need - 1e-12 * total)

"""Signal containers, sliding-window power and covariance estimation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyEpochSet,
    EmptySignal,
    HorizonMismatch,
    InsufficientStatistics,
    NonFinite,
    ValidationError,
    WindowTooLarge,
)


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MultichannelSignal:
    """Uniformly sampled real multichannel time series.

    Parameters
    ----------
    data : array_like, shape (n_channels, n_samples)
        Amplitudes; a 1-D input is promoted to a single channel.
    fs : float
        Sampling rate in Hz.
    """

    data: np.ndarray
    fs: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2:
            raise ValidationError("signal data must be 1-D or 2-D")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise EmptySignal("signal has no channels or no samples")
        if not np.all(np.isfinite(data)):
            raise NonFinite("signal contains NaN or Inf")
        if not (np.isfinite(self.fs) and self.fs > 0):
            raise ValidationError(f"sampling rate must be positive, got {self.fs}")
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "fs", float(self.fs))

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    def __len__(self):
        return self.n_samples


@dataclass(frozen=True, eq=False)
class EpochSet:
    """Sorted set of sample indexes within ``[0, horizon)``."""

    indexes: np.ndarray
    horizon: int

    def __post_init__(self):
        horizon = int(self.horizon)
        if horizon < 0:
            raise ValidationError("horizon must be nonnegative")
        idx = np.unique(np.asarray(self.indexes, dtype=np.int64).ravel())
        if idx.size and (idx[0] < 0 or idx[-1] >= horizon):
            raise ValidationError("epoch index outside [0, horizon)")
        object.__setattr__(self, "indexes", _frozen(idx, np.int64))
        object.__setattr__(self, "horizon", horizon)

    @classmethod
    def empty(cls, horizon):
        return cls(np.empty(0, dtype=np.int64), horizon)

    @classmethod
    def full(cls, horizon):
        return cls(np.arange(horizon), horizon)

    @classmethod
    def from_mask(cls, mask):
        mask = np.asarray(mask, dtype=bool)
        return cls(np.flatnonzero(mask), mask.size)

    @classmethod
    def from_intervals(cls, intervals, horizon):
        """Build from half-open ``(start, end)`` pairs."""
        mask = np.zeros(int(horizon), dtype=bool)
        for start, end in intervals:
            if not 0 <= start <= end <= horizon:
                raise ValidationError(f"interval [{start}, {end}) outside horizon {horizon}")
            mask[start:end] = True
        return cls.from_mask(mask)

    def mask(self) -> np.ndarray:
        m = np.zeros(self.horizon, dtype=bool)
        m[self.indexes] = True
        return m

    def intervals(self) -> list[tuple[int, int]]:
        """Half-open runs of consecutive indexes."""
        idx = self.indexes
        if idx.size == 0:
            return []
        breaks = np.flatnonzero(np.diff(idx) > 1)
        starts = np.concatenate(([idx[0]], idx[breaks + 1]))
        ends = np.concatenate((idx[breaks], [idx[-1]])) + 1
        return [(int(s), int(e)) for s, e in zip(starts, ends)]

    def __len__(self):
        return int(self.indexes.size)

    def __contains__(self, t):
        i = np.searchsorted(self.indexes, t)
        return bool(i < self.indexes.size and self.indexes[i] == t)

    def __eq__(self, other):
        if not isinstance(other, EpochSet):
            return NotImplemented
        return self.horizon == other.horizon and np.array_equal(self.indexes, other.indexes)

    def __hash__(self):
        return hash((self.horizon, self.indexes.tobytes()))

    def __repr__(self):
        return f"EpochSet(n={len(self)}, horizon={self.horizon}, runs={len(self.intervals())})"


def check_horizons(sets):
    horizons = {s.horizon for s in sets}
    if len(horizons) > 1:
        raise HorizonMismatch(f"epoch sets have different horizons: {sorted(horizons)}")


def _as_data(x):
    if isinstance(x, MultichannelSignal):
        return x.data
    data = np.asarray(x, dtype=float)
    if data.ndim == 1:
        data = data[None, :]
    if data.size == 0:
        raise EmptySignal("signal has no samples")
    if not np.all(np.isfinite(data)):
        raise NonFinite("signal contains NaN or Inf")
    return data


def _second_moment(data, remove_mean):
    if remove_mean:
        data = data - data.mean(axis=1, keepdims=True)
    c = data @ data.T / data.shape[1]
    return 0.5 * (c + c.T)


def covariance_full(x, remove_mean=True) -> np.ndarray:
    """Covariance averaged over all samples, normalized by the sample count."""
    return _second_moment(_as_data(x), remove_mean)


def covariance_on_epochs(x, epochs: EpochSet, remove_mean=True) -> np.ndarray:
    """Covariance restricted to the samples in ``epochs``.

    The mean is removed over the epoch samples only. Emits an
    :class:`InsufficientStatistics` warning when there are fewer epoch samples
    than channels.
    """
    data = _as_data(x)
    if epochs.horizon != data.shape[1]:
        raise HorizonMismatch(
            f"epoch horizon {epochs.horizon} != signal length {data.shape[1]}")
    if len(epochs) == 0:
        raise EmptyEpochSet("cannot estimate a covariance on an empty epoch set")
    if len(epochs) < data.shape[0]:
        warnings.warn(
            f"{len(epochs)} epoch samples for {data.shape[0]} channels; "
            "covariance is rank-deficient", InsufficientStatistics, stacklevel=2)
    return _second_moment(data[:, epochs.indexes], remove_mean)


def odd_window(w) -> int:
    w = int(w)
    return w + 1 if w % 2 == 0 else w


def sliding_power(s, w) -> np.ndarray:
    """Centered moving average of ``|s|**2`` over ``w`` samples.

    Even ``w`` is bumped to ``w + 1``. Samples beyond the record are treated
    as zero while the divisor stays ``w``.
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise EmptySignal("sliding_power expects a nonempty 1-D signal")
    if w < 1:
        raise ValidationError("window must be at least one sample")
    if w > s.size:
        raise WindowTooLarge(f"window of {w} samples exceeds signal length {s.size}")
    w = odd_window(w)
    h = w // 2
    padded = np.pad(s * s, h)
    return np.convolve(padded, np.ones(w), mode="valid") / w

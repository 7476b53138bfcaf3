"""Nonstationarity indexes and their epoch extractors.

Five indexes are provided: the local power envelope (LPE) of a signal, and
the mean, variance, spectral-color amplitude ``q`` and decay constant ``eps``
of a Kalman innovation trace. Each index is thresholded pointwise into an
:class:`~nsca.signal.EpochSet`. Thresholds left as ``None`` default to three
times the population standard deviation of the finite index values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonpositivePredictedVariance, ValidationError, WindowTooLarge
from .signal import EpochSet, sliding_power

STD_FACTOR = 3.0


def seconds_to_samples(seconds, fs, minimum=1) -> int:
    n = int(round(seconds * fs))
    if n < minimum:
        raise ValidationError(
            f"window of {seconds} s at {fs} Hz is {n} samples, need at least {minimum}")
    return n


def std_threshold(index) -> float:
    """``3 * std`` of the finite entries (population std).

    A constant trace has no outliers, so its threshold is infinite.
    """
    finite = np.asarray(index)[np.isfinite(index)]
    sd = float(np.std(finite)) if finite.size else 0.0
    return STD_FACTOR * sd if sd > 0 else np.inf


def threshold_epochs(index, upper=None, lower=None, absolute=False) -> EpochSet:
    """Epochs where ``index >= upper`` or ``index <= lower``.

    With ``absolute`` the comparison uses ``|index|``. NaN entries never
    qualify.
    """
    v = np.abs(index) if absolute else np.asarray(index)
    mask = np.zeros(v.shape, dtype=bool)
    with np.errstate(invalid="ignore"):
        if upper is not None:
            mask |= v >= upper
        if lower is not None:
            mask |= v <= lower
    return EpochSet.from_mask(mask)


def window_mean(v, w, causal=False) -> np.ndarray:
    """Moving average over ``w`` samples, zero beyond the record edges.

    The centered window for sample ``t`` covers ``t - w//2 .. t - w//2 + w - 1``;
    the causal window covers ``t - w + 1 .. t``.
    """
    v = np.asarray(v, dtype=float)
    if w > v.shape[-1]:
        raise WindowTooLarge(f"window of {w} samples exceeds length {v.shape[-1]}")
    csum = np.cumsum(np.pad(v, [(0, 0)] * (v.ndim - 1) + [(1, 0)]), axis=-1)
    n = v.shape[-1]
    end = np.arange(n) + (0 if causal else w - 1 - w // 2)
    start = end - w + 1
    end = np.clip(end, -1, n - 1) + 1
    start = np.clip(start, 0, n)
    return (np.take(csum, end, axis=-1) - np.take(csum, start, axis=-1)) / w


@dataclass(frozen=True)
class LpeConfig:
    """Local power envelope settings (windows in seconds).

    ``zeta_upper=None`` applies the ``3 * std(rho)`` rule.
    """

    w1: float = 0.010
    w2: float = 0.200
    zeta_upper: float | None = None
    zeta_lower: float = 0.0
    global_denominator: bool = False

    def __post_init__(self):
        if not self.w1 > 0 or self.w2 < 2 * self.w1:
            raise ValidationError("LPE windows need w2 >= 2*w1")
        if self.zeta_upper is not None and not self.zeta_upper > 1:
            raise ValidationError("zeta_upper must exceed 1")
        if not 0 <= self.zeta_lower < 1:
            raise ValidationError("zeta_lower must be in [0, 1)")


@dataclass(frozen=True)
class IndexResult:
    """An index trace with its epochs and the thresholds that produced them."""

    index: np.ndarray
    epochs: EpochSet
    upper: float | None
    lower: float | None
    flags: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.index, self.epochs))


def lpe_index(s, fs, cfg: LpeConfig = LpeConfig()) -> IndexResult:
    """Ratio of short- to long-window sliding power, thresholded both ways."""
    s = np.asarray(s, dtype=float)
    n1 = seconds_to_samples(cfg.w1, fs)
    p_inf = float(np.mean(s * s))
    if p_inf == 0.0:
        rho = np.full(s.size, np.nan)
        return IndexResult(rho, EpochSet.empty(s.size), None, None, {"degenerate": True})
    p1 = sliding_power(s, n1)
    if cfg.global_denominator:
        denom = np.full(s.size, p_inf)
    else:
        denom = sliding_power(s, seconds_to_samples(cfg.w2, fs))
    rho = p1 / np.maximum(denom, 1e-12 * p_inf)
    upper = std_threshold(rho) if cfg.zeta_upper is None else cfg.zeta_upper
    lower = cfg.zeta_lower
    return IndexResult(rho, threshold_epochs(rho, upper, lower), upper, lower)


@dataclass(frozen=True)
class InnovationTrace:
    """Per-channel innovation ``values`` and predicted variance, shape (n_ch, n)."""

    values: np.ndarray
    predicted_variance: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        g = np.atleast_2d(np.asarray(self.predicted_variance, dtype=float))
        if v.shape != g.shape:
            raise ValidationError(f"values {v.shape} and variances {g.shape} differ")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "predicted_variance", g)

    @property
    def n_channels(self):
        return self.values.shape[0]

    @property
    def n_samples(self):
        return self.values.shape[1]

    def channel(self, k):
        return InnovationTrace(self.values[k], self.predicted_variance[k])


def _per_channel(value, n):
    if value is None:
        return [None] * n
    arr = np.broadcast_to(np.asarray(value, dtype=float), (n,))
    return [float(a) for a in arr]


def _thresholded(index, uppers, lowers, absolute=False, exclude=None):
    results = []
    for k, row in enumerate(index):
        up = uppers[k]
        if up is None:
            valid = row if exclude is None else row[~exclude[k]]
            up = std_threshold(valid)
        lo = lowers[k]
        ep = threshold_epochs(row, up, lo, absolute=absolute)
        if exclude is not None and exclude[k].any():
            ep = EpochSet.from_mask(ep.mask() & ~exclude[k])
        results.append((ep, up, lo))
    return results


@dataclass(frozen=True)
class ChannelIndexResult:
    """Per-channel index traces (n_ch, n) and per-channel epoch sets."""

    index: np.ndarray
    epochs: list
    upper: list
    lower: list
    flags: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.index, self.epochs))


def _innovation_mean(trace, wa, causal):
    if wa is None:
        return np.zeros_like(trace.values)
    return window_mean(trace.values, wa, causal=causal)


def _mean_window_samples(mean_window, fs):
    return None if mean_window is None else seconds_to_samples(mean_window, fs)


def innovation_mean_index(trace: InnovationTrace, w_a=0.010, fs=500.0, mu=None,
                          causal=False) -> ChannelIndexResult:
    """Sliding mean of the innovation; epochs where ``|a_k| >= mu_k``."""
    wa = seconds_to_samples(w_a, fs)
    a = _innovation_mean(trace, wa, causal)
    mus = _per_channel(mu, trace.n_channels)
    res = _thresholded(a, mus, [None] * trace.n_channels, absolute=True)
    return ChannelIndexResult(a, [r[0] for r in res], [r[1] for r in res], [None] * len(res))


def innovation_variance_index(trace: InnovationTrace, w=0.010, fs=500.0,
                              lambda_upper=None, lambda_lower=0.0,
                              mean_window=0.050, causal=False) -> ChannelIndexResult:
    """Windowed ratio of the mean-removed innovation power to its predicted variance.

    Values near one mean the filter's presumed observation noise matches the
    data. Epochs are where the ratio is ``>= lambda_upper`` or
    ``<= lambda_lower``.
    """
    if np.any(trace.predicted_variance <= 0):
        raise NonpositivePredictedVariance("predicted innovation variance must be > 0")
    if lambda_upper is not None and np.any(np.asarray(lambda_upper) < 1):
        raise ValidationError("lambda_upper must be at least 1")
    if lambda_lower is not None and np.any((np.asarray(lambda_lower) < 0)
                                           | (np.asarray(lambda_lower) >= 1)):
        raise ValidationError("lambda_lower must be in [0, 1)")
    nw = seconds_to_samples(w, fs, minimum=2)
    a = _innovation_mean(trace, _mean_window_samples(mean_window, fs), causal)
    ratio = (trace.values - a) ** 2 / trace.predicted_variance
    gamma = window_mean(ratio, nw, causal=causal)
    ups = _per_channel(lambda_upper, trace.n_channels)
    los = _per_channel(lambda_lower, trace.n_channels)
    res = _thresholded(gamma, ups, los)
    return ChannelIndexResult(gamma, [r[0] for r in res], [r[1] for r in res],
                              [r[2] for r in res])


@dataclass(frozen=True)
class WhitenessFit:
    """Exponential fit ``q * exp(-|tau| / eps)`` of the local autocovariance."""

    q: np.ndarray
    eps: np.ndarray
    failed: np.ndarray


def local_autocovariance(theta, w_r, max_lag, causal=False) -> np.ndarray:
    """Windowed lag products, shape (max_lag + 1, n).

    Lag ``tau`` averages ``theta(s) * theta(s + tau)`` over a window centered
    at ``t - tau // 2`` so the estimate is aligned with the centered product
    ``theta(s - tau/2) * theta(s + tau/2)``.
    """
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    r = np.empty((max_lag + 1, n))
    for tau in range(max_lag + 1):
        prod = np.zeros(n)
        prod[: n - tau] = theta[: n - tau] * theta[tau:]
        m = window_mean(prod, w_r, causal=causal)
        shift = tau // 2
        if shift:
            m = np.concatenate((np.zeros(shift), m[:-shift]))
        r[tau] = m
    return r


def _fit_exponential(r, max_decay, n_steps=10):
    """Weighted least-squares fit of ``q * d**tau`` to r (lags x samples).

    Lag 0 has weight 1 and every positive lag weight 2, which is the same
    objective as fitting the symmetric range ``-L..L``. Returns ``q``, ``d``
    and a failure mask.
    """
    lags = np.arange(r.shape[0], dtype=float)[:, None]
    wts = np.where(lags > 0, 2.0, 1.0)

    def cost(q, d):
        resid = r - q * d ** lags
        return np.sum(wts * resid * resid, axis=0)

    def best_q(d):
        basis = d ** lags
        den = np.sum(wts * basis * basis, axis=0)
        return np.sum(wts * r * basis, axis=0) / np.where(den > 0, den, 1.0)

    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(r[0] > 0, r[1] / r[0], 0.0)
    d = np.clip(np.nan_to_num(d), 0.0, max_decay)
    q = best_q(d)
    best = cost(q, d)
    step = np.ones_like(d)
    for _ in range(n_steps):
        basis = d ** lags
        dbasis = lags * d ** np.maximum(lags - 1, 0)
        resid = r - q * basis
        jq, jd = basis, q * dbasis
        a11 = np.sum(wts * jq * jq, axis=0)
        a12 = np.sum(wts * jq * jd, axis=0)
        a22 = np.sum(wts * jd * jd, axis=0)
        g1 = np.sum(wts * jq * resid, axis=0)
        g2 = np.sum(wts * jd * resid, axis=0)
        det = a11 * a22 - a12 * a12
        ok = det > 1e-14 * a11 * a22
        dd = np.where(ok, (a11 * g2 - a12 * g1) / np.where(ok, det, 1.0), 0.0)
        d_new = np.clip(d + step * dd, 0.0, max_decay)
        q_new = best_q(d_new)
        # keep the refined point only where it lowers the cost
        c_new = cost(q_new, d_new)
        better = np.isfinite(c_new) & (c_new < best)
        d = np.where(better, d_new, d)
        q = np.where(better, q_new, q)
        best = np.where(better, c_new, best)
        step = np.where(better, 1.0, 0.5 * step)
    failed = ~(np.isfinite(q) & np.isfinite(d) & np.isfinite(best))
    return q, d, failed


def fit_whiteness(theta, w_r, max_lag, causal=False) -> WhitenessFit:
    """Per-sample exponential fit of the local autocovariance of one channel."""
    r = local_autocovariance(theta, w_r, max_lag, causal=causal)
    max_eps = 100.0 * max_lag
    q, d, failed = _fit_exponential(r, np.exp(-1.0 / max_eps))
    with np.errstate(divide="ignore"):
        eps = np.where(d > 0, -1.0 / np.log(np.where(d > 0, d, 0.5)), 0.0)
    eps = np.where(failed, 0.0, eps)
    q = np.where(failed, 0.0, q)
    return WhitenessFit(q, eps, failed)


@dataclass(frozen=True)
class WhitenessResult:
    q: np.ndarray
    eps: np.ndarray
    failed: np.ndarray
    epochs_q: list
    epochs_eps: list
    xi: list
    kappa: list

    def __iter__(self):
        return iter((WhitenessFit(self.q, self.eps, self.failed), self.epochs_q, self.epochs_eps))


def default_max_lag(window_samples, preferred=20) -> int:
    return max(2, min(preferred, window_samples // 2))


def innovation_whiteness_index(trace: InnovationTrace, w_r=0.020, fs=500.0, max_lag=None,
                               xi=None, kappa=None, mean_window=0.050,
                               causal=False) -> WhitenessResult:
    """Track the spectral color of the innovation through ``(q, eps)`` fits.

    ``max_lag=None`` picks ``min(20, w_r_samples // 2)``. Samples where the
    fit fails report ``eps = q = 0`` and are excluded from both epoch sets.
    """
    nr = seconds_to_samples(w_r, fs, minimum=4)
    if max_lag is None:
        max_lag = default_max_lag(nr)
    if max_lag < 2:
        raise ValidationError("max_lag must be at least 2")
    if nr < 2 * max_lag:
        raise ValidationError(
            f"whiteness window of {nr} samples is shorter than 2*max_lag={2 * max_lag}")
    a = _innovation_mean(trace, _mean_window_samples(mean_window, fs), causal)
    theta = trace.values - a
    fits = [fit_whiteness(row, nr, max_lag, causal=causal) for row in theta]
    q = np.array([f.q for f in fits])
    eps = np.array([f.eps for f in fits])
    failed = np.array([f.failed for f in fits])
    n = trace.n_channels
    res_q = _thresholded(q, _per_channel(xi, n), [None] * n, absolute=True, exclude=failed)
    res_e = _thresholded(eps, _per_channel(kappa, n), [None] * n, absolute=True,
                         exclude=failed)
    return WhitenessResult(q, eps, failed, [r[0] for r in res_q], [r[0] for r in res_e],
                           [r[1] for r in res_q], [r[1] for r in res_e])

"""Synthetic maternal/fetal mixtures, noise injection and detection metrics."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal as sps
from scipy.interpolate import PchipInterpolator

from .ecg import FETAL_KERNELS, MATERNAL_KERNELS, GaussianKernelSet, detect_rpeaks_lpd, synthesize_ecg
from .errors import NoPeaksFound, NscaError, TooFewPeaks, ValidationError
from .rng import make_rng
from .signal import MultichannelSignal

NOISE_KINDS = ("WGN", "NGN")


@dataclass(frozen=True)
class MixtureConfig:
    """Parameters of the synthetic abdominal recording.

    ``fetal_db`` and ``noise_source_db`` are powers relative to the mixed
    maternal contribution, summed over channels. ``fetal_db=-inf`` drops the
    fetal source. Besides the two ECG sources there are ``n_channels - 2``
    noise sources, alternating baseline wander and white noise.
    """

    fs: float = 500.0
    duration: float = 60.0
    n_channels: int = 4
    maternal_hr: float = 1.2
    fetal_hr: float = 2.2
    hr_variability: float = 0.02
    fetal_db: float = -15.0
    noise_source_db: float = -25.0
    identity_mixing: bool = False
    max_condition: float = 100.0
    maternal_kernels: GaussianKernelSet = MATERNAL_KERNELS
    fetal_kernels: GaussianKernelSet = FETAL_KERNELS

    def __post_init__(self):
        if self.n_channels < 2:
            raise ValidationError("need at least two channels for two ECG sources")
        if not self.fs > 0 or not self.duration > 0:
            raise ValidationError("fs and duration must be positive")
        if not 0 <= self.hr_variability < 0.5:
            raise ValidationError("hr_variability must be in [0, 0.5)")
        if not self.max_condition >= 1:
            raise ValidationError("max_condition must be at least 1")


@dataclass(frozen=True)
class MixtureGroundTruth:
    x: MultichannelSignal
    sources: MultichannelSignal
    mixing: np.ndarray
    fetal_rpeaks: np.ndarray
    maternal_rpeaks: np.ndarray
    source_names: tuple

    @property
    def fetal_index(self):
        return self.source_names.index("fetal")


def _hr_profile(rng, hr, variability, duration):
    n_beats = int(math.ceil(duration * hr * 1.5)) + 4
    prof = hr * (1.0 + variability * rng.standard_normal(n_beats))
    return np.clip(prof, 0.5, 4.5)


def _unit(v):
    v = v - v.mean()
    p = float(np.mean(v * v))
    return v / math.sqrt(p) if p > 0 else v


def _wander(rng, n, fs):
    t = np.arange(n) / fs
    freqs = rng.uniform(0.1, 0.5, size=3)
    phases = rng.uniform(0, 2 * np.pi, size=3)
    return _unit(sum(np.sin(2 * np.pi * f * t + p) for f, p in zip(freqs, phases)))


def _mixing(rng, n, max_condition):
    for _ in range(1000):
        m = rng.standard_normal((n, n))
        if np.linalg.cond(m) <= max_condition:
            return m
    raise ValidationError(f"could not draw a mixing matrix with condition <= {max_condition}")


def generate_mixture(cfg: MixtureConfig = MixtureConfig(), seed=0) -> MixtureGroundTruth:
    """Mix maternal, fetal and noise sources with a random full-rank matrix.

    The mixing is drawn from a standard normal and redrawn until its
    condition number is at most ``cfg.max_condition``.
    """
    rng = make_rng(seed, "mixture")
    n = int(round(cfg.duration * cfg.fs))
    m_prof = _hr_profile(rng, cfg.maternal_hr, cfg.hr_variability, cfg.duration)
    f_prof = _hr_profile(rng, cfg.fetal_hr, cfg.hr_variability, cfg.duration)
    m0, f0 = rng.uniform(-np.pi, np.pi, size=2)
    s_m, m_peaks, _ = synthesize_ecg(cfg.maternal_kernels, m_prof, cfg.fs, cfg.duration, m0)
    s_f, f_peaks, _ = synthesize_ecg(cfg.fetal_kernels, f_prof, cfg.fs, cfg.duration, f0)
    n_noise = cfg.n_channels - 2
    noise = [(_wander(rng, n, cfg.fs) if i % 2 == 0 else _unit(rng.standard_normal(n)))
             for i in range(n_noise)]
    if cfg.identity_mixing:
        mix = np.eye(cfg.n_channels)
    else:
        mix = _mixing(rng, cfg.n_channels, cfg.max_condition)

    # gains set the mixed power of each source relative to the maternal one
    norms = np.sum(mix * mix, axis=0)
    s_m = _unit(s_m)
    fetal_gain = 0.0
    if np.isfinite(cfg.fetal_db):
        fetal_gain = math.sqrt(10 ** (cfg.fetal_db / 10) * norms[0] / norms[1])
    elif cfg.fetal_db > 0:
        raise ValidationError("fetal_db must be finite or -inf")
    rows = [s_m, fetal_gain * _unit(s_f)]
    for i, v in enumerate(noise):
        rows.append(math.sqrt(10 ** (cfg.noise_source_db / 10) * norms[0] / norms[2 + i]) * v)
    sources = np.array(rows)
    names = ("maternal", "fetal") + tuple(
        "wander" if i % 2 == 0 else "white" for i in range(n_noise))
    x = MultichannelSignal(mix @ sources, cfg.fs)
    return MixtureGroundTruth(x, MultichannelSignal(sources, cfg.fs), mix,
                              np.asarray(f_peaks, dtype=np.int64),
                              np.asarray(m_peaks, dtype=np.int64), names)


def ngn_envelope(rng, n, fs, knot_spacing=1.0):
    """Smooth variance envelope spanning one decade, with unit mean.

    Log-variance knots are drawn every ``knot_spacing`` seconds, stretched so
    their minimum and maximum sit exactly one decade apart, and joined by a
    monotone cubic (PCHIP), which keeps the envelope below roughly 1 Hz.
    """
    n_knots = max(2, int(math.ceil(n / fs / knot_spacing)) + 1)
    u = rng.uniform(0.0, 1.0, size=n_knots)
    span = u.max() - u.min()
    u = (u - u.min()) / span if span > 0 else np.linspace(0.0, 1.0, n_knots)
    knots_t = np.linspace(0.0, (n - 1) / fs, n_knots)
    env = 10.0 ** PchipInterpolator(knots_t, u)(np.arange(n) / fs)
    return env / env.mean()


def add_noise(x: MultichannelSignal, kind="WGN", snr_db=np.inf, seed=0) -> MultichannelSignal:
    """Add independent Gaussian noise to every channel at ``snr_db``.

    The target noise power per channel is the channel's (mean-removed)
    power over ``10**(snr_db/10)``. ``"NGN"`` modulates the variance with
    :func:`ngn_envelope` normalized to unit mean, so the average power is
    the same as for ``"WGN"``. An infinite SNR returns ``x`` unchanged.
    """
    if kind not in NOISE_KINDS:
        raise ValidationError(f"unknown noise kind {kind!r}")
    snr = np.broadcast_to(np.asarray(snr_db, dtype=float), (x.n_channels,))
    if np.any(np.isnan(snr)) or np.any(snr == -np.inf):
        raise ValidationError("snr_db must be finite or +inf")
    if np.all(np.isposinf(snr)):
        return x
    rng = make_rng(seed, "noise", kind)
    data = np.array(x.data)
    for k in range(x.n_channels):
        z = rng.standard_normal(x.n_samples)
        if kind == "NGN":
            z *= np.sqrt(ngn_envelope(rng, x.n_samples, x.fs))
        if np.isposinf(snr[k]):
            continue
        power = float(np.var(data[k]))
        data[k] += math.sqrt(power / 10 ** (snr[k] / 10)) * z
    return MultichannelSignal(data, x.fs)


@dataclass(frozen=True)
class PeakMatch:
    true_positives: int
    false_positives: int
    false_negatives: int

    @property
    def f1_percent(self):
        denom = 2 * self.true_positives + self.false_positives + self.false_negatives
        return 100.0 * 2 * self.true_positives / denom if denom else 0.0


def f1_score(est_peaks, ref_peaks, tol=0.05, fs=500.0) -> PeakMatch:
    """Greedy one-to-one matching within ``+-tol`` seconds.

    Reference peaks are visited in time order and each takes the nearest
    unmatched estimate inside the tolerance; on a tie the earlier estimate
    wins. Two empty lists give F1 = 0.
    """
    est = np.sort(np.asarray(est_peaks, dtype=float))
    ref = np.sort(np.asarray(ref_peaks, dtype=float))
    radius = tol * fs
    used = np.zeros(est.size, dtype=bool)
    tp = 0
    for r in ref:
        lo = np.searchsorted(est, r - radius, side="left")
        hi = np.searchsorted(est, r + radius, side="right")
        best, best_d = -1, np.inf
        for j in range(lo, hi):
            if not used[j] and abs(est[j] - r) < best_d:
                best, best_d = j, abs(est[j] - r)
        if best >= 0:
            used[best] = True
            tp += 1
    return PeakMatch(tp, int(est.size - tp), int(ref.size - tp))


def heart_rate_series(peaks, fs):
    """Beat times (s) and instantaneous rates (bpm) from successive R-R intervals."""
    p = np.asarray(peaks, dtype=float)
    if p.size < 2:
        raise TooFewPeaks("need at least two peaks for a heart-rate series")
    return p[1:] / fs, 60.0 * fs / np.diff(p)


def hrm_score(est_peaks, ref_peaks, fs=500.0, tol_bpm=5.0):
    """Percent of reference beat rates matched within ``+-tol_bpm``.

    Each reference rate is compared with the estimated rate at the nearest
    estimated beat time.

    Returns
    -------
    hrm_percent : float
    hr_est, hr_ref : ndarray
        The two rate series in bpm.
    """
    t_ref, hr_ref = heart_rate_series(ref_peaks, fs)
    t_est, hr_est = heart_rate_series(est_peaks, fs)
    idx = np.clip(np.searchsorted(t_est, t_ref), 1, t_est.size - 1) if t_est.size > 1 else \
        np.zeros(t_ref.size, dtype=int)
    if t_est.size > 1:
        left = idx - 1
        idx = np.where(np.abs(t_est[left] - t_ref) <= np.abs(t_est[idx] - t_ref), left, idx)
    ok = np.abs(hr_est[idx] - hr_ref) <= tol_bpm
    return 100.0 * float(np.mean(ok)), hr_est, hr_ref


@dataclass(frozen=True)
class MetricReport:
    hrm_percent: float
    f1_percent: float
    true_positives: int
    false_positives: int
    false_negatives: int
    hr_series_est: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    hr_series_ref: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))

    def to_dict(self):
        return {
            "hrm_percent": self.hrm_percent,
            "f1_percent": self.f1_percent,
            "true_positives": self.true_positives,
            "false_positives": self.false_positives,
            "false_negatives": self.false_negatives,
            "hr_series_est": [float(v) for v in self.hr_series_est],
            "hr_series_ref": [float(v) for v in self.hr_series_ref],
        }


def evaluate_peaks(est_peaks, ref_peaks, fs=500.0, tol=0.05, tol_bpm=5.0) -> MetricReport:
    """F1 and HR_m together. Fewer than two estimated peaks score HR_m = 0."""
    m = f1_score(est_peaks, ref_peaks, tol, fs)
    try:
        hrm, hr_est, hr_ref = hrm_score(est_peaks, ref_peaks, fs, tol_bpm)
    except TooFewPeaks:
        if len(ref_peaks) < 2:
            raise
        hrm, hr_est = 0.0, np.empty(0)
        hr_ref = heart_rate_series(ref_peaks, fs)[1]
    return MetricReport(hrm, m.f1_percent, m.true_positives, m.false_positives,
                        m.false_negatives, hr_est, hr_ref)


# channel selection

@dataclass(frozen=True)
class FetalPeakParams:
    band: tuple = (10.0, 45.0)
    min_rr: float = 0.3
    rr_range: tuple = (0.3, 0.6)


def qrs_band(s, fs, band=(10.0, 45.0)):
    hi = min(band[1], 0.45 * fs)
    sos = sps.butter(2, [band[0], hi], btype="bandpass", fs=fs, output="sos")
    return sps.sosfiltfilt(sos, np.asarray(s, dtype=float))


def fetal_peaks(s, fs, params: FetalPeakParams = FetalPeakParams()):
    """Band-pass then run the local peak detector with a fetal refractory time."""
    return detect_rpeaks_lpd(qrs_band(s, fs, params.band), fs, min_rr=params.min_rr)


def fetal_sqi(peaks, fs, rr_range=(0.3, 0.6)) -> float:
    """Fraction of R-R intervals in the fetal range, discounted by irregularity."""
    if len(peaks) < 3:
        return 0.0
    rr = np.diff(np.asarray(peaks, dtype=float)) / fs
    in_range = np.mean((rr >= rr_range[0]) & (rr <= rr_range[1]))
    cv = float(np.std(rr) / np.mean(rr))
    return float(in_range / (1.0 + cv))


def select_fetal_channel(y: MultichannelSignal, params: FetalPeakParams = FetalPeakParams()):
    """Pick the component that looks most like a fetal ECG.

    Returns ``(index, peaks, sqis)``. The choice depends only on channel
    content; ties go to the lower index.
    """
    sqis = np.zeros(y.n_channels)
    peaks = []
    for k in range(y.n_channels):
        try:
            p = fetal_peaks(y.data[k], y.fs, params)
        except NoPeaksFound:
            p = np.empty(0, dtype=np.int64)
        peaks.append(p)
        sqis[k] = fetal_sqi(p, y.fs, params.rr_range)
    best = int(np.argmax(sqis))
    return best, peaks[best], sqis


def score_components(y: MultichannelSignal, fetal_rpeaks, tol=0.05,
                     params: FetalPeakParams = FetalPeakParams()):
    """Channel selection followed by F1 and HR_m against the reference peaks."""
    k, peaks, _ = select_fetal_channel(y, params)
    return k, evaluate_peaks(peaks, fetal_rpeaks, y.fs, tol)


# SNR sweep

@dataclass(frozen=True)
class SweepConfig:
    modes: tuple = ("GEVD-union",)
    detector_sets: tuple = (("lpe", "inn_mean", "inn_var", "inn_eps", "inn_q"),)
    snr_db: tuple = (-5.0, 0.0, 5.0, 10.0, 15.0)
    noise_kinds: tuple = NOISE_KINDS
    n_trials: int = 10
    seed: int = 0
    mixture: MixtureConfig = field(default_factory=lambda: MixtureConfig(duration=20.0))

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValidationError("n_trials must be at least 1")
        bad = [k for k in self.noise_kinds if k not in NOISE_KINDS]
        if bad:
            raise ValidationError(f"unknown noise kinds {bad}")


SWEEP_COLUMNS = ("mode", "detector", "noise", "snr_db", "trial", "f1", "hrm", "tp", "fp", "fn",
                 "error")


def snr_sweep(cfg: SweepConfig, pipeline_cfg=None):
    """Run every (mode, detector set, noise, SNR, trial) cell.

    Each trial draws its own mixture from ``(seed, trial)``; the noise
    stream is keyed by ``(seed, trial, kind, snr)``. Failed runs are
    recorded with NaN scores and the error kind.

    Returns
    -------
    rows : list of dict
        One row per cell with the keys in ``SWEEP_COLUMNS``.
    """
    from .pipeline import PipelineConfig, run_nsca

    base = pipeline_cfg if pipeline_cfg is not None else PipelineConfig()
    rows = []
    for trial in range(cfg.n_trials):
        truth = generate_mixture(cfg.mixture, seed=cfg.seed * 100_003 + trial)
        for kind in cfg.noise_kinds:
            for snr in cfg.snr_db:
                noisy = add_noise(truth.x, kind, snr, seed=_noise_seed(cfg.seed, trial, snr))
                for mode in cfg.modes:
                    for dets in cfg.detector_sets:
                        row = {"mode": mode, "detector": "+".join(dets), "noise": kind,
                               "snr_db": float(snr), "trial": trial}
                        try:
                            pcfg = replace(base, mode=mode, detector_selection=tuple(dets))
                            with warnings.catch_warnings():
                                warnings.simplefilter("ignore")
                                out = run_nsca(noisy, pcfg)
                            _, rep = score_components(out.components, truth.fetal_rpeaks)
                            row.update(f1=rep.f1_percent, hrm=rep.hrm_percent,
                                       tp=rep.true_positives, fp=rep.false_positives,
                                       fn=rep.false_negatives, error="")
                        except NscaError as exc:
                            row.update(f1=math.nan, hrm=math.nan, tp=0, fp=0,
                                       fn=int(truth.fetal_rpeaks.size), error=exc.kind)
                        rows.append(row)
    return rows


def _noise_seed(seed, trial, snr):
    # snr may be fractional; key on hundredths of a dB (noiseless cells draw nothing)
    level = int(round(snr * 100)) if math.isfinite(snr) else 0
    return (int(seed) * 1_000_003 + trial * 10_007 + level) & 0x7FFFFFFF


def summarize_sweep(rows):
    """Mean and std per cell over trials, plus counts pooled over trials."""
    groups = {}
    for r in rows:
        groups.setdefault((r["mode"], r["detector"], r["noise"], r["snr_db"]), []).append(r)
    out = []
    for (mode, det, noise, snr), rs in groups.items():
        f1 = np.array([r["f1"] for r in rs], dtype=float)
        hrm = np.array([r["hrm"] for r in rs], dtype=float)
        ok = np.isfinite(f1)
        tp = sum(r["tp"] for r in rs)
        fp = sum(r["fp"] for r in rs)
        fn = sum(r["fn"] for r in rs)
        pooled = PeakMatch(tp, fp, fn).f1_percent
        out.append({
            "mode": mode, "detector": det, "noise": noise, "snr_db": snr,
            "n_trials": len(rs), "n_failed": int((~ok).sum()),
            "f1_mean": float(np.mean(f1[ok])) if ok.any() else math.nan,
            "f1_std": float(np.std(f1[ok])) if ok.any() else math.nan,
            "hrm_mean": float(np.mean(hrm[ok])) if ok.any() else math.nan,
            "hrm_std": float(np.std(hrm[ok])) if ok.any() else math.nan,
            "f1_pooled": pooled,
        })
    return out

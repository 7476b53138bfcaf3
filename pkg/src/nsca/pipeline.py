"""End-to-end nonstationary component analysis for fetal ECG extraction.

The steps are: maternal R-peaks on a reference channel, a synchronous
average beat and Gaussian-kernel fit per channel, an EKF per channel whose
innovation feeds the nonstationarity detectors, fusion of the resulting
epochs, and finally a GEVD or AJD of epoch covariances against the full
record covariance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from . import fusion
from .detectors import (
    LpeConfig,
    innovation_mean_index,
    innovation_variance_index,
    innovation_whiteness_index,
    lpe_index,
    seconds_to_samples,
)
from .ecg import (
    average_beat,
    calibrate_ekf,
    detect_rpeaks_lpd,
    ekf_mecg,
    fit_gaussian_kernels,
    phase_from_rpeaks,
)
from .detectors import InnovationTrace
from .errors import ConfigError, EmptyEpochSet, InsufficientEpochs, InsufficientStatistics
from .separation import ajd, apply_transform, gevd
from .signal import EpochSet, MultichannelSignal, covariance_full, covariance_on_epochs

DETECTORS = ("lpe", "inn_mean", "inn_var", "inn_eps", "inn_q")
MODES = ("GEVD-single", "GEVD-union", "GEVD-intersection", "AJD")


@dataclass(frozen=True)
class DetectorParams:
    """Window lengths in seconds for the fetal-side detectors."""

    lpe_w1: float = 0.010
    lpe_w2: float = 0.200
    w_a: float = 0.010
    w_var: float = 0.010
    w_r: float = 0.020
    mean_window: float | None = 0.050
    max_lag: int | None = None
    causal: bool = False


@dataclass(frozen=True)
class MaternalParams:
    """Maternal R-peak detection, beat model and QRS exclusion settings."""

    min_rr: float = 0.4
    lpe_w1: float = 0.020
    lpe_w2: float = 0.400
    expansion: float = 0.015
    exclude: bool = True
    n_kernels: int = 7
    n_bins: int = 250
    r_phase: float = 0.05 ** 2
    method: str = "exact"


@dataclass(frozen=True)
class PipelineConfig:
    mode: str = "GEVD-union"
    detector_selection: tuple = DETECTORS
    reference_channel_maternal: int = 0
    candidate_channel_fetal: int | tuple | None = None
    per_channel_matrices: bool = False
    remove_mean: bool = True
    highpass_hz: float | None = None
    detector: DetectorParams = field(default_factory=DetectorParams)
    maternal: MaternalParams = field(default_factory=MaternalParams)

    def __post_init__(self):
        sel = tuple(self.detector_selection)
        object.__setattr__(self, "detector_selection", sel)
        if not sel:
            raise ConfigError("detector_selection must not be empty")
        unknown = [d for d in sel if d not in DETECTORS]
        if unknown or len(set(sel)) != len(sel):
            raise ConfigError(f"bad detector selection {sel}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode == "AJD" and len(sel) < 2 and not self.per_channel_matrices:
            raise ConfigError("AJD needs at least two covariance matrices")
        if self.highpass_hz is not None and not self.highpass_hz > 0:
            raise ConfigError("highpass_hz must be positive")
        if isinstance(self.candidate_channel_fetal, list):
            object.__setattr__(self, "candidate_channel_fetal",
                               tuple(self.candidate_channel_fetal))


@dataclass(frozen=True)
class EpochBuild:
    """Everything the detection stage produced.

    ``sets`` maps names to epoch sets: ``maternal_qrs`` (dilated),
    ``<detector>[k]`` per channel, ``<detector>`` as the channel union,
    ``channel[k]`` as the detector union of channel ``k`` and ``fused`` as the
    set selected by the mode. ``traces`` holds the index vectors behind them.
    """

    sets: dict
    traces: dict
    maternal_peaks: np.ndarray
    mecg: np.ndarray
    innovation: InnovationTrace
    channels: tuple


@dataclass(frozen=True)
class Ranking:
    order: np.ndarray
    scores: np.ndarray

    def as_list(self):
        return [{"component": int(i), "score": float(self.scores[i])} for i in self.order]


@dataclass(frozen=True)
class SeparationOutput:
    components: MultichannelSignal
    demixing: np.ndarray
    epoch_sets_used: dict
    ranking: Ranking
    eigenvalues: np.ndarray | None = None
    build: EpochBuild | None = None


def preprocess(x: MultichannelSignal, cfg: PipelineConfig) -> MultichannelSignal:
    if cfg.highpass_hz is None:
        return x
    sos = sps.butter(2, cfg.highpass_hz, btype="highpass", fs=x.fs, output="sos")
    return MultichannelSignal(sps.sosfiltfilt(sos, x.data, axis=1), x.fs)


def _candidates(cfg, n_ch):
    c = cfg.candidate_channel_fetal
    if c is None:
        return tuple(range(n_ch))
    chans = (c,) if isinstance(c, (int, np.integer)) else tuple(c)
    if not chans or any(not 0 <= k < n_ch for k in chans):
        raise ConfigError(f"candidate channels {chans} outside 0..{n_ch - 1}")
    return tuple(int(k) for k in chans)


def maternal_peaks(x: MultichannelSignal, cfg: PipelineConfig) -> np.ndarray:
    ref = cfg.reference_channel_maternal
    if not 0 <= ref < x.n_channels:
        raise ConfigError(f"reference channel {ref} outside 0..{x.n_channels - 1}")
    s = x.data[ref]
    # the peak search runs on a QRS band; the filter is zero-phase
    hi = min(40.0, 0.45 * x.fs)
    if hi > 5.0:
        sos = sps.butter(2, [5.0, hi], btype="bandpass", fs=x.fs, output="sos")
        s = sps.sosfiltfilt(sos, s)
    return detect_rpeaks_lpd(s, x.fs, min_rr=cfg.maternal.min_rr)


def _track_channels(x, peaks, channels, mp: MaternalParams):
    phase = phase_from_rpeaks(peaks, x.n_samples)
    mecg = np.zeros((len(channels), x.n_samples))
    values = np.zeros_like(mecg)
    gammas = np.ones_like(mecg)
    for row, k in enumerate(channels):
        xk = x.data[k]
        mean_beat, std_beat, phases = average_beat(xk, peaks, mp.n_bins)
        kernels = fit_gaussian_kernels(mean_beat, mp.n_kernels, phases).kernels
        ekf_cfg = calibrate_ekf(xk, phase, kernels, std_beat, peaks, mp.r_phase, mp.method)
        out = ekf_mecg(xk, phase, kernels, ekf_cfg)
        mecg[row] = out.mecg_estimate
        values[row] = out.innovation.values[0]
        gammas[row] = out.innovation.predicted_variance[0]
    return mecg, InnovationTrace(values, gammas)


def _maternal_qrs(x, cfg):
    mp = cfg.maternal
    s = x.data[cfg.reference_channel_maternal]
    n = x.n_samples
    if not mp.exclude:
        return EpochSet.empty(n), None
    res = lpe_index(s, x.fs, LpeConfig(w1=mp.lpe_w1, w2=mp.lpe_w2))
    pad = int(round(mp.expansion * x.fs))
    return fusion.dilate(res.epochs, pad, pad), res.index


def _run_detectors(trace, fs, dp: DetectorParams, selection):
    """Per-detector lists of per-channel epoch sets and the index traces."""
    per_det, traces = {}, {}
    if "lpe" in selection:
        lcfg = LpeConfig(w1=dp.lpe_w1, w2=dp.lpe_w2)
        results = [lpe_index(row, fs, lcfg) for row in trace.values]
        per_det["lpe"] = [r.epochs for r in results]
        traces["rho"] = np.array([r.index for r in results])
    if "inn_mean" in selection:
        res = innovation_mean_index(trace, dp.w_a, fs, causal=dp.causal)
        per_det["inn_mean"] = res.epochs
        traces["a"] = res.index
    if "inn_var" in selection:
        res = innovation_variance_index(trace, dp.w_var, fs, mean_window=dp.mean_window,
                                        causal=dp.causal)
        per_det["inn_var"] = res.epochs
        traces["gamma"] = res.index
    if "inn_eps" in selection or "inn_q" in selection:
        res = innovation_whiteness_index(trace, dp.w_r, fs, max_lag=dp.max_lag,
                                         mean_window=dp.mean_window, causal=dp.causal)
        if "inn_q" in selection:
            per_det["inn_q"] = res.epochs_q
        if "inn_eps" in selection:
            per_det["inn_eps"] = res.epochs_eps
        traces["q"] = res.q
        traces["eps"] = res.eps
    return per_det, traces


def build_fetal_epochs(x: MultichannelSignal, cfg: PipelineConfig = PipelineConfig()) -> EpochBuild:
    """Run the detectors on every candidate channel and fuse their epochs.

    Maternal QRS epochs come from a local power envelope on the reference
    channel, dilated by ``cfg.maternal.expansion`` on each side, and are
    removed from every fetal candidate set.
    """
    x = preprocess(x, cfg)
    channels = _candidates(cfg, x.n_channels)
    peaks = maternal_peaks(x, cfg)
    mecg, trace = _track_channels(x, peaks, channels, cfg.maternal)
    maternal, maternal_rho = _maternal_qrs(x, cfg)
    per_det, traces = _run_detectors(trace, x.fs, cfg.detector, cfg.detector_selection)
    if maternal_rho is not None:
        traces["maternal_rho"] = maternal_rho[None, :]

    sets = {"maternal_qrs": maternal}
    for det in cfg.detector_selection:
        cleaned = [fusion.exclude(ep, maternal) for ep in per_det[det]]
        for k, ep in zip(channels, cleaned):
            sets[f"{det}[{k}]"] = ep
        sets[det] = fusion.union(cleaned)
    per_channel = []
    for k in channels:
        theta_k = fusion.union([sets[f"{det}[{k}]"] for det in cfg.detector_selection])
        sets[f"channel[{k}]"] = theta_k
        per_channel.append(theta_k)

    if cfg.mode == "GEVD-single":
        fused = sets[cfg.detector_selection[0]]
    elif cfg.mode == "GEVD-intersection":
        fused = fusion.intersection(per_channel)
    else:
        fused = fusion.union(per_channel)
    sets["fused"] = fused
    return EpochBuild(sets, traces, peaks, mecg, trace, channels)


def rank_components(y: MultichannelSignal, epochs: EpochSet, remove_mean=True) -> Ranking:
    """Order components by their power over ``epochs`` relative to the whole record.

    The score of component ``i`` is ``var_P(y_i) / var_T(y_i)``, the
    empirical Rayleigh quotient, with the same mean convention as the
    covariance estimates. For a GEVD output it equals the generalized
    eigenvalue. Ties keep the lower index first.
    """
    if len(epochs) == 0:
        raise EmptyEpochSet("cannot rank components on an empty epoch set")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", InsufficientStatistics)
        inside = np.diag(covariance_on_epochs(y, epochs, remove_mean))
    total = np.diag(covariance_full(y, remove_mean))
    scores = np.divide(inside, total, out=np.zeros_like(inside), where=total > 0)
    order = np.lexsort((np.arange(scores.size), -scores))
    return Ranking(order, scores)


def _check_mass(n_epochs, n_ch, what):
    if n_epochs < n_ch:
        raise InsufficientEpochs(
            f"{what} has {n_epochs} samples, fewer than the {n_ch} channels")
    if n_epochs < 3 * n_ch:
        warnings.warn(f"{what} has only {n_epochs} samples for {n_ch} channels",
                      InsufficientStatistics, stacklevel=3)


def separate(x: MultichannelSignal, build: EpochBuild,
             cfg: PipelineConfig = PipelineConfig()) -> SeparationOutput:
    """Covariance construction and GEVD/AJD given the detection results."""
    x = preprocess(x, cfg)
    n_ch = x.n_channels
    c_x = covariance_full(x, cfg.remove_mean)
    fused = build.sets["fused"]
    used = {"fused": fused, "maternal_qrs": build.sets["maternal_qrs"]}
    eigenvalues = None
    if cfg.mode == "AJD":
        if cfg.per_channel_matrices:
            names = [f"{d}[{k}]" for d in cfg.detector_selection for k in build.channels]
        else:
            names = list(cfg.detector_selection)
        usable = [nm for nm in names if len(build.sets[nm]) >= n_ch]
        if len(usable) < 2:
            raise InsufficientEpochs(
                f"only {len(usable)} detector epoch sets have at least {n_ch} samples")
        mats = []
        for nm in usable:
            used[nm] = build.sets[nm]
            if len(build.sets[nm]) < 3 * n_ch:
                warnings.warn(f"{nm} has only {len(build.sets[nm])} samples",
                              InsufficientStatistics, stacklevel=2)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", InsufficientStatistics)
                mats.append(covariance_on_epochs(x, build.sets[nm], cfg.remove_mean))
        w = ajd(mats, c_x).demixing
    else:
        what = "fused epoch set"
        _check_mass(len(fused), n_ch, what)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", InsufficientStatistics)
            c_theta = covariance_on_epochs(x, fused, cfg.remove_mean)
        res = gevd(c_theta, c_x)
        # most nonstationary component first
        w = res.eigenmatrix[:, ::-1]
        eigenvalues = res.eigenvalues[::-1].copy()
    y = apply_transform(w, x)
    ranking = rank_components(y, fused if len(fused) else EpochSet.full(x.n_samples),
                              cfg.remove_mean)
    return SeparationOutput(y, w, used, ranking, eigenvalues, build)


def run_nsca(x: MultichannelSignal, cfg: PipelineConfig = PipelineConfig()) -> SeparationOutput:
    """Extract nonstationary components from ``x``.

    Raises
    ------
    InsufficientEpochs
        When the fused epochs (or, for AJD, every detector's epochs) hold
        fewer samples than there are channels.
    """
    build = build_fetal_epochs(x, cfg)
    return separate(x, build, cfg)

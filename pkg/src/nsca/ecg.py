"""Gaussian-kernel ECG dynamic model and its extended Kalman filter.

The beat morphology is a sum of Gaussian kernels over the cardiac phase
``psi``::

    z(psi) = sum_i alpha_i * exp(-dpsi_i**2 / (2 * b_i**2)),  dpsi_i = wrap(psi - psi_i)

and the state ``(psi, s)`` evolves sample by sample as::

    psi(t+1) = wrap(psi(t) + omega(t))
    s(t+1)   = s(t) + [increment of z over the step] + w(t)

Two discretizations of the increment are available. ``"euler"`` is the
first-order form ``-omega * sum_i alpha_i dpsi_i / b_i**2 * exp(...)``;
``"exact"`` (default) uses ``z(psi + omega) - z(psi)``, which agrees with the
Euler form to first order in ``omega`` and reproduces the closed-form
waveform without drift.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.ndimage import maximum_filter1d

from .detectors import InnovationTrace
from .errors import NoPeaksFound, TooFewPeaks, ValidationError

TWO_PI = 2.0 * np.pi


def wrap_phase(x):
    """Map angles to ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), TWO_PI)


def _wrap(x):
    return math.pi - (math.pi - x) % TWO_PI


@dataclass(frozen=True)
class GaussianKernelSet:
    """Amplitudes ``alpha``, widths ``b`` (rad) and centers ``psi`` (rad)."""

    alpha: np.ndarray
    b: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        psi = wrap_phase(np.atleast_1d(np.asarray(self.psi, dtype=float)))
        if not (alpha.shape == b.shape == psi.shape) or alpha.ndim != 1 or alpha.size < 1:
            raise ValidationError("kernel parameter arrays must be 1-D of equal nonzero length")
        if np.any(b <= 0) or not np.all(np.isfinite(np.concatenate((alpha, b, psi)))):
            raise ValidationError("kernel widths must be positive and all parameters finite")
        for name, val in (("alpha", alpha), ("b", b), ("psi", psi)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def K(self):
        return self.alpha.size

    def scaled(self, c):
        return GaussianKernelSet(c * self.alpha, self.b, self.psi)

    def evaluate(self, phase) -> np.ndarray:
        """Closed-form waveform ``z`` at the given phases."""
        phase = np.asarray(phase, dtype=float)
        d = wrap_phase(phase[..., None] - self.psi)
        return np.sum(self.alpha * np.exp(-d * d / (2.0 * self.b ** 2)), axis=-1)

    def to_text(self) -> str:
        lines = ["# alpha b psi"]
        lines += [f"{float(a)!r} {float(b)!r} {float(p)!r}"
                  for a, b, p in zip(self.alpha, self.b, self.psi)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 3:
                raise ValidationError(f"kernel line needs 3 values: {line!r}")
            rows.append([float(p) for p in parts])
        if not rows:
            raise ValidationError("no kernels in parameter text")
        arr = np.array(rows)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2])


# P, Q, R, S, T waves; amplitudes relative to the R wave
MATERNAL_KERNELS = GaussianKernelSet(
    alpha=[0.12, -0.14, 1.0, -0.25, 0.30],
    b=[0.20, 0.045, 0.055, 0.05, 0.35],
    psi=[-1.15, -0.14, 0.0, 0.14, 1.55],
)
FETAL_KERNELS = GaussianKernelSet(
    alpha=[0.08, -0.10, 1.0, -0.20, 0.15],
    b=[0.18, 0.06, 0.075, 0.06, 0.30],
    psi=[-1.10, -0.20, 0.0, 0.20, 1.50],
)


@dataclass(frozen=True)
class PhaseSignal:
    """Wrapped cardiac phase and per-sample angular velocity (rad/sample)."""

    phi: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        omega = np.asarray(self.omega, dtype=float)
        if phi.shape != omega.shape or phi.ndim != 1:
            raise ValidationError("phase and omega must be 1-D of equal length")
        if np.any(omega <= 0):
            raise ValidationError("angular velocity must be positive")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "omega", omega)

    def __len__(self):
        return self.phi.size


def synthesize_ecg(kernels: GaussianKernelSet, hr_profile, fs, duration, phase0=-np.pi / 2,
                   method="exact"):
    """Generate a noise-free ECG by stepping the dynamic model.

    Parameters
    ----------
    kernels : GaussianKernelSet
    hr_profile : float or sequence of float
        Heart rate in Hz for each beat; the last value is held once the
        sequence runs out.
    fs : float
        Sampling rate in Hz.
    duration : float
        Length in seconds.
    phase0 : float
        Phase of the first sample.
    method : {"exact", "euler"}

    Returns
    -------
    signal : ndarray
    rpeaks : ndarray of int
        Samples where the phase crosses zero (nearest sample).
    phase : PhaseSignal
    """
    hr = np.atleast_1d(np.asarray(hr_profile, dtype=float))
    if hr.size == 0 or np.any(hr < 0.5) or np.any(hr > 4.5):
        raise ValidationError("heart rates must lie in [0.5, 4.5] Hz")
    n = int(round(duration * fs))
    if n < 2:
        raise ValidationError("duration too short")
    omegas = TWO_PI * hr / fs
    unwrapped = np.empty(n)
    omega = np.empty(n)
    psi = float(wrap_phase(phase0))
    beat = 0
    acc = psi
    for t in range(n):
        unwrapped[t] = acc
        w = omegas[min(beat, omegas.size - 1)]
        omega[t] = w
        prev = psi
        psi = _wrap(psi + w)
        acc += w
        if prev < 0.0 <= psi:
            beat += 1
    phi = wrap_phase(unwrapped)
    z = kernels.evaluate(phi)
    if method == "exact":
        s = z[0] + np.concatenate(([0.0], np.cumsum(np.diff(z))))
    elif method == "euler":
        s = np.empty(n)
        s[0] = z[0]
        for t in range(n - 1):
            s[t + 1] = s[t] + _euler_increment(phi[t], omega[t], kernels)
    else:
        raise ValidationError(f"unknown method {method!r}")
    cross = np.flatnonzero((phi[:-1] < 0) & (phi[1:] >= 0)) + 1
    pick_prev = np.abs(phi[cross - 1]) < np.abs(phi[cross])
    rpeaks = cross - pick_prev.astype(int)
    return s, rpeaks, PhaseSignal(phi, omega)


def _euler_increment(psi, omega, kernels):
    total = 0.0
    for a, b, c in zip(kernels.alpha, kernels.b, kernels.psi):
        d = _wrap(psi - c)
        total += a * d / (b * b) * math.exp(-d * d / (2.0 * b * b))
    return -omega * total


def detect_rpeaks_lpd(s, fs, min_rr=0.3, polarity="auto", min_height=0.3):
    """Local peak detector over a sliding window.

    A sample is a peak when it is the maximum (after polarity normalization)
    within ``+-min_rr/2`` and reaches ``min_height`` times the 99th percentile
    of the normalized amplitude. Peaks closer than ``min_rr`` are thinned
    greedily, keeping the taller one.
    """
    s = np.asarray(s, dtype=float)
    if min_rr < 0.2:
        raise ValidationError("min_rr must be at least 0.2 s")
    h = max(1, int(round(min_rr * fs / 2)))
    if s.size < 3:
        raise NoPeaksFound("signal too short")
    x = s - np.median(s)
    if polarity == "auto":
        polarity = "pos" if np.percentile(x, 99.5) >= -np.percentile(x, 0.5) else "neg"
    if polarity == "neg":
        x = -x
    elif polarity != "pos":
        raise ValidationError(f"unknown polarity {polarity!r}")
    ref = np.percentile(np.abs(x), 99)
    if not ref > 0:
        # sparse signals (isolated impulses) fall back to the peak amplitude
        ref = np.max(np.abs(x))
    if not ref > 0:
        raise NoPeaksFound("flat signal")
    local_max = maximum_filter1d(x, size=2 * h + 1, mode="constant", cval=-np.inf)
    cand = np.flatnonzero((x == local_max) & (x >= min_height * ref) & (x > 0))
    if cand.size:
        # plateaus: keep the first sample of each run of equal maxima
        keep = np.ones(cand.size, dtype=bool)
        keep[1:] = ~((np.diff(cand) == 1) & (x[cand[1:]] == x[cand[:-1]]))
        cand = cand[keep]
    min_gap = int(round(min_rr * fs))
    taken = []
    for c in cand[np.argsort(-x[cand], kind="stable")]:
        i = bisect.bisect_left(taken, c)
        if i > 0 and c - taken[i - 1] < min_gap:
            continue
        if i < len(taken) and taken[i] - c < min_gap:
            continue
        taken.insert(i, int(c))
    if not taken:
        raise NoPeaksFound("no peaks above threshold")
    return np.array(taken, dtype=np.int64)


def phase_from_rpeaks(peaks, n_samples, fs=None) -> PhaseSignal:
    """Linear phase ramp from 0 at each R-peak to 2*pi at the next.

    Samples before the first and after the last peak use the nearest
    interval's angular velocity.
    """
    peaks = np.asarray(peaks, dtype=np.int64)
    if peaks.size < 2:
        raise TooFewPeaks("need at least two R-peaks for a phase signal")
    if np.any(np.diff(peaks) <= 0) or peaks[0] < 0 or peaks[-1] >= n_samples:
        raise ValidationError("R-peaks must be strictly increasing within the record")
    t = np.arange(n_samples)
    rr = np.diff(peaks).astype(float)
    seg = np.clip(np.searchsorted(peaks, t, side="right") - 1, 0, rr.size - 1)
    omega = TWO_PI / rr[seg]
    unwrapped = omega * (t - peaks[seg])
    return PhaseSignal(wrap_phase(unwrapped), omega)


def average_beat(s, peaks, n_bins=250):
    """Synchronous average over complete beats on a phase grid.

    Bin ``k`` sits at phase ``2*pi*k/n_bins`` so bin 0 is the R-peak. Each
    complete beat contributes the sample nearest to every bin position.

    Returns
    -------
    mean_beat, std_beat : ndarray, shape (n_bins,)
    phases : ndarray
        Bin phases wrapped to ``(-pi, pi]``.
    """
    s = np.asarray(s, dtype=float)
    peaks = np.asarray(peaks, dtype=np.int64)
    if n_bins < 16:
        raise ValidationError("n_bins must be at least 16")
    if peaks.size < 4:
        raise TooFewPeaks("need at least three complete beats")
    frac = np.arange(n_bins) / n_bins
    starts = peaks[:-1, None]
    rr = np.diff(peaks)[:, None]
    idx = np.rint(starts + frac * rr).astype(np.int64)
    beats = s[np.clip(idx, 0, s.size - 1)]
    mean_beat = beats.mean(axis=0)
    std_beat = beats.std(axis=0)
    return mean_beat, std_beat, wrap_phase(TWO_PI * frac)


@dataclass(frozen=True)
class KernelFit:
    kernels: GaussianKernelSet
    residual_rms: float
    diverged: bool = False


def _initial_kernels(mean_beat, phases, n_kernels):
    y = np.asarray(mean_beat, dtype=float)
    n = y.size
    prev, nxt = np.roll(y, 1), np.roll(y, -1)
    curv = np.abs(nxt - 2 * y + prev)
    extrema = np.flatnonzero(((y - prev) * (nxt - y) <= 0) & (curv > 0))
    ranked = list(extrema[np.argsort(-curv[extrema], kind="stable")])
    if len(ranked) < n_kernels:
        rest = [i for i in np.argsort(-curv, kind="stable") if i not in set(ranked)]
        ranked += rest
    centers = np.array(ranked[:n_kernels])
    if centers.size < n_kernels:
        centers = np.linspace(0, n, n_kernels, endpoint=False).astype(int)
    return y[centers], np.full(n_kernels, 0.1), phases[centers]


def _gauss_model(params, phases, k):
    a, b, c = params[:k], params[k:2 * k], params[2 * k:]
    d = wrap_phase(phases[:, None] - c)
    e = np.exp(-d * d / (2 * b * b))
    return e, d, a, b


def _greedy_kernels(mean_beat, phases, n_kernels):
    """Peel kernels off the residual one at a time, largest peak first."""
    r = np.asarray(mean_beat, dtype=float).copy()
    step = TWO_PI / r.size
    a, b, c = [], [], []
    for _ in range(n_kernels):
        i = int(np.argmax(np.abs(r)))
        amp = r[i]
        half = np.abs(r) >= 0.5 * abs(amp)
        j = 0
        while j < r.size // 2 and half[(i + j + 1) % r.size] and half[(i - j - 1) % r.size]:
            j += 1
        width = max((j + 0.5) * step / np.sqrt(2 * np.log(2)), step)
        a.append(amp)
        b.append(width)
        c.append(phases[i])
        d = wrap_phase(phases - phases[i])
        r -= amp * np.exp(-d * d / (2 * width * width))
    return np.array(a), np.array(b), np.array(c)


def fit_gaussian_kernels(mean_beat, n_kernels=7, phases=None, tol=1e-10,
                         max_nfev=None) -> KernelFit:
    """Nonlinear least-squares fit of a Gaussian-kernel sum to an average beat.

    The primary start places kernels at the ``n_kernels`` sharpest extrema
    of the beat with 0.1 rad width and the beat value as amplitude. A second
    start peels kernels greedily off the residual; the better fit is kept.
    """
    y = np.asarray(mean_beat, dtype=float)
    if not 1 <= n_kernels <= 11:
        raise ValidationError("n_kernels must be between 1 and 11")
    if phases is None:
        phases = wrap_phase(TWO_PI * np.arange(y.size) / y.size)
    phases = np.asarray(phases, dtype=float)
    a0, b0, c0 = _initial_kernels(y, phases, n_kernels)
    init = GaussianKernelSet(a0, b0, c0)
    if not np.any(y):
        return KernelFit(GaussianKernelSet(np.zeros(n_kernels), b0, c0), 0.0)
    k = n_kernels

    def resid(p):
        e, _, a, _ = _gauss_model(p, phases, k)
        return e @ a - y

    def jac(p):
        e, d, a, b = _gauss_model(p, phases, k)
        return np.hstack((e, a * e * d * d / b ** 3, a * e * d / b ** 2))

    lo = np.concatenate((np.full(k, -np.inf), np.full(k, 1e-3), np.full(k, -3 * np.pi)))
    hi = np.concatenate((np.full(k, np.inf), np.full(k, TWO_PI), np.full(k, 3 * np.pi)))
    x0 = np.concatenate((a0, b0, c0))
    init_rms = float(np.sqrt(np.mean(resid(x0) ** 2)))
    best = None
    for start in (x0, np.concatenate(_greedy_kernels(y, phases, k))):
        start = np.clip(start, lo, hi)
        try:
            sol = optimize.least_squares(resid, start, jac=jac, bounds=(lo, hi), method="trf",
                                         xtol=tol, ftol=tol, gtol=tol,
                                         max_nfev=max_nfev or 60 * k)
        except (ValueError, np.linalg.LinAlgError):
            continue
        if not np.all(np.isfinite(sol.x)):
            continue
        rms = float(np.sqrt(np.mean(sol.fun ** 2)))
        if best is None or rms < best[1]:
            best = (sol.x, rms)
    if best is None or best[1] > init_rms:
        return KernelFit(init, init_rms, diverged=True)
    p, rms = best
    return KernelFit(GaussianKernelSet(p[:k], p[k:2 * k], p[2 * k:]), rms)


@dataclass(frozen=True)
class EkfConfig:
    """Noise variances of the two-state filter.

    ``kernel_param_noise`` holds variances for deviations of every kernel's
    (alpha, b, psi); they are folded into the process noise of ``s`` through
    the model's parameter gradients.
    """

    q_process: float = 1e-4
    q_phase: float = 1e-6
    r_ecg: float = 1e-2
    r_phase: float = 0.05 ** 2
    kernel_param_noise: tuple = (0.0, 0.0, 0.0)
    method: str = "exact"

    def __post_init__(self):
        for name in ("q_process", "q_phase", "r_ecg", "r_phase"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if len(self.kernel_param_noise) != 3 or min(self.kernel_param_noise) < 0:
            raise ValidationError("kernel_param_noise needs three nonnegative variances")
        if self.method not in ("exact", "euler"):
            raise ValidationError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class EkfOutput:
    """Filtered estimates per sample.

    ``state_cov`` has shape (n, 2, 2) and holds the posterior covariance of
    ``(psi, s)``; ``phase_estimate`` is the posterior ``psi``.
    """

    mecg_estimate: np.ndarray
    innovation: InnovationTrace
    state_cov_trace: np.ndarray
    diverged: bool = False
    phase_estimate: np.ndarray | None = None
    state_cov: np.ndarray | None = None


def _zprime(psi, kernels):
    total = 0.0
    for a, b, c in zip(kernels.alpha, kernels.b, kernels.psi):
        d = _wrap(psi - c)
        total -= a * d / (b * b) * math.exp(-d * d / (2.0 * b * b))
    return total


def _z(psi, kernels):
    total = 0.0
    for a, b, c in zip(kernels.alpha, kernels.b, kernels.psi):
        d = _wrap(psi - c)
        total += a * math.exp(-d * d / (2.0 * b * b))
    return total


def state_transition(state, omega, kernels, method="exact"):
    """One noise-free step of the model. Returns the next ``(psi, s)``."""
    psi, s = state
    if method == "exact":
        return _wrap(psi + omega), s + _z(psi + omega, kernels) - _z(psi, kernels)
    return _wrap(psi + omega), s + _euler_increment(psi, omega, kernels)


def transition_jacobian(state, omega, kernels, method="exact"):
    """Analytic Jacobian of :func:`state_transition` w.r.t. ``(psi, s)``."""
    psi = state[0]
    if method == "exact":
        dsdpsi = _zprime(psi + omega, kernels) - _zprime(psi, kernels)
    else:
        dsdpsi = 0.0
        for a, b, c in zip(kernels.alpha, kernels.b, kernels.psi):
            d = _wrap(psi - c)
            b2 = b * b
            dsdpsi -= omega * a / b2 * (1.0 - d * d / b2) * math.exp(-d * d / (2.0 * b2))
    return np.array([[1.0, 0.0], [dsdpsi, 1.0]])


def _param_noise(psi, omega, kernels, var, method):
    """Process-noise variance contributed by kernel-parameter uncertainty."""
    va, vb, vc = var
    total = 0.0
    for a, b, c in zip(kernels.alpha, kernels.b, kernels.psi):
        if method == "exact":
            ga = gb = gc = 0.0
            for sign, p in ((1.0, psi + omega), (-1.0, psi)):
                d = _wrap(p - c)
                e = math.exp(-d * d / (2.0 * b * b))
                ga += sign * e
                gb += sign * a * e * d * d / b ** 3
                gc += sign * a * e * d / (b * b)
        else:
            d = _wrap(psi - c)
            e = math.exp(-d * d / (2.0 * b * b))
            ga = -omega * d / (b * b) * e
            gb = -omega * a * d * e * (d * d / b ** 5 - 2.0 / b ** 3)
            gc = omega * a / (b * b) * e * (1.0 - d * d / (b * b))
        total += ga * ga * va + gb * gb * vb + gc * gc * vc
    return total


def ekf_mecg(x, phase: PhaseSignal, kernels: GaussianKernelSet, cfg: EkfConfig,
             divergence_factor=1e6) -> EkfOutput:
    """Track the maternal ECG in one channel and return its innovation.

    The state is ``(psi, s)``; the observations are the phase ``phase.phi``
    and the channel ``x``. The innovation is ``x(t) - s_pred(t)`` and its
    predicted variance is ``P_pred[s, s] + r_ecg``.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if len(phase) != n:
        raise ValidationError(f"phase has {len(phase)} samples, signal has {n}")
    alpha = [float(v) for v in kernels.alpha]
    bw = [float(v) for v in kernels.b]
    ctr = [float(v) for v in kernels.psi]
    ks = list(zip(alpha, bw, ctr))
    exact = cfg.method == "exact"
    use_param = any(v > 0 for v in cfg.kernel_param_noise)
    phi_obs = phase.phi.tolist()
    omegas = phase.omega.tolist()
    xs = x.tolist()
    qpsi, qs, rphi, rx = cfg.q_phase, cfg.q_process, cfg.r_phase, cfg.r_ecg

    def zz(p):
        z = zp = 0.0
        for a, b, c in ks:
            d = p - c
            if d > math.pi or d <= -math.pi:
                d = _wrap(d)
            b2 = b * b
            e = a * math.exp(-d * d / (2.0 * b2))
            z += e
            zp -= e * d / b2
        return z, zp

    psi, s = phi_obs[0], xs[0]
    p11, p12, p22 = rphi, 0.0, max(float(np.var(x)), rx)
    trace0 = p11 + p22
    est = np.empty(n)
    innov = np.empty(n)
    gamma = np.empty(n)
    ptrace = np.empty(n)
    pest = np.empty(n)
    cov = np.empty((n, 3))
    diverged = False
    for t in range(n):
        if t > 0:
            w = omegas[t - 1]
            if exact:
                z0, zp0 = zz(psi)
                z1, zp1 = zz(psi + w)
                s = s + z1 - z0
                f21 = zp1 - zp0
            else:
                inc = 0.0
                f21 = 0.0
                for a, b, c in ks:
                    d = _wrap(psi - c)
                    b2 = b * b
                    e = a * math.exp(-d * d / (2.0 * b2))
                    inc -= e * d / b2
                    f21 -= e / b2 * (1.0 - d * d / b2)
                s = s + w * inc
                f21 *= w
            qs_t = qs + (_param_noise(psi, w, kernels, cfg.kernel_param_noise, cfg.method)
                         if use_param else 0.0)
            psi = psi + w
            if psi > math.pi:
                psi -= TWO_PI
            # P <- F P F' + Q with F = [[1, 0], [f21, 1]]
            n11 = p11 + qpsi
            n12 = f21 * p11 + p12
            n22 = f21 * f21 * p11 + 2.0 * f21 * p12 + p22 + qs_t
            p11, p12, p22 = n11, n12, n22
        # update with H = I, R = diag(rphi, rx)
        e_phi = phi_obs[t] - psi
        if e_phi > math.pi or e_phi <= -math.pi:
            e_phi = _wrap(e_phi)
        e_x = xs[t] - s
        innov[t] = e_x
        gamma[t] = p22 + rx
        s11, s12, s22 = p11 + rphi, p12, p22 + rx
        det = s11 * s22 - s12 * s12
        i11, i12, i22 = s22 / det, -s12 / det, s11 / det
        k11 = p11 * i11 + p12 * i12
        k12 = p11 * i12 + p12 * i22
        k21 = p12 * i11 + p22 * i12
        k22 = p12 * i12 + p22 * i22
        psi = psi + k11 * e_phi + k12 * e_x
        if psi > math.pi or psi <= -math.pi:
            psi = _wrap(psi)
        s = s + k21 * e_phi + k22 * e_x
        # P <- (I - K) P, symmetrized
        a11, a12, a21, a22 = 1.0 - k11, -k12, -k21, 1.0 - k22
        n11 = a11 * p11 + a12 * p12
        n12 = a11 * p12 + a12 * p22
        n21 = a21 * p11 + a22 * p12
        n22 = a21 * p12 + a22 * p22
        p11, p12, p22 = n11, 0.5 * (n12 + n21), n22
        est[t] = s
        pest[t] = psi
        cov[t] = p11, p12, p22
        tr = p11 + p22
        ptrace[t] = tr
        if not diverged and not tr <= divergence_factor * trace0:
            diverged = True
    state_cov = cov[:, [0, 1, 1, 2]].reshape(n, 2, 2)
    return EkfOutput(est, InnovationTrace(innov, gamma), ptrace, diverged, pest, state_cov)


def calibrate_ekf(x, phase: PhaseSignal, kernels: GaussianKernelSet, std_beat, peaks,
                  r_phase=0.05 ** 2, method="exact") -> EkfConfig:
    """Default noise settings derived from the data.

    ``r_ecg`` is the residual variance of the kernel reconstruction,
    ``q_process`` the beat-to-beat variance left after removing ``r_ecg``
    (spread over one beat's samples), and ``q_phase`` the squared spread of
    the per-beat angular velocity.
    """
    x = np.asarray(x, dtype=float)
    recon = kernels.evaluate(phase.phi)
    r_ecg = float(np.var(x - recon))
    r_ecg = max(r_ecg, 1e-12 * max(float(np.var(x)), 1e-300))
    rr = np.diff(np.asarray(peaks, dtype=float))
    beat_var = float(np.mean(np.asarray(std_beat) ** 2))
    q_process = max(beat_var - r_ecg, 0.0) / max(float(np.mean(rr)), 1.0)
    q_process = max(q_process, 1e-4 * r_ecg)
    omega_beats = TWO_PI / rr
    q_phase = max(float(np.var(omega_beats)), 1e-10)
    return EkfConfig(q_process=q_process, q_phase=q_phase, r_ecg=r_ecg, r_phase=r_phase,
                     method=method)

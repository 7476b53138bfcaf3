"""Strict JSON run configuration.

Every block and field is optional; omitted values take the defaults of the
corresponding dataclass. Unknown keys are rejected so that a misspelt
parameter never silently falls back to its default.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .ecg import GaussianKernelSet
from .errors import ConfigError, ParseError
from .evaluation import FetalPeakParams, MixtureConfig, SweepConfig
from .io import FORMAT_VERSION
from .pipeline import DetectorParams, MaternalParams, PipelineConfig


@dataclass(frozen=True)
class EvalParams:
    tolerance: float = 0.05
    tol_bpm: float = 5.0
    band: tuple = (10.0, 45.0)
    min_rr: float = 0.3
    rr_range: tuple = (0.3, 0.6)

    def __post_init__(self):
        if not self.tolerance > 0 or not self.tol_bpm > 0:
            raise ConfigError("tolerances must be positive")
        if len(self.band) != 2 or not 0 < self.band[0] < self.band[1]:
            raise ConfigError("band must be (low, high) with 0 < low < high")

    def peak_params(self) -> FetalPeakParams:
        return FetalPeakParams(tuple(self.band), self.min_rr, tuple(self.rr_range))


@dataclass(frozen=True)
class NoiseParams:
    """Noise added by ``synth``; ``snr_db=None`` adds none."""

    kind: str = "WGN"
    snr_db: float | None = None

    def __post_init__(self):
        if self.kind not in ("WGN", "NGN"):
            raise ConfigError(f"unknown noise kind {self.kind!r}")


@dataclass(frozen=True)
class SweepParams:
    modes: tuple = ("GEVD-union",)
    detector_sets: tuple = (("lpe", "inn_mean", "inn_var", "inn_eps", "inn_q"),)
    snr_db: tuple = (-5.0, 0.0, 5.0, 10.0, 15.0)
    noise_kinds: tuple = ("WGN", "NGN")
    n_trials: int = 10
    duration: float = 20.0


@dataclass(frozen=True)
class RunConfig:
    format_version: int = FORMAT_VERSION
    seed: int = 0
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    evaluation: EvalParams = field(default_factory=EvalParams)
    mixture: MixtureConfig = field(default_factory=MixtureConfig)
    noise: NoiseParams = field(default_factory=NoiseParams)
    sweep: SweepParams = field(default_factory=SweepParams)

    def sweep_config(self) -> SweepConfig:
        s = self.sweep
        try:
            return SweepConfig(modes=s.modes, detector_sets=s.detector_sets, snr_db=s.snr_db,
                               noise_kinds=s.noise_kinds, n_trials=s.n_trials, seed=self.seed,
                               mixture=replace(self.mixture, duration=s.duration))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _tuplify(v):
    if isinstance(v, list):
        return tuple(_tuplify(i) for i in v)
    return v


def _kernels(v, where):
    if not isinstance(v, dict) or set(v) != {"alpha", "b", "psi"}:
        raise ConfigError(f"{where} needs exactly the keys alpha, b, psi")
    try:
        return GaussianKernelSet(v["alpha"], v["b"], v["psi"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _float_or_inf(v):
    # JSON has no infinity literal; accept the strings "inf" and "-inf"
    if isinstance(v, str) and v in ("inf", "-inf"):
        return float(v)
    return v


_NESTED = {
    RunConfig: {"pipeline": PipelineConfig, "evaluation": EvalParams, "mixture": MixtureConfig,
                "noise": NoiseParams, "sweep": SweepParams},
    PipelineConfig: {"detector": DetectorParams, "maternal": MaternalParams},
}


def _build(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object")
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {where}")
    nested = _NESTED.get(cls, {})
    kernel_keys = {f.name for f in fields(cls) if isinstance(f.default, GaussianKernelSet)}
    kwargs = {}
    for key, value in data.items():
        here = f"{where}.{key}"
        if key in nested:
            value = _build(nested[key], value, here)
        elif key in kernel_keys:
            value = _kernels(value, here)
        else:
            value = _float_or_inf(_tuplify(value))
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(doc) -> RunConfig:
    cfg = _build(RunConfig, doc, "config")
    if cfg.format_version != FORMAT_VERSION:
        raise ConfigError(f"unsupported format_version {cfg.format_version}")
    return cfg


def load_config(path=None) -> RunConfig:
    """Read a run configuration; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    return config_from_dict(doc)


def _plain(value):
    if isinstance(value, GaussianKernelSet):
        return {"alpha": [float(a) for a in value.alpha], "b": [float(b) for b in value.b],
                "psi": [float(p) for p in value.psi]}
    if hasattr(value, "__dataclass_fields__"):
        return {f.name: _plain(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, (tuple, list)):
        return [_plain(v) for v in value]
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def config_to_dict(cfg: RunConfig) -> dict:
    return _plain(cfg)

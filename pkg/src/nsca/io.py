"""Text file formats: recordings as CSV, epoch sets and results as JSON."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import MissingSamplingRate, ParseError
from .signal import EpochSet, MultichannelSignal

FORMAT_VERSION = 1


def _fmt(v) -> str:
    return repr(float(v))


def format_recording(x: MultichannelSignal, names=None) -> str:
    """Canonical text of a recording.

    The first line is ``# fs=<Hz> format_version=<n>``, the second a header
    with one name per channel, then one row per sample. Floats use
    ``repr`` so reading the text back gives the same numbers.
    """
    if names is None:
        names = [f"ch{k + 1}" for k in range(x.n_channels)]
    if len(names) != x.n_channels:
        raise ValueError("one name per channel is required")
    lines = [f"# fs={_fmt(x.fs)} format_version={FORMAT_VERSION}", ",".join(names)]
    for row in x.data.T:
        lines.append(",".join(map(_fmt, row)))
    return "\n".join(lines) + "\n"


def write_recording(path, x: MultichannelSignal, names=None):
    Path(path).write_text(format_recording(x, names))


def parse_recording(text: str):
    """Parse recording text. Returns ``(signal, channel_names)``.

    Raises
    ------
    MissingSamplingRate
        No ``fs=`` entry in the comment lines.
    ParseError
        Ragged rows, non-numeric or non-finite values, or no samples.
    """
    meta = {}
    body = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            for token in stripped[1:].split():
                key, sep, value = token.partition("=")
                if sep:
                    meta[key.strip()] = value.strip()
        else:
            body.append(stripped)
    if "fs" not in meta:
        raise MissingSamplingRate("recording has no '# fs=<Hz>' line")
    try:
        fs = float(meta["fs"])
    except ValueError as exc:
        raise ParseError(f"bad sampling rate {meta['fs']!r}") from exc
    if not (math.isfinite(fs) and fs > 0):
        raise ParseError(f"sampling rate must be positive, got {fs}")
    if not body:
        raise ParseError("recording has no header")
    names = [c.strip() for c in body[0].split(",")]
    rows = body[1:]
    if not rows:
        raise ParseError("recording has no samples")
    data = np.empty((len(rows), len(names)))
    for i, row in enumerate(rows):
        cells = row.split(",")
        if len(cells) != len(names):
            raise ParseError(f"row {i + 1} has {len(cells)} values, expected {len(names)}")
        try:
            data[i] = [float(c) for c in cells]
        except ValueError as exc:
            raise ParseError(f"row {i + 1}: {exc}") from exc
    if not np.all(np.isfinite(data)):
        raise ParseError("recording contains NaN or Inf")
    return MultichannelSignal(data.T, fs), names


def read_recording(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return parse_recording(text)


def format_matrix(m) -> str:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    return "\n".join(",".join(map(_fmt, row)) for row in m) + "\n"


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def epochs_to_json(sets: dict, fs: float) -> dict:
    """Named epoch sets as half-open interval lists."""
    horizons = {s.horizon for s in sets.values()}
    horizon = horizons.pop() if len(horizons) == 1 else None
    return {
        "format_version": FORMAT_VERSION,
        "fs": float(fs),
        "horizon": horizon,
        "sets": {
            name: {
                "horizon": s.horizon,
                "intervals": [{"start": a, "end": b} for a, b in s.intervals()],
            }
            for name, s in sets.items()
        },
    }


def epochs_from_json(doc: dict) -> dict:
    try:
        return {
            name: EpochSet.from_intervals(
                [(iv["start"], iv["end"]) for iv in entry["intervals"]], entry["horizon"])
            for name, entry in doc["sets"].items()
        }
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed epoch document: {exc}") from exc

"""Command-line interface: ``extract``, ``synth``, ``eval`` and ``sweep``.

Exit status is 0 on success, 1 when an input or configuration cannot be
read, and 2 when processing fails. Errors are reported on stderr as one
JSON object ``{"error": {"kind", "message", "exit_code"}}``.
"""

from __future__ import annotations

import argparse
import csv
import io as _stdio
import json
import math
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .config import config_to_dict, load_config
from .errors import NscaError, ParseError
from .evaluation import (
    SWEEP_COLUMNS,
    add_noise,
    generate_mixture,
    score_components,
    snr_sweep,
    summarize_sweep,
)
from .pipeline import run_nsca
from .signal import MultichannelSignal

EXIT_PARSE = 1
EXIT_PIPELINE = 2


class _Failure(Exception):
    def __init__(self, exc, code):
        super().__init__(str(exc))
        self.exc = exc
        self.code = code


def _kind(exc):
    return exc.kind if isinstance(exc, NscaError) else type(exc).__name__


def _stage(code, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (NscaError, ValueError, OSError, KeyError, TypeError) as exc:
        raise _Failure(exc, code) from exc


def _load_truth(path):
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    for key in ("fs", "fetal_rpeaks"):
        if key not in doc:
            raise ParseError(f"truth file lacks {key!r}")
    return doc


def cmd_extract(args):
    cfg = _stage(EXIT_PARSE, load_config, args.config)
    x, names = _stage(EXIT_PARSE, io.read_recording, args.input)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = _stage(EXIT_PIPELINE, run_nsca, x, cfg.pipeline)
    outdir = Path(args.out_dir)
    plot = outdir / "plotdata"
    plot.mkdir(parents=True, exist_ok=True)
    comp_names = [f"y{k + 1}" for k in range(x.n_channels)]
    io.write_recording(outdir / "components.csv", out.components, comp_names)
    (outdir / "demixing.csv").write_text(io.format_matrix(out.demixing))
    build = out.build
    (outdir / "epochs.json").write_text(io.dumps(io.epochs_to_json(build.sets, x.fs)))
    ranking = {
        "format_version": io.FORMAT_VERSION,
        "mode": cfg.pipeline.mode,
        "ranking": out.ranking.as_list(),
        "eigenvalues": None if out.eigenvalues is None else [float(v) for v in out.eigenvalues],
    }
    (outdir / "ranking.json").write_text(io.dumps(ranking))
    chan_names = [names[k] for k in build.channels]
    for name, trace in build.traces.items():
        cols = ["reference"] if name == "maternal_rho" else chan_names
        # undefined index values (silent channels) are written as zeros
        data = np.nan_to_num(np.atleast_2d(trace), nan=0.0, posinf=0.0, neginf=0.0)
        io.write_recording(plot / f"{name}.csv", MultichannelSignal(data, x.fs), cols)
    io.write_recording(plot / "mecg.csv", MultichannelSignal(build.mecg, x.fs), chan_names)
    io.write_recording(plot / "innovation.csv",
                       MultichannelSignal(build.innovation.values, x.fs), chan_names)
    return 0


def cmd_synth(args):
    cfg = _stage(EXIT_PARSE, load_config, args.config)
    seed = cfg.seed if args.seed is None else args.seed
    truth = _stage(EXIT_PIPELINE, generate_mixture, cfg.mixture, seed)
    x = truth.x
    if cfg.noise.snr_db is not None:
        x = _stage(EXIT_PIPELINE, add_noise, x, cfg.noise.kind, cfg.noise.snr_db, seed)
    io.write_recording(args.out, x)
    doc = {
        "format_version": io.FORMAT_VERSION,
        "seed": seed,
        "fs": x.fs,
        "n_samples": x.n_samples,
        "source_names": list(truth.source_names),
        "mixing": [[float(v) for v in row] for row in truth.mixing],
        "fetal_rpeaks": [int(p) for p in truth.fetal_rpeaks],
        "maternal_rpeaks": [int(p) for p in truth.maternal_rpeaks],
        "noise": {"kind": cfg.noise.kind, "snr_db": cfg.noise.snr_db},
        "config": config_to_dict(cfg),
    }
    Path(args.truth).write_text(io.dumps(doc))
    return 0


def cmd_eval(args):
    cfg = _stage(EXIT_PARSE, load_config, args.config)
    y, _ = _stage(EXIT_PARSE, io.read_recording, args.est)
    truth = _stage(EXIT_PARSE, _load_truth, args.truth)
    ev = cfg.evaluation
    k, report = _stage(EXIT_PIPELINE, score_components, y,
                       np.asarray(truth["fetal_rpeaks"], dtype=np.int64), ev.tolerance,
                       ev.peak_params())
    doc = {"format_version": io.FORMAT_VERSION, "selected_channel": k, **report.to_dict()}
    text = io.dumps(doc)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _sweep_csv(rows):
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for r in rows:
        writer.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in SWEEP_COLUMNS])
    return buf.getvalue()


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def cmd_sweep(args):
    cfg = _stage(EXIT_PARSE, load_config, args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    scfg = _stage(EXIT_PARSE, cfg.sweep_config)
    rows = _stage(EXIT_PIPELINE, snr_sweep, scfg, cfg.pipeline)
    out = Path(args.out)
    out.write_text(_sweep_csv(rows))
    summary = [{k: _json_safe(v) for k, v in row.items()} for row in summarize_sweep(rows)]
    doc = {"format_version": io.FORMAT_VERSION, "seed": cfg.seed, "cells": summary}
    out.with_suffix(".json").write_text(io.dumps(doc))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="nsca", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="separate a recording into nonstationary components")
    p.add_argument("--input", required=True)
    p.add_argument("--config")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("synth", help="write a synthetic mixture and its ground truth")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="score extracted components against ground truth")
    p.add_argument("--est", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="F1 and HR_m over SNR levels and noise kinds")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Failure as fail:
        err = {"error": {"kind": _kind(fail.exc), "message": str(fail.exc),
                         "exit_code": fail.code}}
        sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
        return fail.code


if __name__ == "__main__":
    sys.exit(main())

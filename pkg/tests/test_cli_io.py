import json

import numpy as np
import pytest

from nsca import io
from nsca.cli import main
from nsca.config import RunConfig, config_from_dict, config_to_dict, load_config
from nsca.errors import ConfigError, MissingSamplingRate, ParseError
from nsca.evaluation import MixtureConfig, generate_mixture
from nsca.signal import EpochSet, MultichannelSignal


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def error_of(capsys):
    return json.loads(capsys.readouterr().err)["error"]


@pytest.fixture
def short_config(tmp_path):
    return write_json(tmp_path / "run.json", {"seed": 4, "mixture": {"duration": 12.0}})


def test_recording_round_trip_is_byte_identical():
    rng = np.random.default_rng(0)
    x = MultichannelSignal(rng.standard_normal((3, 50)) * 1e-3, 500.0)
    text = io.format_recording(x, ["a", "b", "c"])
    y, names = io.parse_recording(text)
    assert names == ["a", "b", "c"] and y.fs == 500.0
    np.testing.assert_array_equal(y.data, x.data)
    assert io.format_recording(y, names) == text


def test_recording_parse_errors():
    with pytest.raises(MissingSamplingRate):
        io.parse_recording("a,b\n1,2\n")
    with pytest.raises(ParseError):
        io.parse_recording("# fs=500\na,b\n1,2\n3\n")
    with pytest.raises(ParseError):
        io.parse_recording("# fs=500\na,b\n1,nan\n")
    with pytest.raises(ParseError):
        io.parse_recording("# fs=500\na,b\n")
    with pytest.raises(ParseError):
        io.parse_recording("# fs=-1\na\n1\n")


def test_epochs_json_round_trip():
    sets = {"x": EpochSet([1, 2, 3, 9], 20), "y": EpochSet.empty(20)}
    doc = io.epochs_to_json(sets, 500.0)
    assert doc["sets"]["x"]["intervals"] == [{"start": 1, "end": 4}, {"start": 9, "end": 10}]
    back = io.epochs_from_json(json.loads(io.dumps(doc)))
    assert back == sets
    with pytest.raises(ParseError):
        io.epochs_from_json({"sets": {"x": {}}})


def test_config_defaults_match_documented_settings():
    cfg = load_config(None)
    d, m = cfg.pipeline.detector, cfg.pipeline.maternal
    assert (d.lpe_w1, d.lpe_w2, d.w_a, d.w_var, d.w_r, d.mean_window) == (
        0.010, 0.200, 0.010, 0.010, 0.020, 0.050)
    assert (m.lpe_w1, m.lpe_w2, m.expansion) == (0.020, 0.400, 0.015)
    assert cfg.pipeline.mode == "GEVD-union"
    assert (cfg.mixture.n_channels, cfg.mixture.duration, cfg.mixture.fs) == (4, 60.0, 500.0)


def test_config_round_trip_and_strictness():
    cfg = config_from_dict({"pipeline": {"mode": "AJD", "detector": {"w_r": 0.04}},
                            "mixture": {"fetal_db": "-inf"}})
    assert cfg.pipeline.mode == "AJD" and cfg.pipeline.detector.w_r == 0.04
    plain = config_to_dict(cfg)
    assert config_to_dict(config_from_dict(json.loads(json.dumps(plain)))) == plain
    assert config_to_dict(config_from_dict(config_to_dict(RunConfig()))) == \
        config_to_dict(RunConfig())
    for bad in ({"bogus": 1}, {"pipeline": {"detector": {"w9": 1}}},
                {"pipeline": {"mode": "PCA"}}, {"format_version": 2},
                {"mixture": {"maternal_kernels": {"alpha": [1.0]}}}):
        with pytest.raises(ConfigError):
            config_from_dict(bad)


def test_load_config_errors(tmp_path):
    with pytest.raises(ParseError):
        load_config(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ParseError):
        load_config(tmp_path / "bad.json")


def test_cli_synth_extract_eval(tmp_path, short_config, capsys):
    rec, truth = tmp_path / "rec.csv", tmp_path / "truth.json"
    assert main(["synth", "--config", short_config, "--out", str(rec), "--truth", str(truth)]) == 0
    x, names = io.read_recording(rec)
    assert x.n_channels == 4 and x.n_samples == 6000 and x.fs == 500.0
    doc = json.loads(truth.read_text())
    assert doc["seed"] == 4 and len(doc["mixing"]) == 4

    out = tmp_path / "out"
    assert main(["extract", "--input", str(rec), "--out-dir", str(out)]) == 0
    comps, _ = io.read_recording(out / "components.csv")
    assert comps.n_channels == 4
    for name in ("demixing.csv", "epochs.json", "ranking.json"):
        assert (out / name).exists()
    for name in ("rho", "a", "gamma", "q", "eps", "maternal_rho", "mecg", "innovation"):
        assert (out / "plotdata" / f"{name}.csv").exists()
    ranking = json.loads((out / "ranking.json").read_text())
    assert sorted(r["component"] for r in ranking["ranking"]) == [0, 1, 2, 3]
    assert ranking["mode"] == "GEVD-union" and len(ranking["eigenvalues"]) == 4

    metrics = tmp_path / "metrics.json"
    assert main(["eval", "--est", str(out / "components.csv"), "--truth", str(truth),
                 "--out", str(metrics)]) == 0
    rep = json.loads(metrics.read_text())
    assert rep["f1_percent"] >= 95.0
    assert main(["eval", "--est", str(out / "components.csv"), "--truth", str(truth)]) == 0
    assert json.loads(capsys.readouterr().out) == rep


def test_cli_eval_true_source_and_shuffle(tmp_path):
    g = generate_mixture(MixtureConfig(duration=12.0), seed=6)
    truth = write_json(tmp_path / "truth.json", {"fs": 500.0,
                                                 "fetal_rpeaks": g.fetal_rpeaks.tolist()})
    reports = []
    for perm in ([0, 1, 2, 3], [3, 2, 1, 0], [1, 3, 0, 2]):
        est = tmp_path / f"est{perm[0]}.csv"
        io.write_recording(est, MultichannelSignal(g.sources.data[perm], 500.0))
        out = tmp_path / f"m{perm[0]}.json"
        assert main(["eval", "--est", str(est), "--truth", truth, "--out", str(out)]) == 0
        reports.append(json.loads(out.read_text()))
    assert reports[0]["f1_percent"] == 100.0
    for rep in reports[1:]:
        rep.pop("selected_channel")
        assert rep == {k: v for k, v in reports[0].items() if k != "selected_channel"}


def test_cli_exit_codes(tmp_path, capsys):
    nofs = tmp_path / "nofs.csv"
    nofs.write_text("a,b\n1,2\n")
    assert main(["extract", "--input", str(nofs), "--out-dir", str(tmp_path / "o")]) == 1
    err = error_of(capsys)
    assert err["kind"] == "MissingSamplingRate" and err["exit_code"] == 1

    bad_cfg = write_json(tmp_path / "bad.json", {"pipelin": {}})
    assert main(["synth", "--config", bad_cfg, "--out", str(tmp_path / "r.csv"),
                 "--truth", str(tmp_path / "t.json")]) == 1
    assert error_of(capsys)["kind"] == "ConfigError"

    empty = tmp_path / "empty.csv"
    empty.write_text("# fs=500\ny1,y2\n")
    truth = write_json(tmp_path / "truth.json", {"fs": 500.0, "fetal_rpeaks": [1, 2]})
    assert main(["eval", "--est", str(empty), "--truth", truth]) == 1
    assert error_of(capsys)["kind"] == "ParseError"

    flat = tmp_path / "flat.csv"
    io.write_recording(flat, MultichannelSignal(np.ones((2, 2000)), 500.0))
    assert main(["extract", "--input", str(flat), "--out-dir", str(tmp_path / "o2")]) == 2
    err = error_of(capsys)
    assert err["exit_code"] == 2


def test_cli_sweep_outputs(tmp_path):
    cfg = write_json(tmp_path / "sweep.json", {"sweep": {"snr_db": [10.0], "n_trials": 1,
                                                         "noise_kinds": ["WGN"],
                                                         "duration": 10.0}})
    out = tmp_path / "report.csv"
    assert main(["sweep", "--config", cfg, "--out", str(out), "--seed", "2"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].split(",")[:6] == ["mode", "detector", "noise", "snr_db", "trial", "f1"]
    assert len(lines) == 2
    summary = json.loads(out.with_suffix(".json").read_text())
    assert summary["seed"] == 2 and len(summary["cells"]) == 1

"""Config parsing, report emission, seeding, and CLI exit codes."""

import json
import os

import numpy as np
import pytest

from hierarchia import cli, report
from hierarchia.report import PLOTDATA_HEADER, parse_plotdata


def _write(tmp_path, text, name="config.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_defaults_when_no_config():
    cfg = cli.load_config(None, experiment="feller")
    assert cfg.experiment == "feller"
    assert cfg.seed == 12345
    assert cfg.params["replicates"] == 100_000


def test_unknown_key_rejected(tmp_path):
    path = _write(tmp_path, "[feller]\nbogus = 3\n")
    with pytest.raises(cli.ConfigError, match="bogus"):
        cli.load_config(path, experiment="feller")


def test_unknown_section_rejected(tmp_path):
    path = _write(tmp_path, "[nonsense]\nx = 1\n")
    with pytest.raises(cli.ConfigError, match="nonsense"):
        cli.load_config(path, experiment="feller")


def test_missing_required_key_named(tmp_path):
    path = _write(tmp_path, "[cascade]\nchains = 10\n")
    with pytest.raises(cli.ConfigError, match="theta"):
        cli.load_config(path, experiment="cascade")


def test_type_errors_are_reported(tmp_path):
    path = _write(tmp_path, "[feller]\nreplicates = soon\n")
    with pytest.raises(cli.ConfigError, match="replicates"):
        cli.load_config(path, experiment="feller")


def test_experiment_conflict_detected(tmp_path):
    path = _write(tmp_path, "[run]\nexperiment = walk\n")
    with pytest.raises(cli.ConfigError, match="conflicts"):
        cli.load_config(path, experiment="feller")


def test_seed_precedence(tmp_path, monkeypatch):
    path = _write(tmp_path, "[run]\nseed = 7\n")
    cfg = cli.load_config(path, experiment="feller")
    assert cfg.seed == 7
    monkeypatch.setenv(cli.ENV_SEED, "11")
    assert cli.load_config(path, experiment="feller").seed == 11
    assert cli.load_config(path, experiment="feller", seed=13).seed == 13
    monkeypatch.setenv(cli.ENV_SEED, "not-a-number")
    with pytest.raises(cli.ConfigError, match="HIERARCHIA_SEED"):
        cli.load_config(path, experiment="feller")


def test_config_roundtrip_is_idempotent(tmp_path):
    text = "[run]\nseed = 5\nformat = json\n[feller]\nreplicates = 1000\nc = 2.0\n"
    cfg = cli.load_config(_write(tmp_path, text), experiment="feller")
    serialized = cli.serialize_config(cfg)
    cfg2 = cli.load_config(_write(tmp_path, serialized, "again.ini"))
    assert cfg2.resolved() == cfg.resolved()
    assert cli.serialize_config(cfg2) == serialized


def test_replicate_stream_is_stable():
    a = cli.replicate_stream(1, "feller", 0).generate_state(2)
    b = cli.replicate_stream(1, "feller", 0).generate_state(2)
    c = cli.replicate_stream(1, "feller", 1).generate_state(2)
    d = cli.replicate_stream(1, "walk", 0).generate_state(2)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_plotdata_header_and_roundtrip():
    rep = report.RunReport(experiment="demo", seed=1, config={})
    rep.series.append(report.PlotSeries("x", "y", ((1.0, 2.0, 0.1), (2.0, 3.0, 0.2))))
    rep.series.append(report.PlotSeries("u", "v", ((0.5, 0.25, 0.0),)))
    text = rep.plotdata_csv()
    lines = text.strip().split("\n")
    assert lines[0] == PLOTDATA_HEADER
    assert len(lines) - 1 == 3  # row count = points x series
    parsed = parse_plotdata(text)
    assert parsed[0] == ("demo", "x", 1.0, "y", 2.0, 0.1)
    assert parsed[2] == ("demo", "u", 0.5, "v", 0.25, 0.0)


def test_tolerance_row_logic():
    r = report.tolerance_row("X", "demo", 1.0, 1.05, 0.1, n_se=1.0)
    assert r.status == "pass"
    r = report.tolerance_row("X", "demo", 1.0, 1.5, 0.1, n_se=2.0)
    assert r.status == "fail"
    r = report.tolerance_row("X", "demo", 1.0, 1.04, 0.001, rel_tol=0.05)
    assert r.status == "pass"


def test_main_writes_files_and_exits_zero(tmp_path, capsys):
    out = str(tmp_path / "out")
    cfg = _write(tmp_path, "[feller]\nreplicates = 5000\n")
    code = cli.main(["feller", "--config", cfg, "--seed", "3", "--out", out])
    assert code == 0
    for name in ("report.csv", "plotdata.csv", "run_record.json"):
        assert os.path.exists(os.path.join(out, name))
    record = json.loads((tmp_path / "out" / "run_record.json").read_text())
    assert record["seed"] == 3
    assert record["config"]["replicates"] == 5000
    lines = (tmp_path / "out" / "plotdata.csv").read_text().strip().split("\n")
    assert lines[0] == PLOTDATA_HEADER
    capsys.readouterr()


def test_json_format(tmp_path, capsys):
    out = str(tmp_path / "out")
    cfg = _write(tmp_path, "[run]\nformat = json\n[feller]\nreplicates = 2000\n")
    code = cli.main(["feller", "--config", cfg, "--seed", "3", "--out", out])
    assert code == 0
    payload = json.loads((tmp_path / "out" / "report.json").read_text())
    assert payload["experiment"] == "feller"
    assert {r["check_id"] for r in payload["rows"]} == {"F1", "F2", "F3", "F4"}
    capsys.readouterr()


def test_determinism_across_workers(tmp_path, capsys):
    cfg1 = _write(tmp_path, "[run]\nworkers = 1\n[feller]\nreplicates = 25000\n", "a.ini")
    cfg2 = _write(tmp_path, "[run]\nworkers = 2\n[feller]\nreplicates = 25000\n", "b.ini")
    outs = [str(tmp_path / f"out{k}") for k in range(2)]
    assert cli.main(["feller", "--config", cfg1, "--seed", "9", "--out", outs[0]]) == 0
    assert cli.main(["feller", "--config", cfg2, "--seed", "9", "--out", outs[1]]) == 0
    for name in ("report.csv", "plotdata.csv"):
        a = open(os.path.join(outs[0], name), "rb").read()
        b = open(os.path.join(outs[1], name), "rb").read()
        assert a == b
    capsys.readouterr()


def test_exit_code_two_on_validation_error(tmp_path, capsys):
    code = cli.main(["cascade", "--out", str(tmp_path / "o")])
    assert code == 2  # cascade requires theta
    code = cli.main(["feller", "--config", str(tmp_path / "missing.ini")])
    assert code == 2
    capsys.readouterr()


def test_exit_code_one_on_failing_check(tmp_path, capsys):
    # absurdly tight tolerance: the Laplace check cannot pass
    cfg = _write(tmp_path, "[feller]\nreplicates = 2000\nn_se = 0.0001\n")
    code = cli.main(["feller", "--config", cfg, "--seed", "5",
                     "--out", str(tmp_path / "o")])
    assert code == 1
    capsys.readouterr()


def test_run_report_ok_property():
    rep = report.RunReport(experiment="demo", seed=1, config={})
    rep.rows.append(report.CheckRow("A", "x", None, None, None, "pass"))
    rep.rows.append(report.CheckRow("B", "x", None, None, None, "trend"))
    assert rep.ok
    rep.rows.append(report.CheckRow("C", "x", None, None, None, "fail"))
    assert not rep.ok

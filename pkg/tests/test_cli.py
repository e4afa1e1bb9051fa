import json
from pathlib import Path

import pytest

from vortexlab.cli import ConfigError, RunManifest, main, parse_config, run
from vortexlab.harness import EXPERIMENTS


def test_parse_empty_config_gives_defaults():
    m = parse_config("")
    assert m == RunManifest()
    assert m.n == 256 and m.L == 200.0
    assert m.mu == 1.0 and m.lam == 0.0 and m.rho_star == 1.0
    assert m.gamma == 1.4 and m.epsilon == 1e-2
    assert m.dt is None and m.T == 30.0
    assert m.experiments == tuple(EXPERIMENTS)


def test_parse_config_values_and_comments():
    text = """
    # grid
    n = 128
    L = 100.0
    lambda = 0.5   # bulk viscosity
    epsilon = 3e-3
    experiments = kernel-algebra, pointwise-bound
    threads = 2
    """
    m = parse_config(text)
    assert m.n == 128 and m.L == 100.0
    assert m.lam == 0.5
    assert m.epsilon == 3e-3
    assert m.experiments == ("kernel-algebra", "pointwise-bound")
    assert m.threads == 2


def test_parse_config_rejects_bad_ellipticity():
    with pytest.raises(ConfigError, match="lambda"):
        parse_config("lambda = -3\nmu = 1\n")


def test_parse_config_rejects_bad_grid():
    with pytest.raises(ConfigError, match="n"):
        parse_config("n = 100\n")


def test_parse_config_rejects_unknown_key():
    with pytest.raises(ConfigError, match="viscosityy"):
        parse_config("viscosityy = 2\n")


def test_parse_config_rejects_unknown_experiment():
    with pytest.raises(ConfigError, match="experiments"):
        parse_config("experiments = not-an-experiment\n")


def test_parse_config_rejects_malformed_line():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config("just some words\n")


def test_list_experiments_flag(capsys):
    assert main(["--list-experiments"]) == 0
    out = capsys.readouterr().out.strip().split("\n")
    assert out == list(EXPERIMENTS)


def test_run_writes_reports_and_exits_zero(tmp_path, capsys):
    manifest = RunManifest(n=128, L=100.0, experiments=("kernel-algebra",))
    code = run(manifest, tmp_path / "out")
    out = capsys.readouterr().out
    assert code == 0
    assert "PASS kernel-algebra/semigroup-spar" in out
    reports = (tmp_path / "out" / "reports.csv").read_text()
    assert reports.startswith("# vortexlab reports v1")
    assert (tmp_path / "out" / "summary.json").exists()
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["passed"] is True
    assert summary["context"]["threads"] == 1


def test_kernel_rates_csv_has_enough_rows(tmp_path, capsys):
    manifest = RunManifest(experiments=("kernel-rates",))
    run(manifest, tmp_path / "out")
    capsys.readouterr()
    lines = (tmp_path / "out" / "reports.csv").read_text().strip().split("\n")
    assert len(lines) - 2 >= 10  # version + header + rows
    series = list((tmp_path / "out" / "series").glob("kernel-rates__*.csv"))
    assert len(series) >= 10


def test_unwritable_outdir_fails_without_partial_files(tmp_path, capsys):
    # a regular file where the output directory should go: mkdir must fail
    # before any experiment runs, so nothing is written anywhere
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    code = main(
        ["--outdir", str(blocker / "out"), "--experiments", "kernel-algebra"]
    )
    err = capsys.readouterr().err
    assert code == 2
    assert "not writable" in err
    assert not (blocker / "out").exists()


def test_failing_report_gives_nonzero_exit(tmp_path, capsys, monkeypatch):
    from vortexlab import cli, harness

    def failing_experiment(ctx):
        report = harness.ExperimentReport("stub", "always-fails", 0.0, 1.0, 0.1)
        return harness.ExperimentResult("stub", (report,))

    monkeypatch.setitem(cli.EXPERIMENTS, "stub", failing_experiment)
    manifest = RunManifest(experiments=("stub",))
    code = run(manifest, tmp_path / "out")
    out = capsys.readouterr().out
    assert code == 1
    assert "FAIL stub/always-fails" in out
    reports = (tmp_path / "out" / "reports.csv").read_text()
    assert reports.strip().endswith("false")


def test_cli_determinism_byte_identical(tmp_path, capsys):
    manifest_text = "n = 128\nL = 100\nexperiments = kernel-algebra\n"
    cfg = tmp_path / "lab.cfg"
    cfg.write_text(manifest_text)
    for sub in ("a", "b"):
        code = main(["--config", str(cfg), "--outdir", str(tmp_path / sub)])
        assert code == 0
    capsys.readouterr()
    a = (tmp_path / "a" / "reports.csv").read_bytes()
    b = (tmp_path / "b" / "reports.csv").read_bytes()
    assert a == b
    sa = (tmp_path / "a" / "summary.json").read_bytes()
    sb = (tmp_path / "b" / "summary.json").read_bytes()
    assert sa == sb

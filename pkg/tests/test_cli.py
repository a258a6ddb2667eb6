import pytest

from logvort.cli import main

TINY = """\
[experiment]
kind = deformation
[grid]
n = 256
box = 8.0
[time]
t_end = 0.1
samples = 3
[lattice]
scale = 32.0
amplitude = 8.0
[run]
seed_spacing = 0.5
"""


@pytest.fixture
def tiny(tmp_path):
    p = tmp_path / "tiny.cfg"
    p.write_text(TINY)
    return p


def last_line(capsys):
    return capsys.readouterr().out.strip().splitlines()[-1]


def test_no_arguments_is_usage_error(capsys):
    assert main([]) == 1
    out = capsys.readouterr().out
    assert "usage" in out and out.strip().endswith("STATUS: error")


def test_bad_subcommand(capsys):
    assert main(["launch"]) == 1
    assert last_line(capsys) == "STATUS: error"


def test_missing_config_file(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == 1
    assert last_line(capsys) == "STATUS: error"


def test_config_error_reports_line(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("[experiment]\nkind = deformation\n[lattice]\nalpa = 0.3\n")
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "line 4" in err and "alpha" in err


def test_verify_monotonicity(tmp_path, capsys):
    assert main(["verify", "--suite", "monotonicity", "--out", str(tmp_path), "--quiet"]) == 0
    assert last_line(capsys) == "STATUS: ok"
    summary = (tmp_path / "summary.txt").read_text()
    assert "check.h_monotone_a0.9: pass" in summary


def test_run_deformation_and_report(tiny, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--config", str(tiny), "--out", str(out), "--quiet"]) == 0
    assert last_line(capsys) == "STATUS: ok"
    diag = (out / "diagnostics.csv").read_text().splitlines()
    assert diag[0] == "# logvort 0.1.0"
    assert any(line.startswith("#   [lattice]") for line in diag)
    assert sum(not line.startswith("#") for line in diag) == 4
    assert len(list((out / "snapshots").glob("*.lgv"))) == 3
    assert main(["report", "--out", str(out), "--quiet"]) == 0
    assert (out / "report.csv").exists()


def test_env_overrides_out(tiny, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("LOGVORT_OUT", str(tmp_path / "env"))
    assert main(["norms", "--config", str(tiny), "--out", str(tmp_path / "flag"), "--quiet"]) == 0
    assert (tmp_path / "env" / "norms.csv").exists()
    assert not (tmp_path / "flag").exists()


def test_outputs_are_byte_identical(tiny, tmp_path, capsys):
    for d in ("a", "b"):
        assert main(["run", "--config", str(tiny), "--out", str(tmp_path / d), "--seed", "3",
                     "--threads", "1", "--quiet"]) == 0
    for name in ("diagnostics.csv", "deformation.csv", "summary.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_check_failure_exit_code(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr("logvort.cli.h_monotone_check", lambda alpha: alpha < 0.5)
    assert main(["verify", "--suite", "monotonicity", "--out", str(tmp_path)]) == 2
    out = capsys.readouterr().out
    assert "FAIL h_monotone_a0.5" in out and out.strip().endswith("STATUS: check-fail")
    assert "check.h_monotone_a0.5: fail" in (tmp_path / "summary.txt").read_text()

"""cli + experiment harness: exit codes, hash-keyed run directories, caching, sweeps."""
import csv
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from fujitalab.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main
from fujitalab.config import config_hash, load_config
from fujitalab.experiment import load_record, parse_record, run_experiment

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
HOMOG = CONFIGS / "h3-homogeneous-neumann.txt"


def write(tmp_path, text, name="c.txt"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def homog_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    assert main(["run", "--config", str(HOMOG), "--out", str(out)]) == EXIT_OK
    (d,) = out.iterdir()
    return out, d


# ---------------------------------------------------------------- validation exit codes
def test_negative_dimension_exits_1(tmp_path, capsys):
    cfg = write(tmp_path, "manifold.dimension = -3\n")
    assert main(["classify", "--config", cfg]) == EXIT_VALIDATION
    assert "dimension" in capsys.readouterr().err


def test_missing_config_exits_1(capsys):
    assert main(["run"]) == EXIT_VALIDATION
    assert main(["spectrum", "--config", "/no/such.txt"]) == EXIT_VALIDATION


def test_unknown_key_exits_1(tmp_path):
    assert main(["simulate", "--config", write(tmp_path, "grid.n = 100\n")]) == EXIT_VALIDATION


def test_console_script_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "fujitalab", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "sweep" in res.stdout


# ---------------------------------------------------------------- run pipeline
def test_run_directory_layout_and_record(homog_run):
    out, d = homog_run
    cfg = load_config(HOMOG)
    assert d.name == f"{cfg.name}-{config_hash(cfg)}"
    for f in ("config.txt", "spectrum.csv", "classify.txt", "run.csv", "fields.csv", "monitors.csv", "record.txt",
              "timing.txt"):
        assert (d / f).is_file(), f
    lines = (d / "record.txt").read_text().splitlines()
    assert all("=" in ln for ln in lines)
    rec = parse_record("\n".join(lines))
    assert rec["complete"] == "true" or rec["complete"] is True
    loaded = load_record(d)
    assert loaded.outcome["outcome"] == "BlowUp"
    assert abs(loaded.outcome["t_star"] - 1.0) <= 0.05
    assert load_config(d / "config.txt") == cfg
    assert read_csv(d / "run.csv")[0] == ["t", "sup", "mass", "dt"]
    assert read_csv(d / "monitors.csv")[0][:4] == ["check_name", "pass", "worst_margin", "location"]


def test_run_is_idempotent_and_cached(homog_run, capsys):
    out, d = homog_run
    before = {p.name: p.read_bytes() for p in d.iterdir() if p.name != "timing.txt"}
    assert main(["run", "--config", str(HOMOG), "--out", str(out)]) == EXIT_OK
    assert "cached=True" in capsys.readouterr().out
    after = {p.name: p.read_bytes() for p in d.iterdir() if p.name != "timing.txt"}
    assert before == after
    assert len(list(out.iterdir())) == 1


def test_forced_rerun_is_bit_identical(homog_run, tmp_path):
    _, d = homog_run
    rec = run_experiment(load_config(HOMOG), tmp_path, force=True)
    assert not rec.cached
    for f in ("run.csv", "fields.csv", "monitors.csv", "spectrum.csv", "record.txt"):
        assert (Path(rec.directory) / f).read_bytes() == (d / f).read_bytes(), f


def test_incomplete_directory_is_recomputed(homog_run, tmp_path):
    _, d = homog_run
    dst = tmp_path / d.name
    shutil.copytree(d, dst)
    rec_text = (dst / "record.txt").read_text().replace("complete=true\n", "")
    (dst / "record.txt").write_text(rec_text)
    rec = run_experiment(load_config(HOMOG), tmp_path)
    assert not rec.cached
    assert "complete=true" in (dst / "record.txt").read_text()


def test_diagnose_run_directory(homog_run, tmp_path):
    _, d = homog_run
    assert main(["diagnose", str(d), "--out", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "monitors.csv")
    assert rows[0][:4] == ["check_name", "pass", "worst_margin", "location"]
    assert {r[1] for r in rows[1:]} <= {"pass", "not-applicable"}
    assert main(["diagnose", str(tmp_path)]) == EXIT_VALIDATION


def test_failed_monitor_maps_to_exit_2(homog_run, tmp_path, monkeypatch):
    import fujitalab.cli as cli

    _, d = homog_run
    monkeypatch.setattr(cli, "diagnose_run", lambda *a, **k: [("phi_ode", "fail", -1.0, 0.5, "synthetic")])
    assert main(["diagnose", str(d), "--out", str(tmp_path)]) == EXIT_NUMERICAL
    assert read_csv(tmp_path / "monitors.csv")[1][:2] == ["phi_ode", "fail"]


# ---------------------------------------------------------------- individual subcommands
def test_spectrum_kernel_classify_simulate_stdout(capsys):
    assert main(["spectrum", "--config", str(HOMOG)]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "R,n,lambda1_ball,extrapolated,analytic,rel_error" and len(out) == 4
    assert main(["kernel", "--config", str(HOMOG), "--samples", "5", "--t-max", "3"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[0] == "t,center_value,mass,fitted_rate"
    assert main(["classify", "--config", str(HOMOG)]) == EXIT_OK
    assert "verdict=Undetermined" in capsys.readouterr().out
    assert main(["simulate", "--config", str(HOMOG)]) == EXIT_OK
    text = capsys.readouterr().out
    assert text.startswith("t,sup,mass,dt") and "outcome.outcome=BlowUp" in text


# ---------------------------------------------------------------- sweep
def test_sweep_empty_value_list(tmp_path):
    assert main(["sweep", "--config", str(HOMOG), "--axis", "initial.height", "--values", "",
                 "--out", str(tmp_path)]) == EXIT_OK
    (summary,) = tmp_path.glob("sweep-*.csv")
    assert read_csv(summary) == [["value", "predicted", "observed", "t_star_or_horizon"]]


def test_sweep_bad_axis_exits_1(tmp_path):
    assert main(["sweep", "--config", str(HOMOG), "--axis", "grid.colour", "--values", "1",
                 "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_sweep_parallel_matches_serial(tmp_path):
    args = ["sweep", "--config", str(HOMOG), "--axis", "initial.height", "--values", "1,2"]
    assert main(args + ["--out", str(tmp_path / "a"), "--workers", "1"]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b"), "--workers", "2"]) == EXIT_OK
    (sa,) = (tmp_path / "a").glob("sweep-*.csv")
    (sb,) = (tmp_path / "b").glob("sweep-*.csv")
    assert sa.read_bytes() == sb.read_bytes()
    rows = read_csv(sa)[1:]
    assert [r[2] for r in rows] == ["BlowUp", "BlowUp"]
    # homogeneous oracle: t_star = 1/u0
    assert abs(float(rows[0][3]) - 1.0) < 0.05 and abs(float(rows[1][3]) - 0.5) < 0.05

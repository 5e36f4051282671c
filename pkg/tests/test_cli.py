import subprocess
import sys

import pytest

from risce.cli import main
from risce.harness import parse_csv


def test_run_preset(tmp_path):
    out = tmp_path / "o.csv"
    plot = tmp_path / "p.json"
    code = main(["run", "--preset", "scenario1", "--sweep", "K_dB", "--grid", "0,10", "--trials", "3",
                 "--seed", "4", "--out", str(out), "--plot-data", str(plot)])
    assert code == 0
    rows = parse_csv(out)
    assert {r.value for r in rows} == {0.0, 10.0} and all(r.seed == 4 for r in rows)
    assert plot.exists()


def test_run_config_file_with_overrides(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("preset: scenario1\ngeometry: {M: 4, N_y: 2, N_z: 4}\nestimation: {methods: [NZ_PT]}\n")
    out = tmp_path / "o.csv"
    code = main(["run", "--config", str(cfg), "--sweep", "rho_dB", "--grid", "5", "--trials", "2",
                 "--out", str(out), "--zero-noise", "--pure-los", "--blocked-direct"])
    assert code == 0
    nmse = next(r for r in parse_csv(out) if r.metric == "NMSE")
    assert nmse.mean < 1e-18


def test_certify(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["certify", "--n", "4", "--m", "2", "--random-designs", "5", "--seed", "1", "--out", str(out)]) == 0
    rows = parse_csv(out)
    assert any(r.metric == "RANK" and r.variant == "MDFT" and r.mean == 1 for r in rows)


@pytest.mark.parametrize("args, msg", [
    (["run", "--out", "x.csv"], "--config or --preset"),
    (["run", "--preset", "scenario1", "--grid", "1", "--out", "x.csv"], "no sweep variable"),
    (["run", "--preset", "scenario1", "--sweep", "K_dB", "--out", "x.csv"], "grid is empty"),
    (["run", "--preset", "scenario1", "--sweep", "bogus", "--grid", "1", "--out", "x.csv"], "sweep.variable"),
])
def test_errors(args, msg, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(args) != 0
    assert msg in capsys.readouterr().err


def test_unwritable_output(capsys, tmp_path):
    code = main(["certify", "--n", "2", "--m", "2", "--random-designs", "0", "--out", str(tmp_path / "a" / "b.csv")])
    assert code != 0 and "cannot write" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "risce.cli", "run", "--preset", "scenario2", "--dump-config",
                        "--out", str(tmp_path / "x")], capture_output=True, text=True)
    assert r.returncode == 0 and "N_z: 16" in r.stdout

import json
import subprocess
import sys

import pytest

from fcid import data as fdata
from fcid.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_simulate_writes_dataset(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", "--model", "kim", "--n", "300", "--seed", "5",
                       "--out-dir", str(tmp_path))
    assert code == 0
    info = json.loads(out)
    samples = fdata.read_samples(info["samples"])
    assert len(samples) == 300
    man = json.loads((tmp_path / "samples_kim.manifest.json").read_text())
    assert man["seed"] == 5 and man["sha256"] == info["sha256"]


def test_identify_adaptive(tmp_path, capsys):
    code, out, _ = run(capsys, "identify", "--adaptive", "--n", "400", "--out-dir", str(tmp_path))
    assert code == 0
    arms = json.loads(out)
    assert list(arms) == ["adaptive"]
    assert (tmp_path / "trace_squadrito_adaptive.csv").exists()


def test_compare_and_mse_recompute(tmp_path, capsys):
    code, out, _ = run(capsys, "compare", "--model", "kim", "--n", "500", "--transient-cut", "0.2",
                       "--out-dir", str(tmp_path))
    assert code == 0
    assert "Estimating R" in out
    report = json.loads((tmp_path / "report.json").read_text())
    for arm, res in report["arms"].items():
        code, out, _ = run(capsys, "mse", str(tmp_path / res["trace_file"]), "--transient-cut", "0.2")
        assert code == 0
        got = json.loads(out)
        assert got["cut_index"] == 100
        assert got["mse_all"] == pytest.approx(res["mse_all"], rel=1e-12)
        assert got["mse_post"] == pytest.approx(res["mse_post"], rel=1e-12)


def test_sweep_command(tmp_path, capsys):
    code, out, _ = run(capsys, "sweep", "--n", "300", "--lambda", "0.99", "0.9",
                       "--out-dir", str(tmp_path))
    assert code == 0
    assert len(out.strip().splitlines()) == 3
    assert (tmp_path / "sweep.json").exists()


def test_config_file_with_override(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("n = 200\nseed = 4\nlambda = 0.95\n")
    code, out, _ = run(capsys, "identify", "--adaptive", "--config", str(cfg), "--seed", "6",
                       "--out-dir", str(tmp_path))
    assert code == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["config"]["seed"] == 6 and rep["config"]["lam"] == 0.95 and rep["n_samples"] == 200


@pytest.mark.parametrize("argv", [
    ["identify", "--lambda", "1.5"],
    ["identify", "--transient-cut", "2.5"],
    ["identify", "--r0", "-1"],
])
def test_config_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and "config error" in err


def test_bad_config_key_exit_2(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"speed": 3}')
    assert run(capsys, "identify", "--config", str(cfg))[0] == 2


def test_data_errors_exit_3(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,i,v\n0,1,abc\n")
    code, _, err = run(capsys, "identify", "--data", str(bad))
    assert code == 3 and "line 2" in err
    assert run(capsys, "identify", "--data", str(tmp_path / "missing.csv"))[0] == 3
    assert run(capsys, "mse", str(bad))[0] == 3


def test_numerical_failure_exit_4(tmp_path, capsys):
    # an absurd prior makes the innovation variance overflow
    csv = tmp_path / "s.csv"
    fdata.write_samples(csv, [(0.0, 5.0, 33.0), (0.1, 6.0, 32.0)])
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"P0": 1e307, "transient_cut": 0.0}))
    code, _, err = run(capsys, "identify", "--config", str(cfg), "--data", str(csv))
    assert code == 4
    assert "step 0" in err and "constant arm" in err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "fcid", "simulate", "--n", "10",
                           "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / "samples_squadrito.csv").exists()

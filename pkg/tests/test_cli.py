import csv
import json
import math
import subprocess
import sys

import pytest

from bosecorr.cli import CORRLEN_COLUMNS, THERMO_COLUMNS, main


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _header(path):
    with open(path) as fh:
        return fh.readline().strip().split(",")


def test_thermo_sweep_rows(tmp_path):
    out = tmp_path / "t.csv"
    code = main(["thermo", "--c", "2", "--mu", "1", "--t-min", "0.05", "--t-max", "2",
                 "--t-steps", "50", "--out", str(out)])
    assert code == 0
    assert _header(out) == THERMO_COLUMNS
    rows = _rows(out)
    assert len(rows) == 50
    assert all(not v.startswith("error") for r in rows for v in r.values())


def test_dilute_density_vanishes_with_T(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["thermo", "--mu", "-1", "--t-min", "0.05", "--t-max", "1", "--t-steps", "6",
                 "--out", str(out)]) == 0
    n = [float(r["density"]) for r in _rows(out)]
    assert all(a < b for a, b in zip(n, n[1:]))
    assert n[0] < 1e-8


@pytest.mark.parametrize("argv", [
    ["thermo", "--mu", "1", "--t-min", "2", "--t-max", "0.05", "--t-steps", "5"],
    ["corrlen", "--mu", "1", "--T", "0.5", "--sector", "magnetic"],
    ["thermo", "--mu", "1"],
    ["thermo", "--mu", "1", "--T", "0.5", "--format", "xml"],
    ["thermo", "--mu", "1", "--T", "-0.5"],
    ["corrlen", "--mu", "1", "--T", "0.5", "--sector", "density", "--branch", "0"],
    ["thermo", "--mu", "1", "--T", "0.5", "--bogus", "3"],
])
def test_config_errors(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path / "x")]) == 2


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"mu": 1.0, "T": 0.5, "colour": "red"}))
    assert main(["thermo", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"c": 2.0, "mu": 1.0, "T": 0.5}))
    out = tmp_path / "o.csv"
    assert main(["thermo", "--config", str(cfg), "--T", "0.25", "--out", str(out)]) == 0
    assert float(_rows(out)[0]["T"]) == 0.25


def test_json_output(tmp_path):
    out = tmp_path / "o.json"
    assert main(["thermo", "--mu", "1", "--T", "0.5", "--format", "json", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert list(data[0]) == THERMO_COLUMNS


def test_corrlen_columns_and_wavenumber(tmp_path):
    out = tmp_path / "d.csv"
    assert main(["corrlen", "--c", "2", "--mu", "1", "--T", "0.01", "--sector", "density",
                 "--out", str(out)]) == 0
    assert _header(out) == CORRLEN_COLUMNS
    row = _rows(out)[0]
    th = tmp_path / "t.csv"
    assert main(["thermo", "--c", "2", "--mu", "1", "--T", "0.01", "--out", str(th)]) == 0
    n = float(_rows(th)[0]["density"])
    assert float(row["two_kf"]) / (2 * math.pi * n) == pytest.approx(1.0, abs=1e-3)
    assert len(row["roots"].split(";")) == 2
    assert "function=" in row["residuals"]


def test_field_curves_low_T_shapes(tmp_path):
    # finite at mu < 0, sqrt(T) at mu = 0, linear at mu > 0
    out = tmp_path / "f.csv"
    assert main(["corrlen", "--c", "2", "--mu-min", "-1", "--mu-max", "1", "--mu-steps", "3",
                 "--t-min", "0.02", "--t-max", "0.04", "--t-steps", "2", "--out", str(out)]) == 0
    rows = _rows(out)
    ratio = {float(rows[i]["mu"]): float(rows[i + 1]["re_inv_xi"]) / float(rows[i]["re_inv_xi"])
             for i in (0, 2, 4)}
    assert ratio[-1.0] == pytest.approx(1.0, abs=0.1)
    assert ratio[0.0] == pytest.approx(math.sqrt(2), abs=0.1)
    assert ratio[1.0] == pytest.approx(2.0, abs=0.1)


def test_error_markers(tmp_path):
    # the oscillating pair leaves the strip |Im k| < c at high temperature
    out = tmp_path / "e.csv"
    code = main(["corrlen", "--c", "2", "--mu", "1", "--t-min", "1", "--t-max", "2", "--t-steps", "2",
                 "--t-scale", "lin", "--sector", "density", "--out", str(out)])
    assert code == 3
    rows = _rows(out)
    assert len(rows) == 2
    assert not rows[0]["re_inv_xi"].startswith("error")
    assert all(rows[1][k].startswith("error:") for k in CORRLEN_COLUMNS[5:])
    for r in rows:
        assert all(r[k] != "" for k in CORRLEN_COLUMNS)


def test_verify_passes(tmp_path):
    out = tmp_path / "v.json"
    assert main(["verify", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert all({"check", "bound", "measured", "pass"} <= set(e) for e in report)
    z = next(e for e in report if e["check"] == "z_bar")
    assert z["value"] == pytest.approx(1.38, abs=0.01)


def test_verify_tampered_bound_fails(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"verify_bounds": {"z_bar": 1e-6}}))
    out = tmp_path / "v.json"
    assert main(["verify", "--config", str(cfg), "--out", str(out)]) == 1
    report = json.loads(out.read_text())
    assert not next(e for e in report if e["check"] == "z_bar")["pass"]


def test_determinism_across_jobs(tmp_path):
    args = ["corrlen", "--c", "2", "--mu", "1", "--t-min", "0.1", "--t-max", "0.5", "--t-steps", "10",
            "--sector", "density"]
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert main(args + ["--jobs", "4", "--out", str(c)]) == 0
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()
    t1, t2 = tmp_path / "t1.csv", tmp_path / "t2.csv"
    targs = ["thermo", "--mu-min", "-1", "--mu-max", "1", "--mu-steps", "3", "--T", "0.3"]
    assert main(targs + ["--out", str(t1)]) == 0
    assert main(targs + ["--jobs", "3", "--out", str(t2)]) == 0
    assert t1.read_bytes() == t2.read_bytes()


def test_console_entry_point(tmp_path):
    out = tmp_path / "o.csv"
    res = subprocess.run([sys.executable, "-m", "bosecorr", "thermo", "--mu", "1", "--T", "0.5",
                          "--out", str(out)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert len(_rows(out)) == 1
    res = subprocess.run([sys.executable, "-m", "bosecorr", "thermo"], capture_output=True, text=True)
    assert res.returncode == 2
    assert "bosecorr:" in res.stderr

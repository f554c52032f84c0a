from __future__ import annotations

import csv
import subprocess
import sys

import pytest

from wimesh.cli import main

SMALL = "rows = 4\ncols = 4\nsubnet_size = 4\nwarmup_cycles = 200\nmeasure_cycles = 2000\n"


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL + "scheme = dsam\ninjection_load = 0.05\n")
    return p


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_writes_report(tmp_path, cfg_file, capsys):
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg_file), "--seed", "3", "--out-dir", str(out),
                 "--slot-csv", "--verbose-events"]) == 0
    rows = read_csv(out / "run.csv")
    assert len(rows) == 1 and rows[0]["scheme"] == "dsam" and rows[0]["seed"] == "3"
    assert "seed = 3" in (out / "config.txt").read_text()
    assert read_csv(out / "events.csv")[0].keys() == {"cycle", "event", "node", "packet_id", "seq"}
    assert read_csv(out / "slots.csv")
    assert "bandwidth_per_core_gbps" in capsys.readouterr().out


def test_run_is_byte_identical(tmp_path, cfg_file):
    for d in ("a", "b"):
        main(["run", "--config", str(cfg_file), "--out-dir", str(tmp_path / d)])
    assert (tmp_path / "a" / "run.csv").read_bytes() == (tmp_path / "b" / "run.csv").read_bytes()


def test_sweep_load(tmp_path, cfg_file):
    out = tmp_path / "o"
    assert main(["sweep-load", "--config", str(cfg_file), "--loads", "0.01,0.05,0.2",
                 "--out-dir", str(out)]) == 0
    assert [r["load"] for r in read_csv(out / "sweep_load.csv")] == ["0.01", "0.05", "0.2"]


def test_sweep_subnet(tmp_path, cfg_file):
    out = tmp_path / "o"
    assert main(["sweep-subnet", "--config", str(cfg_file), "--sizes", "4,8",
                 "--loads", "0.02,0.1", "--out-dir", str(out)]) == 0
    assert len(read_csv(out / "sweep_subnet.csv")) == 2


def test_compare_with_plots(tmp_path, cfg_file):
    pytest.importorskip("matplotlib")
    out = tmp_path / "o"
    assert main(["compare", "--config", str(cfg_file), "--schemes", "tmac,dsam",
                 "--baseline", "none", "--loads", "0.01,0.1", "--out-dir", str(out),
                 "--emit-plots"]) == 0
    rep = read_csv(out / "compare.csv")
    assert [r["scheme"] for r in rep] == ["none", "tmac", "dsam"]
    assert float(rep[0]["delta_peak_pct"]) == 0.0
    assert len(read_csv(out / "compare_runs.csv")) == 6
    assert (out / "latency.png").exists() and (out / "peak_bandwidth.png").exists()


def test_tune(tmp_path, cfg_file):
    out = tmp_path / "o"
    assert main(["tune", "--config", str(cfg_file), "--epochs", "300", "--epoch-cycles", "100",
                 "--rounds", "50", "--out-dir", str(out)]) == 0
    text = (out / "weights.txt").read_text()
    assert all(f"{k} = " in text for k in ("kp", "ki", "kd"))
    trace = [float(x) for x in (out / "cost_trace.txt").read_text().split()]
    assert trace == sorted(trace, reverse=True)


def test_bad_config_exits_nonzero(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("subnet_size = 7\n")
    assert main(["run", "--config", str(p), "--out-dir", str(tmp_path)]) == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "wimesh", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("run", "sweep-load", "sweep-subnet", "compare", "tune"):
        assert cmd in r.stdout

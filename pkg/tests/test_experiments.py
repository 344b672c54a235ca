import csv
import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from sheetdce import experiments
from sheetdce.cli import main
from sheetdce.config import ConfigError, default_config, parse_config, parse_grid
from sheetdce.core import Polarization
from sheetdce.experiments import SweepSpec, run

SMALL = """
[pulse]
period_ps = 105
n_pulses = 2
[evolve]
ell_max = 6
sample_ps = 5
report_modes = 3
[sweep]
periods_ps = 104:106:1
modes = multi, single
etas = 0.5
[spectrum]
vmax_lz = 5000, 1
ell_max = 3
n_samples = 400
"""


def _files(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.is_file()}


def _rows(path: Path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


@pytest.fixture
def ini(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text(SMALL)
    return p


# ---------------------------------------------------------------- config

def test_parse_grid():
    assert parse_grid("104:106:0.5") == [104.0, 104.5, 105.0, 105.5, 106.0]
    assert parse_grid("0.05, 0.5") == [0.05, 0.5]
    for bad in ("1:2", "3:1:1", "1:2:0", ""):
        with pytest.raises(ConfigError):
            parse_grid(bad)


def test_config_defaults_and_overrides():
    d = default_config()
    assert d.evolution.ell_max == 51 and d.evolution.step_ps == 0.01
    assert d.evolution.profile.n_pulses == 11
    c = parse_config(SMALL)
    assert c.evolution.ell_max == 6 and c.sweep.periods_ps == (104.0, 105.0, 106.0)
    assert c.sweep.modes == ("multi", "single")
    assert c.spectrum.vmax_lz == (5000.0, 1.0)
    assert parse_config("[evolve]\npolarization = tm\n").evolution.pol is Polarization.TM


def test_config_errors():
    for text in ("[evolve]\nell_maxx = 3\n", "[nope]\n", "[cavity]\neta = 1.5\n",
                 "[evolve]\nsingle_mode = maybe\n", "[pulse]\nperiod_ps = 50\n", "garbage"):
        with pytest.raises(ConfigError):
            parse_config(text)


def test_config_hash():
    a = parse_config(SMALL)
    assert a.hash() == parse_config(SMALL + "\n; comment\n").hash()
    assert a.hash() != parse_config(SMALL.replace("ell_max = 6", "ell_max = 7")).hash()
    assert len(a.hash()) == 16


# ---------------------------------------------------------------- experiments

def test_evolve_outputs_and_determinism(ini, tmp_path):
    r = CliRunner()
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        res = r.invoke(main, ["evolve", "--config", str(ini), "--out", str(out)])
        assert res.exit_code == 0, res.output
    assert _files(out1) == _files(out2)
    text = (out1 / "trajectory.csv").read_text()
    h = parse_config(SMALL).hash()
    assert f"# config_hash={h}" in text
    rows = _rows(out1 / "trajectory.csv")
    assert list(rows[0])[:4] == ["t_ps", "V_Lz", "in_pulse", "unitarity_dev"]
    assert "N_3" in rows[0] and "N_4" not in rows[0]
    assert len(rows) == 2 * 21 + 1
    summ = json.loads((out1 / "summary.json").read_text())
    assert summ["config_hash"] == h and summ["n_failed"] == 0
    snap = summ["snapshots"][7]
    assert set(snap) >= {"t", "N", "unitarity_dev"} and len(snap["N"]) == 6


def test_evolve_flags_override(ini, tmp_path):
    out = tmp_path / "o"
    res = CliRunner().invoke(main, [
        "evolve", "--config", str(ini), "--out", str(out), "--pol", "TM", "--eta", "0.3",
        "--period", "110", "--vmax", "1", "--ell-max", "3", "--step", "0.02",
        "--n-pulses", "1", "--single-mode"])
    assert res.exit_code == 0, res.output
    rec = json.loads((out / "summary.json").read_text())["records"][0]
    assert (rec["pol"], rec["eta"], rec["T_ps"], rec["vmax_lz"], rec["ell_max"]) == \
        ("TM", 0.3, 110.0, 1.0, 3)
    assert rec["single_mode"] == "zero_coupling" and rec["step_ps"] <= 0.02


def test_vacuum_evolve_is_flat(tmp_path):
    cfg = parse_config(SMALL.replace("[pulse]", "[pulse]\nvmax_lz = 0"))
    res = run(SweepSpec.from_config(cfg, "evolve", tmp_path))
    assert res.ok
    N = np.array([[float(r[f"N_{m}"]) for m in (1, 2, 3)] for r in _rows(tmp_path / "trajectory.csv")])
    assert np.abs(N).max() < 1e-12


def test_period_sweep_resume(ini, tmp_path, monkeypatch):
    out = tmp_path / "sw"
    r = CliRunner()
    res = r.invoke(main, ["sweep-period", "--config", str(ini), "--out", str(out)])
    assert res.exit_code == 0, res.output
    first = _files(out)
    rows = _rows(out / "sweep_period.csv")
    assert len(rows) == 6 and {r["mode"] for r in rows} == {"multi", "single"}
    summ = json.loads(first["summary.json"])
    assert len(summ["optima"]) == 2

    calls = []
    monkeypatch.setattr(experiments, "n111_at_end", lambda c: calls.append(c) or (0.0, 0.0))
    res = r.invoke(main, ["sweep-period", "--config", str(ini), "--out", str(out)])
    assert res.exit_code == 0 and calls == []
    assert _files(out) == first

    # a torn ledger line and one missing point: only that point reruns
    led = out / "points.jsonl"
    lines = led.read_text().splitlines()
    led.write_text("\n".join(lines[:-1]) + "\n" + lines[-1][:20])
    monkeypatch.undo()
    res = r.invoke(main, ["sweep-period", "--config", str(ini), "--out", str(out)])
    assert res.exit_code == 0
    assert _files(out) == first


def test_sweep_hash_change_invalidates(ini, tmp_path, monkeypatch):
    out = tmp_path / "sw"
    spec = SweepSpec.from_config(parse_config(SMALL), "period_sweep", out)
    monkeypatch.setattr(experiments, "n111_at_end", lambda c: (1.0, 0.0))
    run(spec)
    seen = []
    monkeypatch.setattr(experiments, "n111_at_end", lambda c: seen.append(c) or (2.0, 0.0))
    spec2 = SweepSpec.from_config(parse_config(SMALL.replace("ell_max = 6", "ell_max = 5")),
                                  "period_sweep", out)
    res = run(spec2)
    assert len(seen) == 6 and all(r["N111"] == 2.0 for r in res.records)


def test_failed_point_sets_exit_code(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text(SMALL.replace("periods_ps = 104:106:1", "periods_ps = 60, 105"))
    res = CliRunner().invoke(main, ["sweep-period", "--config", str(p), "--out",
                                    str(tmp_path / "o")])
    assert res.exit_code == 1
    rows = _rows(tmp_path / "o" / "sweep_period.csv")
    assert [r["status"] for r in rows] == ["error", "ok", "error", "ok"]
    assert "relax" in rows[0]["error"]


def test_position_sweep(tmp_path, monkeypatch):
    # N111 peaked at T = 104.3 for every point; checks the golden refinement plumbing
    monkeypatch.setattr(experiments, "n111_at_end",
                        lambda c: (1.0 / (1.0 + (c.profile.period - 104.3) ** 2), 0.0))
    cfg = parse_config(SMALL.replace("etas = 0.5", "etas = 0.05, 0.5"))
    res = run(SweepSpec.from_config(cfg, "position_sweep", tmp_path))
    assert res.ok and len(res.records) == 2
    for r in res.records:
        assert r["T_opt_ps"] == pytest.approx(104.3, abs=0.05)
    assert (tmp_path / "sweep_position.csv").exists()


def test_spectrum_scan(ini, tmp_path):
    out = tmp_path / "sp"
    res = CliRunner().invoke(main, ["spectrum", "--config", str(ini), "--out", str(out)])
    assert res.exit_code == 0, res.output
    rows = _rows(out / "spectrum_TE_V5000.csv")
    assert len(rows) == 400
    k1 = float(rows[150]["k_1"])
    assert float(rows[150]["ck_1_rad_s"]) == pytest.approx(k1 * 299792458.0 / 0.1, rel=1e-12)
    summ = json.loads((out / "summary.json").read_text())
    recs = {(r["pol"], r["vmax_lz"]): r for r in summ["records"]}
    assert recs[("TE", 5000.0)]["k_excursion"][0] > recs[("TE", 1.0)]["k_excursion"][0]
    assert len(recs[("TM", 5000.0)]["half_period_ps"]) == 3
    res = CliRunner().invoke(main, ["spectrum", "scan", "--config", str(ini), "--out",
                                    str(tmp_path / "sp2")])
    assert res.exit_code == 0
    assert _files(out) == _files(tmp_path / "sp2")


def test_pulse_and_coupling_dump(ini, tmp_path):
    r = CliRunner()
    res = r.invoke(main, ["pulse", "dump", "--config", str(ini), "--samples", "100"])
    assert res.exit_code == 0
    lines = [ln for ln in res.output.splitlines() if not ln.startswith("#")]
    assert len(lines) == 101
    f = tmp_path / "c.csv"
    res = r.invoke(main, ["coupling", "dump", "--config", str(ini), "--modes", "3",
                          "--samples", "50", "--out", str(f)])
    assert res.exit_code == 0
    rows = _rows(f)
    assert len(rows) == 50 and "M_1_3" in rows[0] and "M_2_3" in rows[0]
    # odd-even pairs at the midpoint never couple in TE
    m12 = max(abs(float(row["M_1_2"])) for row in rows)
    m13 = max(abs(float(row["M_1_3"])) for row in rows)
    assert m13 > 0 and m12 < 1e-12 * m13


def test_bad_config_is_usage_error(tmp_path):
    p = tmp_path / "x.ini"
    p.write_text("[evolve]\nell_max = -2\n")
    res = CliRunner().invoke(main, ["evolve", "--config", str(p), "--out", str(tmp_path)])
    assert res.exit_code == 2

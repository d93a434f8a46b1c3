import csv
import json

import numpy as np
import pytest

import oracles
from bfeclock import cli


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def _summary(path):
    return {r["quantity"]: r["value"] for r in _rows(path)}


def _run(*argv):
    return cli.main([str(a) for a in argv])


SHORT = "[scheme]\na = 1.25\ng = 1\nm_tilde = 2\nm_b = 8\nt_max_ms = 20\n[signal]\nr = 1540\n"


def test_estimate_outputs_and_determinism(tmp_path):
    cfg = _write(tmp_path, SHORT)
    for name, workers in (("a", 1), ("b", 1), ("c", 2)):
        assert _run("estimate", "--config", cfg, "--trials", 3, "--seed", 4,
                    "--workers", workers, "--out", tmp_path / name) == 0
    for stem in ("trace_0000", "trace_0002", "aggregate", "summary"):
        a = (tmp_path / "a" / f"{stem}.csv").read_bytes()
        assert a == (tmp_path / "b" / f"{stem}.csv").read_bytes()
        assert a == (tmp_path / "c" / f"{stem}.csv").read_bytes()
    rows = _rows(tmp_path / "a" / "trace_0000.csv")
    assert len(rows) == 8 and list(rows[0])[:3] == ["i", "T_i_s", "f_i_hz"]


def test_trial_reproducible_in_isolation(tmp_path):
    cfg = cli.load_config(_write(tmp_path, SHORT))
    assert cli.run_trial((cfg, cfg.scheme, 9, 5)) == cli.run_trial((cfg, cfg.scheme, 9, 5))
    assert cli.run_trial((cfg, cfg.scheme, 9, 5)) != cli.run_trial((cfg, cfg.scheme, 9, 6))


def test_estimate_fig3_scheme(tmp_path):
    cfg = _write(tmp_path, "[scheme]\na = 10/9\nm_tilde = 40\nm_b = 85\n")
    assert _run("estimate", "--config", cfg, "--trials", 40, "--out", tmp_path / "o") == 0
    s = _summary(tmp_path / "o" / "summary.csv")
    assert 0 < float(s["final_std_hz"]) < np.inf
    assert float(s["ramp_slope"]) == pytest.approx(-1.0, abs=0.3)


def test_json_format(tmp_path):
    cfg = _write(tmp_path, SHORT)
    assert _run("estimate", "--config", cfg, "--format", "json", "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "trace_0000.json").read_text())
    assert doc["columns"][0] == "i" and len(doc["rows"]) == 8


@pytest.mark.parametrize("text,key", [
    ("[scheme]\na = 1.25\n", "scheme.m_b"),
    ("[scheme]\na = 1.25\nm_b = 5\nbogus = 1\n", "scheme.bogus"),
    ("[scheme]\na = x\nm_b = 5\n", "scheme.a"),
    ("[scheme]\na = 0.9\nm_b = 5\n", "scheme.a"),
    ("[scheme]\na = 1.25\nm_b = 5\n[signal]\nr = -1\n", "signal"),
    ("[scheme]\na = 1.25\nm_b = 5\n[weird]\nx = 1\n", "weird"),
])
def test_config_errors_name_key(tmp_path, capsys, text, key):
    cfg = _write(tmp_path, text)
    assert _run("estimate", "--config", cfg, "--out", tmp_path / "o") == 2
    assert key in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert _run("estimate", "--config", tmp_path / "nope.ini", "--out", tmp_path) == 2


def test_shift_table_relative_path(tmp_path):
    (tmp_path / "shift.txt").write_text("0.001 0.2\n0.02 0.4\n")
    cfg = _write(tmp_path, SHORT + "shift_table = shift.txt\n")
    assert _run("estimate", "--config", cfg, "--out", tmp_path / "o") == 0
    rows = _rows(tmp_path / "o" / "trace_0000.csv")
    assert float(rows[-1]["f_s_hz"]) == pytest.approx(0.4)


def test_scaling_report(tmp_path):
    cfg = _write(tmp_path, "[scaling]\nschemes = 1.25,1,0,10; 1.25,1,3,12\nplateau_skip = 1\n")
    assert _run("scaling", "--config", cfg, "--trials", 20, "--out", tmp_path) == 0
    fits = _rows(tmp_path / "scaling_fits.csv")
    assert [f["region"] for f in fits] == ["ramp", "ramp", "plateau"]
    for f in fits:
        assert {"slope", "residual", "intercept"} <= set(f)
        assert np.isfinite(float(f["slope"])) and float(f["residual"]) >= 0


def test_scaling_near_noiseless_tracks_analytic(tmp_path):
    # R = 1e4 keeps the likelihood resolved by the default grid
    cfg = _write(tmp_path, "[scheme]\na = 1.25\nm_b = 20\n[signal]\nr = 1e4\n")
    assert _run("scaling", "--config", cfg, "--trials", 100, "--out", tmp_path) == 0
    rows = _rows(tmp_path / "scaling.csv")
    ratio = [float(r["std_hz"]) / float(r["fisher_hz"]) for r in rows[4:]]
    assert np.median(ratio) == pytest.approx(1.0, abs=0.1)


LOCK = "[scheme]\na = 1.25\nm_tilde = 6\nm_b = 13\n[lock]\n"


def test_lock_zero_cycles(tmp_path):
    cfg = _write(tmp_path, LOCK + "cycles = 0\n")
    assert _run("lock", "--config", cfg, "--out", tmp_path) == 0
    for m in ("pid", "bfe"):
        text = (tmp_path / f"lock_{m}_0000.csv").read_text()
        assert text == "cycle,time_s,delta_nu_hz,correction_hz\n"


def test_lock_open_loop_pid_follows_lo(tmp_path):
    sigma = 1e-11
    cfg = _write(tmp_path, f"[lock]\nmethods = pid\ncycles = 20000\nk_p = 0\nk_i = 0\n"
                           f"white_fm_sigma = {sigma}\nfit_tau_max_s = 10\n")
    assert _run("lock", "--config", cfg, "--out", tmp_path) == 0
    s = _summary(tmp_path / "lock_summary.csv")
    # the LO noise dominates the projection noise by a factor of ~40 here
    assert float(s["pid_coefficient"]) == pytest.approx(sigma, rel=0.1)


def test_lock_comparison_summary(tmp_path):
    cfg = _write(tmp_path, LOCK + "duration_s = 40\n")
    assert _run("lock", "--config", cfg, "--trials", 2, "--out", tmp_path / "a") == 0
    assert _run("lock", "--config", cfg, "--trials", 2, "--out", tmp_path / "b") == 0
    s = _summary(tmp_path / "a" / "lock_summary.csv")
    assert np.isfinite(float(s["improvement_db"]))
    assert float(s["bfe_cycle_duration_s"]) == pytest.approx(0.199, abs=5e-4)
    for f in ("lock_summary", "allan_pid", "allan_bfe", "lock_bfe_0001"):
        assert (tmp_path / "a" / f"{f}.csv").read_bytes() == (tmp_path / "b" / f"{f}.csv").read_bytes()


def test_lock_bfe_needs_scheme(tmp_path, capsys):
    cfg = _write(tmp_path, "[lock]\ncycles = 3\n")
    assert _run("lock", "--config", cfg, "--out", tmp_path) == 2
    assert "scheme" in capsys.readouterr().err


def _trace_file(path, dnu, tau0=0.04):
    lines = ["cycle,time_s,delta_nu_hz,correction_hz"]
    lines += [f"{k + 1},{(k + 1) * tau0!r},{float(v)!r},0" for k, v in enumerate(dnu)]
    path.write_text("\n".join(lines) + "\n")
    return path


def test_analyze_constant_trace(tmp_path):
    f = _trace_file(tmp_path / "c.csv", [0.25] * 100)
    assert _run("analyze", f, "--out", tmp_path / "o") == 0
    assert all(float(r["adev"]) == 0.0 for r in _rows(tmp_path / "o" / "allan_0000.csv"))


def test_analyze_white_fm(tmp_path):
    nominal = 6.834682610904e9
    y = oracles.white_fm(20_000, 2e-12, 0.04, np.random.default_rng(0))
    f = _trace_file(tmp_path / "w.csv", y * nominal)
    assert _run("analyze", f, "--out", tmp_path / "o") == 0
    row = _rows(tmp_path / "o" / "analyze_summary.csv")[0]
    assert float(row["coefficient"]) == pytest.approx(2e-12, rel=0.1)
    assert float(row["slope"]) == pytest.approx(-0.5, abs=0.1)


def test_analyze_reads_lock_output(tmp_path):
    cfg = _write(tmp_path, "[lock]\nmethods = pid\ncycles = 200\n")
    assert _run("lock", "--config", cfg, "--out", tmp_path) == 0
    assert _run("analyze", tmp_path / "lock_pid_0000.csv", "--out", tmp_path / "o") == 0


def test_analyze_truncated_file(tmp_path, capsys):
    f = _trace_file(tmp_path / "t.csv", np.linspace(0, 1, 60))
    text = f.read_text().splitlines()
    text[50] = text[50][:4]
    f.write_text("\n".join(text) + "\n")
    assert _run("analyze", f, "--out", tmp_path / "o") == 2
    assert "line 51" in capsys.readouterr().err


def test_analyze_bad_header(tmp_path, capsys):
    f = tmp_path / "h.csv"
    f.write_text("a,b\n1,2\n")
    assert _run("analyze", f, "--out", tmp_path / "o") == 2
    assert "line 1" in capsys.readouterr().err


def test_runtime_error_exit_code(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("boom")

    monkeypatch.setitem(cli.COMMANDS, "estimate", boom)
    assert _run("estimate", "--config", _write(tmp_path, SHORT), "--out", tmp_path) == 3

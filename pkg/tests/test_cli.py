import csv
import json
import subprocess
import sys
import time

import numpy as np
import pytest

from casimirlab import cli
from casimirlab.config import load_config, parse_config
from casimirlab.errors import AccuracyError
from casimirlab.lifshitz import ideal_metal_pressure

from conftest import OFFSET_BAND, OFFSET_GRID


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(argv):
    return cli.main([str(a) for a in argv])


# ----------------------------------------------------------------- epsilon

def test_epsilon_drude_rows(tmp_path):
    assert run(["epsilon", "--model", "drude", "--wp", 9.0, "--gamma", 0.035,
                "--xi", 0.035, 9.0, "--output", tmp_path]) == 0
    got = rows(tmp_path / "epsilon.csv")
    assert float(got[0]["eps"]) == pytest.approx(33062.2, abs=0.05)
    assert float(got[1]["eps"]) == pytest.approx(1 + 81 / (9 * 9.035), rel=1e-10)
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["series"][1]["eps"] == float(got[1]["eps"])


def test_epsilon_plasma(tmp_path):
    run(["epsilon", "--model", "plasma-like", "--wp", 8.9, "--xi", 8.9, "--output", tmp_path,
         "--format", "csv"])
    assert rows(tmp_path / "epsilon.csv") == [{"xi_eV": "8.9", "eps": "2"}]
    assert not (tmp_path / "report.json").exists()


def test_epsilon_windowed_near_root(tmp_path, gold_like_table, caplog):
    table = tmp_path / "table.csv"
    lines = ["omega_eV,im_eps,re_eps"] + [
        f"{w:.17g},{i:.17g},{r:.17g}" for w, i, r in zip(gold_like_table.omega, gold_like_table.im_eps,
                                              gold_like_table.re_eps)]
    table.write_text("\n".join(lines) + "\n")
    code = run(["epsilon", "--model", "windowed-kk", "--table", table, "--omega-c", 1, -2,
                "--p", 1, "--q", 3, "--xi", 1.0, 2.3813, 5.0, "--output", tmp_path / "out"])
    assert code == 0
    got = rows(tmp_path / "out" / "epsilon.csv")
    assert [r["xi_eV"] for r in got] == ["1", "5"]
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["warnings"][0]["xi_eV"] == 2.3813
    assert report["warnings"][0]["warning"] == "near-root"
    assert "guard threshold" in caplog.text


# ---------------------------------------------------------------- pressure

def test_pressure_ideal_metal(tmp_path):
    assert run(["pressure", "--model", "plasma-like", "--wp", 900, "--grid", 1000, 1000, 1,
                "--output", tmp_path]) == 0
    (row,) = rows(tmp_path / "pressure.csv")
    assert float(row["P_mPa"]) == pytest.approx(-1.300, rel=5e-3)
    assert float(row["P_mPa"]) == pytest.approx(ideal_metal_pressure(1000.0), rel=5e-3)


def test_flat_roughness_is_identity(tmp_path):
    flat = tmp_path / "flat.csv"
    flat.write_text("v,h_nm\n1,0\n")
    run(["pressure", "--model", "drude", "--wp", 9, "--gamma", 0.035, "--grid", 200, 400, 3,
         "--plate-roughness", flat, "--sphere-roughness", flat, "--output", tmp_path])
    for r in rows(tmp_path / "pressure.csv"):
        assert r["P_rough_mPa"] == r["P_mPa"]


def test_two_level_roughness_strengthens(tmp_path):
    prof = tmp_path / "plate.csv"
    prof.write_text("v,h_nm\n0.5,0\n0.5,10\n")
    run(["pressure", "--model", "plasma-like", "--wp", 8.9, "--grid", 300, 300, 1,
         "--plate-roughness", prof, "--output", tmp_path])
    (r,) = rows(tmp_path / "pressure.csv")
    assert float(r["P_rough_mPa"]) < float(r["P_mPa"]) < 0


def test_log_grid_runtime(tmp_path):
    t0 = time.perf_counter()
    run(["pressure", "--model", "drude", "--wp", 8.9, "--gamma", 0.0357,
         "--grid", 160, 750, 60, "--spacing", "log", "--output", tmp_path, "--format", "csv"])
    assert time.perf_counter() - t0 < 60 * 5.0
    p = [float(r["P_mPa"]) for r in rows(tmp_path / "pressure.csv")]
    assert len(p) == 60 and all(np.diff(p) > 0)


def test_pressure_runs_are_byte_identical(tmp_path):
    args = ["pressure", "--model", "drude", "--wp", 8.9, "--gamma", 0.0357,
            "--grid", 200, 600, 5, "--temperature", 300, "--output"]
    run(args + [tmp_path / "a"])
    run(args + [tmp_path / "b"])
    for name in ("pressure.csv",):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    ra = json.loads((tmp_path / "a" / "report.json").read_text())
    rb = json.loads((tmp_path / "b" / "report.json").read_text())
    ra["config"].pop("output"), rb["config"].pop("output")
    assert ra == rb
    assert b"\r" not in (tmp_path / "a" / "pressure.csv").read_bytes()


def test_config_echo_round_trips(tmp_path):
    run(["pressure", "--model", "plasma-like", "--wp", 8.9, "--grid", 300, 400, 2,
         "--output", tmp_path])
    echo = json.loads((tmp_path / "report.json").read_text())["config"]
    assert parse_config(echo).echo() == echo


def test_accuracy_failure_reported_per_row(tmp_path, monkeypatch):
    real = cli.pressure_T0

    def flaky(a, model, settings):
        if a == 300.0:
            raise AccuracyError("forced", estimate=-1.5, error=0.2)
        return real(a, model, settings)

    monkeypatch.setattr(cli, "pressure_T0", flaky)
    code = run(["pressure", "--model", "plasma-like", "--wp", 8.9, "--grid", 200, 400, 3,
                "--output", tmp_path])
    assert code == 4
    got = rows(tmp_path / "pressure.csv")
    assert len(got) == 3 and got[1]["P_mPa"] == "-1.5"
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["series"][1]["status"].startswith("accuracy-error")
    assert report["series"][0]["status"] == "ok"


# ----------------------------------------------------------------- compare

def test_compare_identical_is_consistent(tmp_path, offset_theory, capsys):
    exp = tmp_path / "same.csv"
    exp.write_text("a_nm,P_mPa,Xi95_mPa\n" + "".join(
        f"{a:.17g},{p:.17g},{0.05 * abs(p):.17g}\n" for a, p in zip(OFFSET_GRID, offset_theory)))
    assert run(["compare", "--model", "plasma-like", "--wp", 8.9, "--experiment", exp,
                "--output", tmp_path / "out"]) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert {k: v["verdict"] for k, v in report["levels"].items()} == \
        {"0.95": "consistent", "0.70": "consistent"}


@pytest.mark.parametrize("dist", ["normal", "uniform"])
def test_compare_offset_fixture(tmp_path, offset_experiment, dist):
    out = tmp_path / "out"
    assert run(["compare", "--model", "plasma-like", "--wp", 8.9, "--experiment",
                offset_experiment, "--distribution", dist, "--output", out]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["levels"]["0.95"]["verdict"] == "consistent"
    assert report["levels"]["0.70"]["exclusion_intervals_nm"] == [list(OFFSET_BAND)]
    diffs = rows(out / "differences.csv")
    assert list(diffs[0]) == ["a_nm", "diff_mPa", "Xi_0.95_mPa", "outside_0.95",
                              "Xi_0.70_mPa", "outside_0.70"]
    flagged = [float(r["a_nm"]) for r in diffs if r["outside_0.70"] == "true"]
    assert flagged == [a for a in OFFSET_GRID if OFFSET_BAND[0] <= a <= OFFSET_BAND[1]]
    band = rows(out / "band_cross.csv")
    assert len(band) == len(OFFSET_GRID)


def test_compare_single_level(tmp_path, offset_experiment):
    run(["compare", "--model", "plasma-like", "--wp", 8.9, "--experiment", offset_experiment,
         "--confidence", "0.70", "--output", tmp_path])
    assert list(rows(tmp_path / "differences.csv")[0]) == ["a_nm", "diff_mPa", "Xi_0.70_mPa",
                                                           "outside_0.70"]


def test_compare_two_models(tmp_path, offset_experiment):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "models": [{"kind": "drude", "tag": "drude", "plasma_frequency_eV": 8.9,
                    "relaxation_eV": 0.0357},
                   {"kind": "plasma-like", "tag": "plasma", "plasma_frequency_eV": 8.9}],
        "experiment": offset_experiment.name,
        "output": "results",
    }))
    assert run(["compare", "--config", cfg]) == 0
    for tag in ("drude", "plasma"):
        report = json.loads((tmp_path / "results" / tag / "report.json").read_text())
        assert report["model"] == tag
        assert (tmp_path / "results" / tag / "differences.csv").exists()


def test_compare_alignment(tmp_path, offset_experiment, capsys):
    code = run(["compare", "--model", "plasma-like", "--wp", 8.9, "--experiment",
                offset_experiment, "--grid", 300, 500, 6, "--output", tmp_path])
    assert code == 2
    err = capsys.readouterr().err
    assert "unmatched" in err and "320.0" in err
    code = run(["compare", "--model", "plasma-like", "--wp", 8.9, "--experiment",
                offset_experiment, "--grid", 300, 500, 6, "--interpolate", "--output", tmp_path])
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["warnings"]


# ----------------------------------------------------------- small tools

def test_window_roots(tmp_path, capsys):
    assert run(["window-roots", "--output", tmp_path]) == 0
    assert capsys.readouterr().out.strip() == "2.381286268"
    run(["window-roots", "--p", 1, "--q", 2, "--output", tmp_path, "--format", "csv"])
    assert rows(tmp_path / "window_roots.csv") == [{"root_eV": "1.077683537"}]


def test_patch_check(tmp_path):
    assert run(["patch-check", "--output", tmp_path]) == 0
    report = json.loads((tmp_path / "patch_check.json").read_text())
    assert report["patch_area_um2"] == pytest.approx(0.0707, rel=1e-3)
    assert report["effective_area_um2"] == pytest.approx(150.80, rel=1e-3)
    assert report["small_patch_regime"] is True


# ------------------------------------------------------------ exit codes

def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["pressure", "--config", bad]) == 2
    assert run(["pressure", "--model", "drude", "--wp", 9, "--output", tmp_path]) == 2
    assert run(["pressure", "--model", "plasma-like", "--wp", 8.9, "--grid", -10, 100, 2,
                "--output", tmp_path]) == 3
    assert run(["window-roots", "--omega-c", 1, 2, "--output", tmp_path]) == 2
    missing = tmp_path / "nope.csv"
    assert run(["compare", "--model", "plasma-like", "--wp", 8.9, "--experiment", missing,
                "--output", tmp_path]) == 2


def test_finite_temperature_needs_zero_mode(tmp_path, gold_like_table):
    table = tmp_path / "t.csv"
    table.write_text("omega_eV,im_eps\n" + "".join(
        f"{w:.17g},{i:.17g}\n" for w, i in zip(gold_like_table.omega, gold_like_table.im_eps)))
    code = run(["pressure", "--model", "tabulated-kk", "--table", table, "--low-frequency",
                "none", "--temperature", 300, "--grid", 300, 300, 1, "--output", tmp_path])
    assert code == 2


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"model": {"kind": "drude", "plasma_frequency_eV": 9.0,
                                         "relaxation_eV": 0.035},
                               "xi_grid": {"values": [1.0]}, "output": "o"}))
    run(["epsilon", "--config", cfg, "--wp", 8.9])
    (r,) = rows(tmp_path / "o" / "epsilon.csv")
    assert float(r["eps"]) == pytest.approx(1 + 8.9 ** 2 / 1.035, rel=1e-10)
    assert load_config(cfg).models[0].plasma_frequency_eV == 9.0


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "casimirlab", "patch-check", "--output",
                          str(tmp_path)], capture_output=True, text=True, check=True)
    assert "small_patch_regime=true" in out.stdout

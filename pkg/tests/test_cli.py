import json

import pytest

from lightcone_lab import cli
from lightcone_lab import plots


def write(tmp_path, obj, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return p


def strip_clock(path):
    rep = json.loads(path.read_text())
    rep.pop("wall_clock")
    return rep


# ---------------------------------------------------------------- validation

def test_unknown_param_named(tmp_path, capsys):
    p = write(tmp_path, {"version": 1, "kind": "indicator-einstein", "params": {"rho5": 0.1}})
    assert cli.main(["validate", str(p)]) == 2
    assert "rho5" in capsys.readouterr().err


def test_unknown_top_key_and_observer_key():
    with pytest.raises(cli.InputError, match="'colour'"):
        cli.validate({"version": 1, "kind": "geometry-suite", "colour": 1})
    with pytest.raises(cli.InputError, match="observers.speed"):
        cli.validate({"version": 1, "kind": "geometry-suite", "observers": {"speed": 1}})


def test_version_required():
    with pytest.raises(cli.InputError, match="version"):
        cli.validate({"kind": "geometry-suite"})


def test_bad_kind_and_types():
    with pytest.raises(cli.InputError, match="kind"):
        cli.validate({"version": 1, "kind": "nope"})
    with pytest.raises(cli.InputError, match="params.n_points"):
        cli.validate({"version": 1, "kind": "geometry-suite", "params": {"n_points": "ten"}})
    with pytest.raises(cli.InputError, match="params.dim"):
        cli.validate({"version": 1, "kind": "interaction", "params": {"dim": 3}})
    with pytest.raises(cli.InputError, match="metric"):
        cli.validate({"version": 1, "kind": "geometry-suite", "metric": {"family": "sphere"}})


def test_parse_error_reports_position(tmp_path, capsys):
    p = write(tmp_path, '{"version": 1,\n "kind": }')
    assert cli.main(["run", str(p), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "line 2" in err and "column" in err


def test_scenario_roundtrip():
    raw = {"version": 1, "kind": "reconstruction", "params": {"n_tq": 3}, "seed": 7,
           "observers": {"h_hat": 0.1, "n": 8}, "out": "x"}
    sc = cli.validate(raw)
    again = cli.validate(json.loads(json.dumps(sc.to_dict())))
    assert again == sc


# ------------------------------------------------------------------- runs

def test_einstein_run_reports_beta1_pair(tmp_path, capsys):
    p = write(tmp_path, {"version": 1, "kind": "indicator-einstein", "params": {"hierarchy": True}})
    assert cli.main(["run", str(p), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    check = next(c for c in rep["checks"] if c["name"] == "dominant term is the beta1 pair")
    assert check["pass"] and check["value"] == "yes"
    assert (tmp_path / "o" / "dominance.svg").exists()
    assert "PASS" in capsys.readouterr().out


def test_same_seed_byte_identical(tmp_path):
    p = write(tmp_path, {"version": 1, "kind": "geometry-suite", "seed": 3})
    for o in ("a", "b"):
        assert cli.main(["run", str(p), "--out", str(tmp_path / o)]) == 0
    assert strip_clock(tmp_path / "a" / "report.json") == strip_clock(tmp_path / "b" / "report.json")
    for f in ("observations.csv", "observation_set.svg"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_seed_flag_changes_output(tmp_path):
    p = write(tmp_path, {"version": 1, "kind": "geometry-suite"})
    cli.main(["run", str(p), "--out", str(tmp_path / "a"), "--seed", "1"])
    cli.main(["run", str(p), "--out", str(tmp_path / "b"), "--seed", "2"])
    a, b = strip_clock(tmp_path / "a" / "report.json"), strip_clock(tmp_path / "b" / "report.json")
    assert a["seed"] == 1 and b["seed"] == 2 and a != b


def test_reconstruction_jobs_deterministic(tmp_path):
    p = write(tmp_path, {"version": 1, "kind": "reconstruction",
                         "params": {"n_tq": 4, "n_grid": 10, "n_collect": 6}})
    assert cli.main(["run", str(p), "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["run", str(p), "--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
    assert (tmp_path / "a" / "t_vs_s.csv").read_bytes() == (tmp_path / "b" / "t_vs_s.csv").read_bytes()
    assert strip_clock(tmp_path / "a" / "report.json") == strip_clock(tmp_path / "b" / "report.json")
    man = json.loads((tmp_path / "a" / "dataset.json").read_text())
    assert man["n_samples"] == 6


def test_failing_check_exits_one(tmp_path, capsys):
    # zero nonlinearity leaves nothing above the rounding floor
    p = write(tmp_path, {"version": 1, "kind": "wave-expansion", "params": {"a": 0.0, "convergence_h": [0.02, 0.01]}})
    assert cli.main(["run", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "remainder slope" in capsys.readouterr().err


def test_out_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    p = write(tmp_path, {"version": 1, "kind": "indicator-scalar"})
    assert cli.main(["run", str(p)]) == 0
    assert (tmp_path / "env" / "report.json").exists()


def test_wave_expansion_plot_annotated(tmp_path):
    p = write(tmp_path, {"version": 1, "kind": "wave-expansion"})
    assert cli.main(["run", str(p), "--out", str(tmp_path / "o")]) == 0
    svg = (tmp_path / "o" / "remainder.svg").read_text()
    assert "slope ≈ 5" in svg
    data = plots.embedded_data(tmp_path / "o" / "remainder.svg")
    assert len(data["x"]) == 5 and abs(data["slope"] - 5) <= 0.3


def test_plots_command_regenerates(tmp_path):
    p = write(tmp_path, {"version": 1, "kind": "indicator-scalar"})
    cli.main(["run", str(p), "--out", str(tmp_path / "o")])
    assert cli.main(["plots", str(tmp_path / "o" / "report.json"), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "dominance.svg").read_bytes() == (tmp_path / "o" / "dominance.svg").read_bytes()


# ------------------------------------------------------------------ plots

def test_missing_series_named(tmp_path):
    with pytest.raises(plots.PlotError, match="slope"):
        plots.loglog_fit({"x": [1, 2], "y": [1, 2]}, tmp_path / "f.svg")


def test_empty_observation_set_placeholder(tmp_path):
    f = plots.observation_diagram({"observers": [[[0, 0], [1, 0]]], "entries": [], "q": None}, tmp_path / "e.svg")
    svg = f.read_text()
    assert "empty observation set" in svg and "earliest arrivals (none)" in svg


def test_heat_strip_embeds_data(tmp_path):
    f = plots.heat_strip({"x": [0, 1, 2], "score": [1e-3, 1.0, 1e-3], "cone": [1.0], "ratio": 1000.0},
                         tmp_path / "h.svg")
    assert plots.embedded_data(f)["score"] == [1e-3, 1.0, 1e-3]

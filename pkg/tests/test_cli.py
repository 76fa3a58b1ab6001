import csv
import json

import pytest

from critqfi.cli import load_config, main


def _run(tmp_path, command, config, out_name, *extra):
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps(config))
    out = tmp_path / out_name
    code = main([command, "--config", str(conf), "--out", str(out), *extra])
    return code, out


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_qfi_sweep_rows(tmp_path):
    code, out = _run(tmp_path, "qfi-sweep", {"L": [4, 8], "h": {"start": 0.5, "stop": 1.0, "num": 2}, "T": [0, 0.5]}, "s.csv")
    assert code == 0
    rows = _rows(out)
    assert len(rows) == 8
    crit = [r for r in rows if r["L"] == "4" and r["h"] == "1.0" and r["beta"] == "inf"]
    assert float(crit[0]["qfi"]) == pytest.approx(0.25)
    assert {r["method"] for r in rows} == {"zero_t_sum", "block_exact"}
    assert float(crit[0]["z"]) == 0.0 and not crit[0]["z"].startswith("-")


def test_qfi_sweep_explicit_method(tmp_path):
    code, out = _run(tmp_path, "qfi-sweep", {"L": 64, "h": 1.0, "method": "critical_expansion"}, "s.csv")
    assert code == 0
    assert _rows(out)[0]["method"] == "critical_expansion"


@pytest.mark.parametrize(
    "command, config",
    [
        ("qfi-sweep", {"L": []}),
        ("qfi-sweep", {"h": {"start": 0, "stop": 1}}),
        ("qfi-sweep", {"method": "simpson"}),
        ("qfi-sweep", {"L": [6.5]}),
        ("qfi-sweep", {"T": [-1.0]}),
        ("qfi-sweep", {"colour": 3}),
        ("scaling", {"L": [64]}),
        ("scaling", {"z": [0, 1]}),
        ("verify", {"L": [10]}),
        ("estimate", {"scheme": "bayes"}),
        ("estimate", {"scheme": "two_stage", "split": 1.0}),
        ("sld-profile", {"window_min": 50, "window_max": 10}),
    ],
)
def test_config_errors_exit_2(tmp_path, command, config):
    code, out = _run(tmp_path, command, config, "o.dat")
    assert code == 2
    assert not out.exists()


def test_missing_output_exits_2(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text("{}")
    assert main(["qfi-sweep", "--config", str(conf)]) == 2
    conf.write_text("[1, 2]")
    assert main(["qfi-sweep", "--config", str(conf), "--out", str(tmp_path / "x.csv")]) == 2


def test_refuses_to_overwrite_config(tmp_path):
    conf = tmp_path / "prof.json"
    conf.write_text(json.dumps({"L": 64, "h": 1.5}))
    assert main(["sld-profile", "--config", str(conf), "--out", str(tmp_path / "prof.csv")]) == 2
    assert json.loads(conf.read_text()) == {"L": 64, "h": 1.5}


def test_numeric_failure_exits_3(tmp_path):
    # gamma = 0, h = 0 puts a gapless mode on the L = 4 grid
    code, _ = _run(tmp_path, "qfi-sweep", {"L": 4, "h": 0.0, "gamma": 0.0}, "s.csv")
    assert code == 3


def test_sld_profile_outputs(tmp_path):
    code, out = _run(tmp_path, "sld-profile", {"L": 256, "h": 1.5}, "prof.csv")
    assert code == 0
    rows = _rows(out)
    assert len(rows) == 256 and list(rows[0]) == ["d", "b_y", "b_z"]
    report = json.loads(out.with_suffix(".json").read_text())
    assert report["class"] == "exponential" and report["fit_window"] == [4, 64]
    assert report["b_z"]["class"] == "exponential"


def test_sld_profile_null_kernel(tmp_path, capsys):
    code, out = _run(tmp_path, "sld-profile", {"L": 64, "h": 0.0}, "prof.csv")
    assert code == 0
    report = json.loads(out.with_suffix(".json").read_text())
    assert report["class"] == "null kernel" and report["exponent_or_xi"] is None
    assert "null kernel" in capsys.readouterr().err


def test_scaling_outputs(tmp_path):
    code, out = _run(tmp_path, "scaling", {"L": [64, 96, 128, 192, 256], "gamma": 2.0}, "sc.json")
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["shift_exponent"] == pytest.approx(2.0, abs=0.1)
    assert len(_rows(out.with_suffix(".csv"))) == 5


def test_scaling_isotropic_warns(tmp_path):
    code, out = _run(tmp_path, "scaling", {"L": [64, 96, 128, 192, 256], "gamma": 1.0}, "sc.json")
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["shift_exponent"] is None
    assert any("shift exponent" in w for w in rep["warnings"])


def test_estimate_outputs_and_seed_source(tmp_path):
    code, out = _run(tmp_path, "estimate", {"L": 16, "M": 500, "replicas": 5}, "e.json")
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["metadata"] == {"seed": 0, "seed_source": "default", "note": "crb report needs >= 100 replicas"}
    assert rep["fisher_ratio_mean"] == pytest.approx(1.0)
    assert len(_rows(out.with_suffix(".csv"))) == 5
    code, out = _run(tmp_path, "estimate", {"L": 16, "M": 500, "replicas": 2, "seed": 4}, "e.json", "--seed", "9")
    assert json.loads(out.read_text())["metadata"]["seed_source"] == "flag"
    assert json.loads(out.read_text())["metadata"]["seed"] == 9


def test_estimate_two_stage(tmp_path):
    code, out = _run(tmp_path, "estimate", {"L": 16, "M": 2000, "replicas": 100, "scheme": "two_stage", "initial_guess": 1.1}, "e.json")
    assert code == 0
    rep = json.loads(out.read_text())["crb_report"]
    assert rep["n_runs"] == 100 and rep["bound_ok"]


def test_verify_passes_and_fails(tmp_path):
    code, out = _run(tmp_path, "verify", {"L": [4], "draws": 1, "beta": [1.0]}, "v.json")
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["all_passed"] and rep["n_checks"] == 6
    code, out = _run(tmp_path, "verify", {"L": [4], "draws": 1, "beta": [1.0], "tol_lyapunov": 0.0}, "v.json")
    assert code == 3
    assert json.loads(out.read_text())["n_failed"] >= 1


def test_precedence(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"seed": 3, "out": "from_config.csv", "h": 0.5}))
    cfg = load_config("qfi-sweep", conf, {"out": "flag.csv", "seed": None})
    assert cfg["out"] == "flag.csv" and cfg["seed"] == 3 and cfg["h"] == [0.5]
    assert cfg["L"] == [64] and cfg["T"] == [0.0] and cfg["seed_source"] == "config"


def test_nonfinite_json_values(tmp_path):
    code, out = _run(tmp_path, "verify", {"L": [4], "draws": 1, "beta": [1.0]}, "v.json")
    betas = {c["beta"] for c in json.loads(out.read_text())["checks"]}
    assert "inf" in betas and 1.0 in betas

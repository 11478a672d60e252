import io
import json

import numpy as np
import pytest

from prioq import StationaryGrid, load_params
from prioq.cli import main

REF_FLAGS = ["--p", "0.1", "--q", "0.1", "--mu-h", "0.45", "--mu-l", "0.35"]


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, out, err)
    return code, out.getvalue(), err.getvalue()


def test_analyze_report():
    code, out, _ = run(["analyze", *REF_FLAGS])
    assert code == 0
    rep = json.loads(out)
    assert rep["schema_version"] == "1"
    assert rep["regime"]["tag"] == "exact_geometric"
    low0 = next(r for r in rep["asymptotics"] if r["direction"] == "low" and r["fixed_index"] == 0)
    assert low0["constant"] == 0.31218354200606724 or low0["constant"] == pytest.approx(0.31218354200606724, rel=1e-14)
    ids = {n["id"] for n in rep["notes"]}
    assert {"psi0_at_one", "low_marginal_identity"} <= ids
    assert rep["oracle"] is None and rep["simulation"] is None


def test_analyze_csv_and_series(tmp_path):
    path = tmp_path / "s.csv"
    code, out, _ = run(["analyze", *REF_FLAGS, "--csv", "--series-out", str(path), "--series-n", "20"])
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "direction,fixed_index,rate,power,constant,regime"
    table = np.loadtxt(path, delimiter=",", skiprows=1)
    assert table.shape == (21, 2)
    assert table[0, 1] == pytest.approx(0.6074857926709777, rel=1e-15)


def test_analyze_regime3_note():
    code, out, _ = run(["analyze", "--p", "0.1", "--q", "0.01", "--mu-h", "0.45", "--mu-l", "0.44"])
    assert code == 0
    rep = json.loads(out)
    assert rep["regime"]["tag"] == "geometric_three_halves_power"
    assert "three_halves_constant" in {n["id"] for n in rep["notes"]}


def test_config_file(tmp_path):
    cfg = tmp_path / "p.cfg"
    cfg.write_text("p = 0.1\nq = 0.1\nmu_h = 0.45\nmu_l = 0.35\n")
    code, out, _ = run(["analyze", "--config", str(cfg)])
    assert code == 0 and json.loads(out)["params"]["mu_l"] == 0.35


@pytest.mark.parametrize("flags, needle", [
    (["--p", "0.3", "--q", "0.3", "--mu-h", "0.2", "--mu-l", "0.2"], "unstable"),
    (["--p", "0.1", "--q", "0.1", "--mu-h", "0.35", "--mu-l", "0.45"], "mu_l <= mu_h"),
    (["--p", "0.1", "--q", "0.1", "--mu-h", "0.45", "--mu-l", "0.36"], "p + q"),
])
def test_input_errors(flags, needle):
    code, _, err = run(["analyze", *flags])
    assert code == 2
    assert needle in err.lower() or needle in err


def test_bad_subcommand():
    assert run(["frobnicate"])[0] == 2


def test_critical_round_trip(tmp_path):
    path = tmp_path / "crit.cfg"
    code, _, _ = run(["critical", *REF_FLAGS, "--out", str(path)])
    assert code == 0
    text = path.read_text()
    assert text.startswith("# F(y0) = ")
    assert abs(float(text.splitlines()[0].split("=")[1])) < 1e-12
    pm = load_params(path)
    assert abs(pm.p + pm.q + pm.mu_h + pm.mu_l - 1) < 1e-12
    code, out, _ = run(["analyze", "--config", str(path)])
    assert json.loads(out)["regime"]["tag"] == "geometric_half_power"


def test_critical_no_bracket():
    code, _, err = run(["critical", *REF_FLAGS, "--range", "0.1,0.09"])
    assert code == 5 and "sign" in err


def test_validate_small_truncation_flags_edge():
    code, _, err = run(["validate", *REF_FLAGS, "--trunc", "20,20"])
    assert code in (3, 4)
    assert "edge mass" in err or "failed" in err


def test_validate_reference():
    code, out, _ = run(["validate", *REF_FLAGS, "--trunc", "300,300", "--fit-window", "40,80"])
    assert code == 0
    rep = json.loads(out)
    assert rep["oracle"]["pi00_gap"] < 1e-8
    assert all(r["fit"]["ok"] for r in rep["asymptotics"])


def test_solve_and_simulate(tmp_path):
    grid_path = tmp_path / "g.bin"
    code, out, _ = run(["solve", *REF_FLAGS, "--trunc", "60,60", "--out", str(grid_path)])
    assert code == 0
    assert json.loads(out)["pi00"] == pytest.approx(0.6074857926709777, rel=1e-6)
    g = StationaryGrid.from_binary(grid_path)
    assert g.values.shape == (61, 61)
    csv_path = tmp_path / "g.csv"
    assert run(["solve", *REF_FLAGS, "--trunc", "30,30", "--out", str(csv_path)])[0] == 0
    sim_path = tmp_path / "s.csv"
    code, out, _ = run(["simulate", *REF_FLAGS, "--slots", "300000", "--seed", "4",
                        "--window", "10,10", "--reference", str(grid_path), "--out", str(sim_path)])
    assert code == 0
    rep = json.loads(out)
    assert rep["tv_distance"] < 0.05
    assert sim_path.exists()


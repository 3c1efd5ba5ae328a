import csv
import io
import json

import pytest

from tdsim.cli import main
from tdsim.experiments import CSV_COLUMNS, SpecError, load_spec, parse_experiment, run_experiment
from tdsim.hamiltonian import HamiltonianModel, TimeDependentTerm, save_model
from tdsim.signals import Constant

SMALL = {
    "name": "small",
    "experiments": [
        {"name": "split", "model": "two_term_spin", "scheme": "hd_split", "sweep": {"var": "dt", "values": [0.05, 0.1]}},
        {"name": "mc", "model": "two_term_spin", "scheme": "mc_average", "sweep": {"var": "m", "values": [4, 16]},
         "seeds": [0, 1, 2, 3], "params": {"dt": 0.1}},
        {"name": "rand", "model": "two_term_spin", "scheme": "randomized", "sweep": {"var": "m", "values": [2]},
         "seeds": [5, 6], "params": {"epsilon": 0.5}},
        {"name": "census", "scheme": "census", "sweep": {"var": "K", "values": [2, 3]}},
    ],
}


def write(path, obj):
    path.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(path)


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_run_writes_csvs_and_summary(tmp_path, capsys):
    spec = write(tmp_path / "s.json", SMALL)
    assert main(["run", spec, "--out", str(tmp_path / "out")]) == 0
    out = capsys.readouterr().out
    assert "ALL PASS" in out
    assert (tmp_path / "out" / "small_summary.txt").read_text().strip().endswith("ALL PASS")
    rows = read_rows(tmp_path / "out" / "mc.csv")
    assert tuple(rows[0].keys()) == CSV_COLUMNS
    assert len(rows) == 8 and [r["seed"] for r in rows[:4]] == ["0", "1", "2", "3"]
    assert all(r["wall_ms"] == "" for r in rows)


def test_csv_byte_identical_across_runs_and_threads(tmp_path):
    spec = write(tmp_path / "s.json", SMALL)
    assert main(["run", spec, "--out", str(tmp_path / "a")]) == 0
    assert main(["run", spec, "--out", str(tmp_path / "b"), "--threads", "4"]) == 0
    for name in ("split", "mc", "rand", "census"):
        assert (tmp_path / "a" / f"{name}.csv").read_bytes() == (tmp_path / "b" / f"{name}.csv").read_bytes()


def test_bound_ok_recomputes_from_row(tmp_path):
    spec = write(tmp_path / "s.json", SMALL)
    main(["run", spec, "--out", str(tmp_path)])
    for name in ("split", "mc", "rand"):
        for r in read_rows(tmp_path / f"{name}.csv"):
            ok = float(r["measured_error"]) <= float(r["analytic_bound"]) + float(r["oracle_tol"] or 0)
            assert r["bound_ok"] == ("true" if ok else "false")


def test_timing_fills_wall_ms(tmp_path):
    spec = write(tmp_path / "s.json", {"name": "t", "experiments": SMALL["experiments"][:1]})
    main(["run", spec, "--out", str(tmp_path), "--timing"])
    assert all(float(r["wall_ms"]) >= 0 for r in read_rows(tmp_path / "split.csv"))


@pytest.mark.parametrize("spec", [
    "{",
    {"name": "x", "experiments": []},
    {"name": "x", "model": "two_term_spin", "scheme": "hd_split", "sweep": {"var": "dt", "values": []}},
    {"name": "x", "model": "two_term_spin", "scheme": "hd_split", "sweep": {"var": "dt", "values": [0.2, 0.1]}},
    {"name": "x", "model": "two_term_spin", "scheme": "hd_split", "sweep": {"var": "m", "values": [1]}},
    {"name": "x", "model": "two_term_spin", "scheme": "bogus", "sweep": {"var": "dt", "values": [1]}},
    {"name": "x", "model": "two_term_spin", "scheme": "mc_average", "sweep": {"var": "m", "values": [4]}},
    {"name": "x", "model": "nope.json", "scheme": "hd_split", "sweep": {"var": "dt", "values": [0.1]}},
    {"name": "x", "model": "two_term_spin", "scheme": "hd_split", "sweep": {"var": "dt", "values": [0.1]},
     "tolerances": {"slack": -1}},
    {"name": "x", "model": "two_term_spin", "scheme": "hd_split", "sweep": {"var": "dt", "values": [0.1]},
     "params": {"bound": "loose"}},
])
def test_bad_specs_exit_2(tmp_path, spec):
    assert main(["run", write(tmp_path / "s.json", spec), "--out", str(tmp_path)]) == 2


def test_unknown_builtin_exits_2(tmp_path):
    assert main(["run", "no_such_spec", "--out", str(tmp_path)]) == 2


def test_certification_failure_exits_1(tmp_path, capsys):
    m = HamiltonianModel(1, (TimeDependentTerm.from_pauli("x", (0,), "X", Constant(1.0)),
                             TimeDependentTerm.from_pauli("z", (0,), "Z", Constant(1.0))), 1, 1.0, name="xz")
    save_model(m, tmp_path / "xz.json")
    spec = {"name": "c", "model": "xz.json", "scheme": "hd_split", "sweep": {"var": "dt", "values": [0.01]},
            "params": {"bound": "cap"}}
    assert main(["run", write(tmp_path / "s.json", spec), "--out", str(tmp_path / "o")]) == 1
    assert "CERTIFICATION FAILED" in capsys.readouterr().out
    spec["params"]["bound"] = "c12"
    assert main(["run", write(tmp_path / "s.json", spec), "--out", str(tmp_path / "o")]) == 0


def test_resource_cap_exits_3(tmp_path, capsys):
    spec = {"name": "x", "model": "two_term_spin", "scheme": "planned", "sweep": {"var": "epsilon", "values": [1e-13]}}
    assert main(["run", write(tmp_path / "s.json", spec), "--out", str(tmp_path)]) == 3
    assert "resource cap" in capsys.readouterr().out


def test_builtin_specs_parse():
    for name in ("two_term_spin", "telegraph_pair", "ac_stark", "random_2local", "census"):
        suite, exps = load_spec(name)
        assert suite == name and exps


def test_generator_without_seed_runs_once_per_seed():
    exp = parse_experiment({"name": "g", "model": {"generator": "random_2local", "n": 3, "L": 2},
                            "scheme": "hd_recursive", "sweep": {"var": "dt", "values": [0.1]}, "seeds": [1, 2, 3]})
    rows = run_experiment(exp)
    assert [r.seed for r in rows] == [1, 2, 3]
    with pytest.raises(SpecError):
        parse_experiment({"name": "g", "model": {"generator": "random_2local", "n": 3, "L": 2},
                          "scheme": "hd_recursive", "sweep": {"var": "dt", "values": [0.1]}})


def test_validate_builtin(capsys):
    assert main(["validate", "two_term_spin"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("L=2, k=1, n_qubits=1, T=1,") and "c_max=1," in out


def test_validate_reports_every_problem(tmp_path, capsys):
    bad = {"n_qubits": 2, "k": 1, "horizon": 1.0, "terms": [
        {"id": "a", "support": [0, 1], "base": "XZ", "signal": {"kind": "constant", "value": 1.0}},
        {"id": "a", "support": [5], "base": "X", "signal": {"kind": "constant", "value": 1.0}},
    ]}
    assert main(["validate", write(tmp_path / "m.json", bad)]) == 2
    lines = [ln for ln in capsys.readouterr().out.splitlines() if ln.startswith("invalid:")]
    assert len(lines) >= 3


def test_validate_unreadable(tmp_path, capsys):
    assert main(["validate", write(tmp_path / "m.json", "[1, 2")]) == 2


def test_census_output(tmp_path, capsys):
    assert main(["census", "--K", "2..12", "--csv", str(tmp_path / "c.csv")]) == 0
    out = capsys.readouterr().out
    rows = list(csv.DictReader(io.StringIO((tmp_path / "c.csv").read_text())))
    assert [int(r["K"]) for r in rows] == list(range(2, 13))
    assert float(rows[8]["log10_fraction"]) == pytest.approx(-1816.394, abs=1e-3)
    assert "K >= 1" in out


def test_census_bad_range(capsys):
    assert main(["census", "--K", "a..b"]) == 2


def test_plan_output(capsys):
    assert main(["plan", "two_term_spin", "--epsilon", "0.1"]) == 0
    out = capsys.readouterr().out
    assert "dt=0.025000000000000001 n_bins=40" in out and "G=80" in out
    assert "G_tot=3574.72" in out


def test_plan_errors(capsys):
    assert main(["plan", "two_term_spin", "--epsilon", "-1"]) == 2
    assert main(["plan", "two_term_spin", "--epsilon", "1e-14"]) == 3
    assert main(["plan", "two_term_spin"]) == 2


def test_no_command_is_usage_error():
    assert main([]) == 2

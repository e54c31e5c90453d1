import csv
import json

import pytest

from qrouter import cli, io

SCENARIO = {
    "name": "small",
    "source": {"pair_rate": 2000, "eta": 0.3},
    "router": {"controls": ["OFF", "ON"]},
    "signals": ["H", {"name": "tilted", "alpha": [0.6, 0], "beta": [0, 0.8]}],
    "run": {"duration_s": 600, "interval_s": 120, "seed": 7},
    "sweep": {"phi": [0, 1.5707963267948966, 3.141592653589793]},
}


@pytest.fixture
def scenario(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(SCENARIO))
    return path


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestScenario:
    def test_load(self, scenario):
        sc = io.Scenario.load(scenario)
        assert sc.source_params().p_pair == pytest.approx(2000 / 80e6)
        assert sc.signals()[1][0] == "tilted"
        assert sc.seed == 7
        assert len(sc.sweep_grid()) == 3

    def test_unknown_key(self):
        with pytest.raises(io.ScenarioError, match="scenario invalid"):
            io.Scenario.from_dict({"source": {"mu": 1}})

    def test_conflicting_pair_spec(self):
        with pytest.raises(io.ScenarioError):
            io.Scenario.from_dict({"source": {"pair_rate": 1, "p_pair": 1e-5}})

    def test_bad_json(self, tmp_path):
        p = tmp_path / "x.json"
        p.write_text("{")
        with pytest.raises(io.ScenarioError, match="invalid JSON"):
            io.Scenario.load(p)

    def test_bundled_scenario_valid(self):
        sc = io.Scenario.load(io.bundled("reference_scenario.json"))
        assert sc.source_params().eta["S"] < sc.source_params().eta["C1"]


class TestTables:
    def test_line_numbers_in_errors(self):
        text = "# comment\nphase_rad,rel_counts,error\n0,1,1\n0.5,oops,1\n"
        with pytest.raises(io.TableError, match=r"<table>:4: column 'rel_counts'"):
            io.read_table(text, ("phase_rad", "rel_counts", "error"), ("phase_rad", "rel_counts", "error"))

    def test_wrong_field_count(self):
        with pytest.raises(io.TableError, match=":3: expected 3 fields"):
            io.read_table("a,b,c\n1,2,3\n1,2\n", ("a",), ())

    def test_missing_column(self):
        with pytest.raises(io.TableError, match="missing columns"):
            io.read_table("a,b\n1,2\n", ("a", "z"), ())

    def test_bundled_tables(self):
        raw, corr = io.load_routing_table()
        assert set(raw) == {"H", "V", "D", "A", "R", "L"}
        assert raw["H"]["ON"].value == pytest.approx(0.827)
        fid_raw, _ = io.load_fidelity_table()
        assert len(fid_raw) == 12
        x, y, e = io.load_fringe_table()
        assert len(x) == len(y) == len(e) > 5

    def test_count_table_rejects_fractional_counts(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text(",".join(io.COUNT_COLUMNS) + "\nH,ON,1.5,2,0,0,120\n")
        with pytest.raises(io.TableError, match=":2: cc1"):
            io.load_count_table(p)


class TestCommands:
    def test_ideal_json(self, capsys, scenario):
        code, out, _ = run(capsys, "ideal", "--scenario", scenario, "--format", "json")
        rows = json.loads(out)
        assert code == 0 and len(rows) == 4
        assert rows[0]["success_probability"] == 0.0625

    def test_regime_rows(self, capsys, scenario, tmp_path):
        doc = dict(SCENARIO, router={"regime": "feedforward_1_4", "controls": ["OFF"]})
        p = tmp_path / "ff.json"
        p.write_text(json.dumps(doc))
        _, out, _ = run(capsys, "ideal", "--scenario", p, "--format", "json")
        rows = json.loads(out)
        assert all(r["success_probability"] == 0.25 and r["p2"] == 0 for r in rows)

    def test_six_significant_digits(self, capsys, scenario):
        _, out, _ = run(capsys, "sweep-phi", "--scenario", scenario)
        rows = list(csv.DictReader(out.splitlines()))
        assert rows[1]["p2"] == "0.5"
        _, out, _ = run(capsys, "sweep-phi", "--scenario", scenario, "--grid", "0:1:3")
        assert list(csv.DictReader(out.splitlines()))[1]["p2"] == "0.0612087"
        _, out, _ = run(capsys, "sweep-phi", "--scenario", scenario, "--grid", "0:1:3", "--precision", "full")
        assert len(list(csv.DictReader(out.splitlines()))[1]["p2"]) > 10

    def test_bad_grid(self, capsys, scenario):
        code, _, err = run(capsys, "sweep-phi", "--scenario", scenario, "--grid", "0:1")
        assert code == 1 and "start:stop:num" in err

    def test_simulate_counts_deterministic(self, capsys, scenario, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run(capsys, "simulate-counts", "--scenario", scenario, "--seed", 3, "--out", a)[0] == 0
        assert run(capsys, "simulate-counts", "--scenario", scenario, "--seed", 3, "--out", b)[0] == 0
        assert a.read_bytes() == b.read_bytes()
        header = a.read_text().splitlines()[0].split(",")
        assert header == ["signal_state", "control_setting", "regime", "duration_s", "cc1", "cc2", "acc1", "acc2"]
        run(capsys, "simulate-counts", "--scenario", scenario, "--seed", 4, "--out", b)
        assert a.read_bytes() != b.read_bytes()

    def test_simulate_counts_needs_seed(self, capsys, tmp_path):
        doc = {k: v for k, v in SCENARIO.items() if k != "run"}
        p = tmp_path / "s.json"
        p.write_text(json.dumps(doc))
        code, _, err = run(capsys, "simulate-counts", "--scenario", p)
        assert code == 1 and "seed" in err

    def test_analyze_round_trip(self, capsys, scenario, tmp_path):
        counts = tmp_path / "c.csv"
        run(capsys, "simulate-counts", "--scenario", scenario, "--out", counts)
        code, out, _ = run(capsys, "analyze", "--counts", counts, "--fringe", io.bundled("fringe.csv"),
                           "--noise-floor", 10.1)
        report = json.loads(out)
        assert code == 0
        assert {r["signal_state"] for r in report["routing"]} == {"H", "tilted"}
        assert 0.73 <= report["fringe"]["visibility"][0] <= 0.79

    def test_analyze_tables(self, capsys):
        code, out, _ = run(capsys, "analyze", "--routing-table", io.bundled("routing.csv"),
                           "--fidelity-table", io.bundled("fidelity.csv"))
        report = json.loads(out)
        assert code == 0
        assert report["fidelity"]["mean"]["corrected"][0] == pytest.approx(0.907, abs=1e-3)
        assert report["routing_table_contrast"]["corrected"]["port2"][0] == pytest.approx(41.8, abs=0.5)

    def test_analyze_malformed(self, capsys, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text(",".join(io.COUNT_COLUMNS) + "\nH,ON,3,4,0,0,120\nH,ON,x,4,0,0,120\n")
        code, _, err = run(capsys, "analyze", "--counts", bad)
        assert code == 1 and ":3:" in err

    def test_analyze_nothing(self, capsys):
        assert run(capsys, "analyze")[0] == 1

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, "ideal", "--scenario", tmp_path / "nope.json")[0] == 1

    def test_reproduce_passes(self, capsys):
        code, out, _ = run(capsys, "reproduce-paper")
        assert code == 0
        assert "[FAIL]" not in out
        for regime in ("basic_1_16", "swap_1_8", "feedforward_1_4"):
            assert f"[PASS] success probability {regime}" in out

    def test_reproduce_flags_bad_data(self, capsys, tmp_path):
        for name in ("routing.csv", "fidelity.csv", "fringe.csv"):
            (tmp_path / name).write_text(io.bundled(name).read_text())
        text = (tmp_path / "fidelity.csv").read_text().splitlines()
        header_idx = next(i for i, line in enumerate(text) if line.startswith("signal_state"))
        cells = text[header_idx + 1].split(",")
        cells[2] = "0.1"
        text[header_idx + 1] = ",".join(cells)
        (tmp_path / "fidelity.csv").write_text("\n".join(text) + "\n")
        code, out, _ = run(capsys, "reproduce-paper", "--data-dir", tmp_path)
        assert code == 2 and "[FAIL] mean fidelity raw" in out

from __future__ import annotations

import csv
from pathlib import Path

import pytest

from lastgen.adversary import FixedOffset, HonestClock, TheoremOptimal
from lastgen.cli import (CSV_COLUMNS, ExperimentPlan, PlanError, execute,
                         main, parse_config)
from lastgen.metrics import expected_gamma_ideal, gamma_upper_bound


def test_empty_config_fills_defaults(tmp_path):
    cfg = tmp_path / "empty.yaml"
    cfg.write_text("")
    plan = parse_config(str(cfg))
    assert plan.n_honest == 1000
    assert plan.mean_block_interval == 600.0
    assert plan.delta_b == 20.0
    assert plan.adversary_fraction == 0.5
    assert plan.propagation_delay == 0.0
    assert plan.rules == ("proposed", "random")
    assert plan.delta_o == (20.0, 200.0)
    assert plan.offset_std == (0.0, 10.0, 20.0, 50.0, 100.0, 200.0)
    assert plan.a_t == (0.0,)
    assert plan.n_cells() == 2 * 2 * 6 * 1


def test_no_config_path_matches_empty_file(tmp_path):
    cfg = tmp_path / "empty.yaml"
    cfg.write_text("")
    assert parse_config(None) == parse_config(str(cfg))


def test_unknown_rule_names_the_valid_set(tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("rules: [gohst]\n")
    with pytest.raises(PlanError) as exc:
        parse_config(str(cfg))
    msg = str(exc.value)
    assert "gohst" in msg
    for name in ("proposed", "random", "first_seen"):
        assert name in msg


def test_cross_product_cell_count(tmp_path):
    cfg = tmp_path / "sweep.yaml"
    cfg.write_text("offset_std: [0, 50, 100]\nrules: [proposed, random]\n"
                   "delta_o: [20]\n")
    plan = parse_config(str(cfg))
    assert plan.n_cells() == 6
    cells = plan.cells()
    assert len(cells) == 6
    seeds = [c.seed for _, c in cells]
    assert seeds == [plan.seed + i for i in range(6)]
    assert len(set(seeds)) == 6


def test_config_validation_errors(tmp_path):
    bad_cases = [
        "delta_b: -5\n",
        "offset_std: [0, -10]\n",
        "delta_o: []\n",
        "ties_per_cell: 0\n",
        "n_honest: one\n",
        "unknown_key: 3\n",
        "timestamp_strategy: surprise\n",
        "rules: proposed\n",       # must be a list
        "a_t: [true]\n",
    ]
    for i, body in enumerate(bad_cases):
        cfg = tmp_path / f"bad{i}.yaml"
        cfg.write_text(body)
        with pytest.raises(PlanError):
            parse_config(str(cfg))


def test_malformed_yaml(tmp_path):
    cfg = tmp_path / "mangled.yaml"
    cfg.write_text("rules: [proposed\n  oops")
    with pytest.raises(PlanError, match="malformed"):
        parse_config(str(cfg))


def test_missing_config_file():
    with pytest.raises(PlanError, match="not found"):
        parse_config("/nonexistent/nowhere.yaml")


def test_overrides_win_over_file(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("seed: 5\nrules: [random]\n")
    plan = parse_config(str(cfg), {"seed": 9, "ties_per_cell": 50})
    assert plan.seed == 9
    assert plan.rules == ("random",)
    assert plan.ties_per_cell == 50


def test_strategy_wiring(tmp_path):
    cfg = tmp_path / "s.yaml"
    cfg.write_text("timestamp_strategy: fixed_offset\nfixed_offset_shift: 12.5\n")
    plan = parse_config(str(cfg))
    assert plan.strategy(20.0) == FixedOffset(shift=12.5)
    cfg.write_text("timestamp_strategy: honest_clock\n")
    assert parse_config(str(cfg)).strategy(20.0) == HonestClock()
    cfg.write_text("")
    assert parse_config(str(cfg)).strategy(200.0) == \
        TheoremOptimal(delta_o=200.0, delta_b=20.0)


def _tiny_plan(seed=3):
    return parse_config(None, {
        "rules": ["proposed", "random"], "delta_o": [20.0],
        "offset_std": [0.0, 50.0], "ties_per_cell": 60, "seed": seed,
        "n_honest": 50,
    })


def test_execute_writes_results_and_bounds(tmp_path, capsys):
    plan = _tiny_plan()
    path = execute(plan, str(tmp_path / "out"))
    assert path.name == "results.csv"
    rows = list(csv.DictReader(path.open()))
    assert len(rows) == plan.n_cells() == 4
    assert list(rows[0].keys()) == CSV_COLUMNS
    for row in rows:
        assert row["n_ties"] == "60"
        assert row["delta_B_i"] == "20.0" and row["w"] == "20.0"
        # self-consistency: bound column always recomputable from the row
        want = gamma_upper_bound(float(row["delta_O_i"]),
                                 float(row["delta_B_i"]),
                                 float(row["T_seconds"]))
        assert float(row["theorem2_bound"]) == want
        assert float(row["expected_gamma_ideal"]) == expected_gamma_ideal(
            float(row["delta_O_i"]), float(row["delta_B_i"]), 1200.0)
    bounds = list(csv.DictReader((tmp_path / "out" / "bounds.csv").open()))
    assert len(bounds) == 1
    assert float(bounds[0]["honest_T_seconds"]) == 1200.0
    out = capsys.readouterr().out
    assert "gamma" in out and "proposed" in out


def test_execute_byte_determinism(tmp_path):
    p1 = execute(_tiny_plan(), str(tmp_path / "a"))
    p2 = execute(_tiny_plan(), str(tmp_path / "b"))
    assert p1.read_bytes() == p2.read_bytes()
    p3 = execute(_tiny_plan(seed=4), str(tmp_path / "c"))
    assert p3.read_bytes() != p1.read_bytes()


def test_execute_jobs_do_not_change_output(tmp_path):
    p1 = execute(_tiny_plan(), str(tmp_path / "serial"))
    p2 = execute(_tiny_plan(), str(tmp_path / "par"), jobs=2)
    assert p1.read_bytes() == p2.read_bytes()


def test_main_success_and_exit_codes(tmp_path, capsys):
    argv = ["--rule", "proposed", "--delta-o", "20", "--offset-std", "0",
            "--ties", "30", "--seed", "5", "--out", str(tmp_path / "r")]
    assert main(argv) == 0
    assert (tmp_path / "r" / "results.csv").exists()
    capsys.readouterr()

    assert main(["--rule", "gohst", "--out", str(tmp_path / "x")]) == 2
    err = capsys.readouterr().err
    assert "gohst" in err

    blocker = tmp_path / "file"
    blocker.write_text("")
    code = main(["--rule", "proposed", "--delta-o", "20", "--offset-std", "0",
                 "--ties", "5", "--out", str(blocker / "sub")])
    assert code == 3


def test_main_flag_sweep_shapes(tmp_path):
    argv = ["--rule", "proposed", "--rule", "random",
            "--delta-o", "20,200", "--offset-std", "0,50",
            "--a-t", "0", "--delta-b", "20", "--ties", "25",
            "--out", str(tmp_path / "g"), "--seed", "11"]
    assert main(argv) == 0
    rows = list(csv.DictReader((tmp_path / "g" / "results.csv").open()))
    assert len(rows) == 2 * 2 * 2
    assert {r["rule"] for r in rows} == {"proposed", "random"}
    assert {r["delta_O_i"] for r in rows} == {"20.0", "200.0"}

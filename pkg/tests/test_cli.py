import csv
import io
import json

import pytest

from specsym.cli import (
    EXIT_BUGS,
    EXIT_FAIL,
    EXIT_OK,
    EXIT_SOLVER,
    EXIT_USAGE,
    RunReport,
    eq1_grid,
    main,
    prop2_check,
)

from conftest import CORPUS


def prog(name):
    return str(CORPUS / f"{name}.sx")


def exit_code(argv):
    # argparse rejects bad flags by exiting instead of returning
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


def run_json(capsys, *argv):
    code = main(["run", *argv, "--json", "-"])
    out = capsys.readouterr().out
    return code, json.loads(out)


def sweep(capsys, *argv):
    assert main(["sweep", *argv]) == EXIT_OK
    return list(csv.DictReader(io.StringIO(capsys.readouterr().out)))


# -- run ----------------------------------------------------------------------


def test_run_abs_sum_pure(capsys):
    code, report = run_json(capsys, prog("abs_sum"), "--strategy", "pure", "--no-optimize")
    assert code == EXIT_OK
    assert report["stats"]["total"] == 14
    assert "savings" not in report


def test_run_abs_sum_speculative(capsys):
    code, report = run_json(capsys, prog("abs_sum"), "--depth", "3", "--order", "false-first")
    assert code == EXIT_OK and report["stats"]["total"] == 8
    assert report["config"]["depth"] == 3


def test_run_dead_division_is_clean(capsys):
    code, report = run_json(capsys, prog("dead_division"), "--depth", "3")
    assert code == EXIT_OK and report["bugs"] == []


def test_run_reports_bug_with_exit_two(capsys):
    code, report = run_json(capsys, prog("bst"))
    assert code == EXIT_BUGS
    assert report["bugs"][0]["message"] == "right child out of order"
    assert report["bugs"][0]["model"] is not None


def test_run_summary_on_stdout(capsys):
    assert main(["run", prog("abs_sum"), "--order", "false-first"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "solver calls: 8" in out


def test_run_with_pure_baseline(capsys):
    code, report = run_json(capsys, prog("abs_sum"), "--order", "false-first", "--baseline", "pure")
    assert report["savings"]["baseline_calls"] == 14
    assert report["savings"]["calls_saved_pct"] == pytest.approx(42.86)


def test_run_with_file_baseline(capsys, tmp_path):
    base = tmp_path / "base.json"
    assert main(["run", prog("abs_sum"), "--strategy", "pure", "--no-optimize", "--json", str(base)]) == EXIT_OK
    capsys.readouterr()
    _, report = run_json(capsys, prog("abs_sum"), "--baseline", str(base))
    assert report["savings"]["baseline_calls"] == 14


def test_report_round_trip_and_determinism(capsys):
    _, a = run_json(capsys, prog("sorted_list"), "--seed", "3")
    _, b = run_json(capsys, prog("sorted_list"), "--seed", "3")
    assert RunReport.from_dict(a).to_dict() == a
    for d in (a, b):
        d.pop("wall_time")
        d.pop("solving_time")
        d["stats"].pop("solving_time")
    assert json.dumps(a) == json.dumps(b)


def test_solver_exception_exit_code(capsys):
    assert main(["run", prog("abs_sum"), "--solver", "external:/bin/false"]) == EXIT_SOLVER
    assert "solver exception" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "/nonexistent.sx"],
        ["run", "{bad}", "--depth", "0"],
        ["run", "{abs_sum}", "--depth", "0"],
        ["run", "{abs_sum}", "--solver", "cvc"],
        ["run", "{abs_sum}", "--domain", "5:1"],
        ["run", "{abs_sum}", "--baseline", "/nonexistent.json"],
        ["sweep", "{abs_sum}", "--k", "1-9"],
        ["sweep", "{abs_sum}", "--k", "x"],
        ["treesim", "replay", "no_such_tree"],
        ["frobnicate"],
    ],
)
def test_usage_errors(argv, tmp_path, capsys):
    bad = tmp_path / "bad.sx"
    bad.write_text("sym int a;\nb = c;\n")
    argv = [a.replace("{abs_sum}", prog("abs_sum")).replace("{bad}", str(bad)) for a in argv]
    assert exit_code(argv) == EXIT_USAGE


def test_parse_error_diagnostic(tmp_path, capsys):
    bad = tmp_path / "bad.sx"
    bad.write_text("sym int a;\nif (a > 0 {}\n")
    assert main(["run", str(bad)]) == EXIT_USAGE
    assert "2:" in capsys.readouterr().err


# -- sweep --------------------------------------------------------------------


def test_sweep_abs_sum_percentages(capsys):
    rows = sweep(capsys, prog("abs_sum"), "--orders", "false-first", "--optimize-variants", "off")
    pcts = [float(r["pct_vs_pure"]) for r in rows]
    assert [int(r["k"]) for r in rows] == [1, 2, 3]
    assert pcts[0] == 100.0
    assert pcts[1] < 100.0 and pcts[2] < pcts[1]
    assert pcts[2] == pytest.approx(57.1)


def test_sweep_modified_with_optimization(capsys):
    rows = sweep(capsys, prog("abs_sum_modified"), "--orders", "false-first", "--optimize-variants", "on")
    k3 = next(r for r in rows if r["k"] == "3")
    assert float(k3["pct_vs_pure"]) == pytest.approx(64.3)


def test_sweep_depth_one_matches_pure_of_same_setting(capsys):
    rows = sweep(capsys, prog("sorted_list"))
    assert len(rows) == 6 * 2 * 2
    for r in rows:
        if r["k"] == "1":
            assert float(r["pct_vs_pure_same_opt"]) == 100.0


def test_sweep_is_deterministic_and_parallel_safe(capsys, tmp_path):
    serial = sweep(capsys, prog("bst"), "--k", "1-4")
    assert main(["sweep", prog("bst"), "--k", "1-4", "--jobs", "2", "--csv", str(tmp_path / "t.csv")]) == EXIT_OK
    capsys.readouterr()
    parallel = list(csv.DictReader(io.StringIO((tmp_path / "t.csv").read_text())))
    assert serial == parallel


def test_sweep_json(capsys, tmp_path):
    out = tmp_path / "t.json"
    assert main(["sweep", prog("abs_sum"), "--json", str(out)]) == EXIT_OK
    data = json.loads(out.read_text())
    assert data["rows"][0]["k"] == 1


# -- treesim ------------------------------------------------------------------


def test_treesim_replay_all(capsys):
    assert main(["treesim", "replay"]) == EXIT_OK
    assert "5/5 fixtures pass" in capsys.readouterr().out


def test_treesim_eq1_reports_mismatches(capsys):
    assert main(["treesim", "eq1", "--max-n", "4", "--max-k", "4"]) == EXIT_FAIL
    out = capsys.readouterr().out
    assert "n= 4 k= 2: simulated 20, closed form 21" in out
    assert "recurrence solution: 16/16" in out


def test_treesim_random_small(capsys):
    assert main(["treesim", "random", "--trees", "50", "--max-height", "6", "--max-k", "6"]) == EXIT_OK
    assert "PASS" in capsys.readouterr().out


def test_eq1_grid_summary():
    grid = eq1_grid(5, 5)
    assert grid["cases"] == 25
    assert grid["recurrence_matches"] == 25
    assert (4, 2, 20, 21) in grid["formula_mismatches"]


def test_prop2_check_small():
    summary = prop2_check(40, seed=1, max_height=5, max_k=5)
    assert summary["comparisons"] == 40 * 5 * 2
    assert summary["min_ratio"] > 0.5


# -- compare ------------------------------------------------------------------


@pytest.mark.parametrize("name", ["abs_sum", "abs_sum_modified", "dead_division"])
def test_compare_pass(name, capsys):
    assert main(["compare", prog(name)]) == EXIT_OK
    assert capsys.readouterr().out.startswith("PASS")


def test_compare_catches_broken_recheck(capsys):
    assert main(["compare", prog("dead_division"), "--no-recheck"]) == EXIT_FAIL
    out = capsys.readouterr().out
    assert out.startswith("FAIL") and "extra error leaf" in out

import random
import stat

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specsym.solver import (
    BuiltinSolver,
    ExternalSolver,
    SideInfo,
    SolverConfig,
    SolverException,
    SolverStats,
    brute_force,
    check_model,
    counted_solve,
    emit_external_query,
    make_solver,
    parse_model,
)
from specsym.symcore import FALSE, TRUE, complement, normalize

from conftest import corpus_program


def c(terms, rel, rhs):
    return normalize(dict(terms), rel, rhs)


SMALL = SolverConfig(lo=-8, hi=8)


def random_conjunction(rng, max_vars=4, max_conj=6):
    names = [f"v{i}" for i in range(rng.randint(1, max_vars))]
    out = []
    for _ in range(rng.randint(1, max_conj)):
        terms = {v: rng.randint(-8, 8) for v in names if rng.random() < 0.7}
        out.append(normalize(terms, rng.choice(["<", "<=", ">", ">=", "==", "!="]), rng.randint(-20, 20)))
    return out


def test_complementary_pair_is_unsat():
    v = BuiltinSolver().solve([c({"x": 1}, ">=", 0), c({"x": 1}, "<", 0)])
    assert v.status == "unsat" and v.model is None


def test_speculation_failure_condition_is_unsat():
    pc = [c({"x": 1}, ">", 0), c({"y": 1}, "<=", 0), c({"x": 1, "y": -1}, "<=", 0)]
    assert not BuiltinSolver().solve(pc).is_sat


def test_sat_model_is_valid():
    pc = [c({"x": 1}, ">=", 0), c({"y": 1}, "<", 0), c({"x": 1, "y": -1}, ">", 2)]
    v = BuiltinSolver().solve(pc)
    assert v.is_sat and check_model(pc, v.model)
    assert brute_force(pc, -8, 8) is not None


def test_constants_and_empty():
    s = BuiltinSolver()
    assert s.solve([]).is_sat
    assert s.solve([TRUE]).is_sat
    assert not s.solve([FALSE]).is_sat
    assert not s.solve([c({"x": 1}, ">=", 0), FALSE]).is_sat


def test_domain_bounds_apply():
    s = BuiltinSolver(SolverConfig(lo=-4, hi=4))
    assert not s.solve([c({"x": 1}, ">=", 5)]).is_sat
    assert s.solve([c({"x": 1}, ">=", 4)]).model == {"x": 4}


def test_integer_reasoning_beyond_rationals():
    # 2x = 2y + 1 has rational but no integer solutions
    assert c({"x": 2, "y": -2}, "==", 1) == FALSE
    # 3 <= 2x <= 3 is rationally feasible (x = 1.5) but not over the integers
    pc = [c({"x": 2}, ">=", 3), c({"x": 2}, "<=", 3)]
    assert not BuiltinSolver().solve(pc).is_sat
    pc = [c({"x": 3, "y": 5}, "==", 1), c({"x": 1}, ">=", 0), c({"y": 1}, ">=", 0)]
    assert not BuiltinSolver().solve(pc).is_sat
    pc = [c({"x": 3, "y": 5}, "==", 1), c({"x": 1}, ">=", -10)]
    v = BuiltinSolver().solve(pc)
    assert v.is_sat and check_model(pc, v.model)


def test_disequalities_are_split_lazily():
    pc = [c({"x": 1}, ">=", 0), c({"x": 1}, "<=", 2), c({"x": 1}, "!=", 0), c({"x": 1}, "!=", 1)]
    assert BuiltinSolver().solve(pc).model == {"x": 2}
    pc.append(c({"x": 1}, "!=", 2))
    assert not BuiltinSolver().solve(pc).is_sat


def test_too_many_variables_is_an_exception():
    pc = [c({f"x{i}": 1}, ">=", 0) for i in range(5)]
    with pytest.raises(SolverException) as info:
        BuiltinSolver(SolverConfig(max_vars=4)).solve(pc)
    assert info.value.constraints == tuple(pc)


def test_node_limit_falls_back_to_enumeration():
    rng = random.Random(11)
    tiny = BuiltinSolver(SolverConfig(lo=-8, hi=8, node_limit=1))
    for _ in range(200):
        pc = random_conjunction(rng, max_vars=3)
        assert tiny.solve(pc).is_sat == (brute_force(pc, -8, 8) is not None)


def test_enumeration_limit_raises():
    s = BuiltinSolver(SolverConfig(node_limit=0, enum_limit=10))
    with pytest.raises(SolverException, match="enumeration"):
        s.solve([c({"x": 1, "y": 1}, "!=", 0)])


def test_deterministic():
    rng = random.Random(2)
    s = BuiltinSolver(SMALL)
    for _ in range(50):
        pc = random_conjunction(rng)
        assert s.solve(pc).model == s.solve(pc).model


def test_differential_against_enumeration():
    rng = random.Random(20240611)
    s = BuiltinSolver(SMALL)
    for _ in range(2000):
        pc = random_conjunction(rng)
        v = s.solve(pc)
        assert v.is_sat == (brute_force(pc, -8, 8) is not None), pc
        if v.is_sat:
            assert check_model(pc, v.model)


@settings(max_examples=100, deadline=None)
@given(st.randoms(use_true_random=False), st.integers(1, 4))
def test_unsat_is_monotone(rnd, extra):
    s = BuiltinSolver(SMALL)
    pc = random_conjunction(rnd)
    if s.solve(pc).is_sat:
        pc = pc + [complement(con) for con in pc[:1]]
    assert not s.solve(pc).is_sat
    more = pc + random_conjunction(rnd, max_conj=extra)
    rnd.shuffle(more)
    assert not s.solve(more).is_sat


# -- counting -----------------------------------------------------------------


def test_counted_solve_counts_one_invocation():
    stats = SolverStats()
    counted_solve(stats, BuiltinSolver(), [c({"x": 1}, ">=", 0), c({"x": 1}, "<", 0)],
                  SideInfo("true", False))
    assert (stats.sat, stats.unsat, stats.total) == (0, 1, 1)
    assert stats.tallies == {"true/inequation/infeasible": 1}
    counted_solve(stats, BuiltinSolver(), [c({"x": 1}, "==", 3)], SideInfo("false", True))
    assert (stats.sat, stats.unsat, stats.total, stats.avoided) == (1, 1, 2, 0)
    assert stats.tallies["false/equation/feasible"] == 1


def test_exceptions_are_counted_apart():
    stats = SolverStats()
    with pytest.raises(SolverException):
        counted_solve(stats, BuiltinSolver(SolverConfig(max_vars=0)), [c({"x": 1}, ">=", 0)])
    assert stats.exceptions == 1 and stats.total == 0


def test_stats_round_trip():
    stats = SolverStats(3, 2, 1, 0, 0.5, {"true/equation/feasible": 2})
    assert SolverStats.from_dict(stats.to_dict()) == stats
    assert stats.to_dict()["total"] == 5


# -- external protocol --------------------------------------------------------


def test_query_for_single_constraint():
    q = emit_external_query([c({"X": 1}, ">=", 0)])
    assert q == (
        "(set-logic QF_LIA)\n(declare-fun X () Int)\n(assert (>= X 0))\n(check-sat)\n(get-model)\n(exit)\n"
    )


def test_query_for_empty_conjunction():
    q = emit_external_query([])
    assert "(assert true)" in q and "(check-sat)" in q and "declare-fun" not in q


def test_query_formatting_details():
    q = emit_external_query([c({"x": -2, "q$1": 3}, "!=", -5), c({"a b": 1}, "<=", 1)], domain=(-4, 4))
    assert "(declare-fun q$1 () Int)" in q
    assert "(declare-fun |a b| () Int)" in q
    assert "(assert (not (= (+ (* 3 q$1) (* (- 2) x)) (- 5))))" in q
    assert "(assert (and (<= (- 4) x) (<= x 4)))" in q
    assert q == emit_external_query([c({"x": -2, "q$1": 3}, "!=", -5), c({"a b": 1}, "<=", 1)], domain=(-4, 4))


def test_parse_model():
    text = "sat\n(\n  (define-fun x () Int\n    (- 3))\n  (define-fun |q$1| () Int 7)\n)\n"
    assert parse_model(text) == {"x": -3, "q$1": 7}


def _script(tmp_path, body):
    path = tmp_path / "fake_solver"
    path.write_text("#!/bin/sh\n" + body)
    path.chmod(path.stat().st_mode | stat.S_IEXEC)
    return str(path)


def test_external_timeout_is_solver_exception(tmp_path):
    path = _script(tmp_path, "sleep 5\n")
    with pytest.raises(SolverException, match="timed out"):
        ExternalSolver(path, timeout=0.2).solve([c({"x": 1}, ">=", 0)])


def test_external_garbage_is_solver_exception(tmp_path):
    path = _script(tmp_path, "cat > /dev/null; echo unknown\n")
    with pytest.raises(SolverException):
        ExternalSolver(path).solve([c({"x": 1}, ">=", 0)])


def test_external_bad_model_is_rejected(tmp_path):
    path = _script(tmp_path, "cat > /dev/null; echo sat; echo '((define-fun x () Int (- 1)))'\n")
    with pytest.raises(SolverException, match="re-verification"):
        ExternalSolver(path).solve([c({"x": 1}, ">=", 0)])


def test_make_solver():
    assert isinstance(make_solver("builtin"), BuiltinSolver)
    assert make_solver("external:/usr/bin/z3").args == ["-in"]
    with pytest.raises(ValueError):
        make_solver("yices")


def test_external_agrees_with_builtin(z3_path):
    ext = ExternalSolver(z3_path, domain=(-8, 8))
    builtin = BuiltinSolver(SMALL)
    assert ext.solve([]).is_sat
    pc = [c({"x": 1}, ">", 0), c({"y": 1}, "<=", 0), c({"x": 1, "y": -1}, "<=", 0)]
    assert not ext.solve(pc).is_sat
    rng = random.Random(99)
    for _ in range(100):
        pc = random_conjunction(rng)
        v = ext.solve(pc)
        assert v.is_sat == builtin.solve(pc).is_sat
        if v.is_sat:
            assert check_model(pc, v.model)


def test_search_with_external_solver(z3_path):
    from specsym.search import SearchConfig, run

    rec = run(corpus_program("abs_sum"), SearchConfig("sse", 3, "false-first", optimize=False),
              ExternalSolver(z3_path))
    assert rec.stats.total == 8


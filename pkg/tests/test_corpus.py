import json

import pytest

from specsym import lang
from specsym.search import SearchConfig, run

from conftest import CORPUS, CORPUS_NAMES, corpus_program


def expected(name):
    return json.loads((CORPUS / f"{name}.expected.json").read_text())


def test_every_program_has_expectations():
    sidecars = sorted(p.name[: -len(".expected.json")] for p in CORPUS.glob("*.expected.json"))
    assert sidecars == CORPUS_NAMES


@pytest.mark.parametrize("name", CORPUS_NAMES)
def test_recorded_counts_reproduce(name):
    doc = expected(name)
    p = corpus_program(name)
    assert doc["source"] in ("worked-example", "regression")
    assert lang.longest_path_branch_count(p, 4) == doc["longest_path"]
    for label, want in doc["runs"].items():
        rec = run(p, SearchConfig(**want["config"]))
        s = rec.stats
        got = {"total": s.total, "sat": s.sat, "unsat": s.unsat, "avoided": s.avoided,
               "bugs": sorted(b.message for b in rec.bugs)}
        assert got == {k: want[k] for k in got}, (name, label)


def test_worked_examples_are_labelled():
    assert expected("abs_sum")["runs"]["pure"]["total"] == 14
    assert expected("abs_sum")["runs"]["sse_k3_false_first"]["total"] == 8
    assert expected("abs_sum_modified")["runs"]["sse_k3_false_first_optimized"]["avoided"] == 2
    assert expected("dead_division")["runs"]["sse_k3_false_first"]["bugs"] == []
    assert {name for name in CORPUS_NAMES if expected(name)["source"] == "worked-example"} == {
        "abs_sum", "abs_sum_modified", "dead_division"
    }

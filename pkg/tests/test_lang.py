import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specsym import lang
from specsym.lang import (
    Add,
    Assert,
    Assign,
    Cond,
    Div,
    Error,
    If,
    Mul,
    Neg,
    Num,
    Print,
    Program,
    Sub,
    Var,
    While,
)

from conftest import corpus_program


def test_abs_sum_has_three_conditionals_on_longest_path():
    p = corpus_program("abs_sum")
    assert p.inputs == ("x", "y")
    assert sum(isinstance(s, If) for s in p.body) == 3
    for bound in range(6):
        assert lang.longest_path_branch_count(p, bound) == 3


def test_empty_body_is_valid():
    p = lang.parse_program("sym int x;")
    assert p == Program(("x",), ())
    assert lang.longest_path_branch_count(p, 4) == 0


def test_use_before_definition_names_the_variable():
    with pytest.raises(lang.SemanticError) as info:
        lang.parse_program("sym int x;\nx = y;")
    assert info.value.name == "y"
    assert (info.value.line, info.value.col) == (2, 1)
    assert "'y'" in str(info.value)


def test_duplicate_declaration():
    with pytest.raises(lang.SemanticError) as info:
        lang.parse_program("sym int a;\nsym int b, a;")
    assert info.value.name == "a"
    assert info.value.line == 2


def test_variable_defined_on_one_branch_only_is_rejected():
    src = "sym int a;\nif (a > 0) { b = 1; } else { c = 2; }\nprint(b);"
    with pytest.raises(lang.SemanticError) as info:
        lang.parse_program(src)
    assert info.value.name == "b"


def test_variable_defined_on_both_branches_is_accepted():
    src = "sym int a;\nif (a > 0) { b = 1; } else { b = 2; }\nprint(b);"
    assert len(lang.parse_program(src).body) == 2


def test_loop_body_definitions_do_not_escape():
    src = "sym int a;\nwhile (a > 0) { t = 1; a = a - 1; }\nprint(t);"
    with pytest.raises(lang.SemanticError):
        lang.parse_program(src)


def test_syntax_error_reports_position_and_expectation():
    with pytest.raises(lang.ParseError) as info:
        lang.parse_program("sym int a;\nif (a > 0 { }")
    err = info.value
    assert (err.line, err.col) == (2, 11)
    assert "')'" in err.expected


def test_missing_relation():
    with pytest.raises(lang.ParseError) as info:
        lang.parse_program("sym int a;\nassert(a);")
    assert "'=='" in info.value.expected


def test_bad_character():
    with pytest.raises(lang.ParseError) as info:
        lang.parse_program("sym int a;\na = a # 2;")
    assert info.value.col == 7


def test_nonlinear_product_rejected():
    with pytest.raises(lang.ParseError, match="product"):
        lang.parse_program("sym int a, b;\nc = a * b;")


def test_constant_products_and_symbolic_division_allowed():
    p = lang.parse_program("sym int a, b;\nc = 3 * a + a * (2 - 1);\nd = a / (b - 1);")
    assert p.body[0].expr == Add(Mul(Num(3), Var("a")), Mul(Var("a"), Sub(Num(2), Num(1))))
    assert p.body[1].expr == Div(Var("a"), Sub(Var("b"), Num(1)))


def test_negated_condition_syntax():
    p = lang.parse_program("sym int a;\nassert(!(a < 3));")
    assert p.body[0] == Assert(Cond(Var("a"), ">=", Num(3)))


def test_comments_strings_and_else_less_if():
    src = '// header\nsym int a; // trailing\nif (a == 0) { error("bad \\"zero\\""); }\n'
    p = lang.parse_program(src)
    assert p.body[0] == If(Cond(Var("a"), "==", Num(0)), (Error('bad "zero"'),), ())


def test_straight_line_program_has_no_branches():
    p = lang.parse_program("sym int a;\nb = a + 1;\nprint(b);")
    assert lang.longest_path_branch_count(p, 4) == 0


def test_loop_with_inner_conditional_unrolls():
    p = lang.parse_program("sym int a;\nwhile (a > 0) { if (a == 3) { print(a); } a = a - 1; }")
    assert lang.longest_path_branch_count(p, 4) == 8
    assert lang.longest_path_branch_count(p, 0) == 0


def test_asserts_and_symbolic_divisions_count_as_forks():
    p = lang.parse_program("sym int a, b;\nassert(a > 0);\nc = a / b;\nd = a / 2;")
    assert lang.longest_path_branch_count(p, 4) == 2


def test_negative_loop_bound_rejected():
    with pytest.raises(ValueError):
        lang.longest_path_branch_count(lang.parse_program("sym int a;"), -1)


def test_corpus_round_trips():
    for name in ("abs_sum", "abs_sum_modified", "dead_division", "sorted_list", "bst"):
        p = corpus_program(name)
        assert lang.parse_program(lang.format_program(p)) == p


# -- generated programs -------------------------------------------------------

INPUTS = ("a", "b", "c")
RELS = st.sampled_from(lang.RELATIONS)


def exprs(names):
    leaves = st.one_of(st.builds(Num, st.integers(0, 50)), st.sampled_from([Var(n) for n in names]))

    def extend(inner):
        const = st.builds(Num, st.integers(0, 9))
        return st.one_of(
            st.builds(Neg, inner),
            st.builds(Add, inner, inner),
            st.builds(Sub, inner, inner),
            st.builds(Mul, const, inner),
            st.builds(Mul, inner, const),
            st.builds(Div, inner, inner),
        )

    return st.recursive(leaves, extend, max_leaves=6)


def conds(names):
    return st.builds(Cond, exprs(names), RELS, exprs(names))


def stmts(depth):
    e, c = exprs(INPUTS), conds(INPUTS)
    simple = st.one_of(
        st.builds(Assign, st.sampled_from(INPUTS), e),
        st.builds(Print, e),
        st.builds(Assert, c),
        st.builds(Error, st.text(alphabet='ab "\\', max_size=5)),
    )
    if depth == 0:
        return simple
    block = st.lists(stmts(depth - 1), max_size=3).map(tuple)
    return st.one_of(
        simple,
        st.builds(If, c, block, block),
        st.builds(While, c, block),
    )


programs = st.builds(Program, st.just(INPUTS), st.lists(stmts(2), max_size=4).map(tuple))


@settings(max_examples=200, deadline=None)
@given(programs)
def test_pretty_print_round_trip(p):
    assert lang.parse_program(lang.format_program(p)) == p


@given(conds(INPUTS))
def test_negation_is_an_involution(c):
    assert lang.negate(lang.negate(c)) == c
    assert lang.negate(c).op in lang.RELATIONS
    assert lang.negate(c).op != c.op

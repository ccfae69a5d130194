"""Solver-call accounting on abstract execution trees.

A labeled tree stands in for a program: every branch node has a false
side and a true side, each either feasible (with a subtree below it) or
infeasible (nothing below it).  The simulators here replay the two
search strategies with the labels playing the solver, which makes it
cheap to count calls on thousands of random trees.

This module deliberately does not import the search engine, so the
counts it produces are an independent check on it.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import lang

FALSE_FIRST, TRUE_FIRST = "false-first", "true-first"


class _Leaf:
    __slots__ = ()

    def __repr__(self):
        return "LEAF"


LEAF = _Leaf()


@dataclass(frozen=True, eq=False)
class Branch:
    """A two-way branch; a side is None when it is infeasible."""

    false: Optional["Tree"]
    true: Optional["Tree"]

    def __post_init__(self):
        if self.false is None and self.true is None:
            raise ValueError("a reachable branch has at least one feasible side")

    def side(self, letter: str):
        return self.true if letter == "T" else self.false


Tree = object  # LEAF or Branch


def height(t) -> int:
    if t is LEAF:
        return 0
    return 1 + max(height(c) for c in (t.false, t.true) if c is not None)


def count_branches(t) -> int:
    if t is LEAF:
        return 0
    return 1 + sum(count_branches(c) for c in (t.false, t.true) if c is not None)


def tree_equal(a, b) -> bool:
    if a is None or b is None or a is LEAF or b is LEAF:
        return a is b
    return tree_equal(a.false, b.false) and tree_equal(a.true, b.true)


def full_tree(n: int):
    """All-feasible tree of height n (subtrees shared)."""
    t = LEAF
    for _ in range(n):
        t = Branch(t, t)
    return t


class Interner:
    """Hash-consing: structurally equal subtrees become the same object."""

    def __init__(self):
        self._table = {}

    def branch(self, false, true):
        key = (id(false), id(true))
        node = self._table.get(key)
        if node is None:
            node = Branch(false, true)
            self._table[key] = node
        return node


def gen_random_tree(height_bound: int, p: float, seed) -> object:
    """Random labeled tree of exactly ``height_bound`` levels.

    At every branch one side is picked at random and is infeasible with
    probability ``p``.  If it is infeasible the other side is feasible;
    otherwise the other side is infeasible with probability ``p``.  The
    expected share of infeasible sides is therefore ``p * (2 - p) / 2``.
    """
    if not 0 <= p < 1:
        raise ValueError("infeasibility probability must lie in [0, 1)")
    if height_bound < 0:
        raise ValueError("height bound must be >= 0")
    rng = random.Random(seed)
    interner = Interner()

    def build(h):
        if h == 0:
            return LEAF
        first_is_true = rng.random() < 0.5
        first_bad = rng.random() < p
        second_bad = False if first_bad else rng.random() < p
        first = None if first_bad else build(h - 1)
        second = None if second_bad else build(h - 1)
        return interner.branch(second, first) if first_is_true else interner.branch(first, second)

    return build(height_bound)


def expected_infeasible_ratio(p: float) -> float:
    return p * (2 - p) / 2


def infeasible_ratio(t) -> tuple:
    """(infeasible sides, all sides) counted over the unshared tree."""
    if t is LEAF:
        return 0, 0
    bad, total = 0, 2
    for c in (t.false, t.true):
        if c is None:
            bad += 1
        else:
            b, n = infeasible_ratio(c)
            bad, total = bad + b, total + n
    return bad, total


# -- S-expression format ------------------------------------------------------


def to_sexp(t) -> str:
    if t is LEAF:
        return "leaf"
    sides = ["-" if c is None else f"(+ {to_sexp(c)})" for c in (t.false, t.true)]
    return f"({sides[0]} {sides[1]})"


class TreeSyntaxError(ValueError):
    pass


def parse_sexp(text: str):
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0

    def expect(tok):
        nonlocal pos
        if pos >= len(tokens) or tokens[pos] != tok:
            got = tokens[pos] if pos < len(tokens) else "end of input"
            raise TreeSyntaxError(f"expected {tok!r}, got {got!r}")
        pos += 1

    def tree():
        nonlocal pos
        if pos < len(tokens) and tokens[pos] == "leaf":
            pos += 1
            return LEAF
        expect("(")
        f = side()
        t = side()
        expect(")")
        try:
            return Branch(f, t)
        except ValueError as exc:
            raise TreeSyntaxError(str(exc)) from None

    def side():
        nonlocal pos
        if pos < len(tokens) and tokens[pos] == "-":
            pos += 1
            return None
        expect("(")
        expect("+")
        sub = tree()
        expect(")")
        return sub

    result = tree()
    if pos != len(tokens):
        raise TreeSyntaxError(f"trailing input at token {tokens[pos]!r}")
    return result


# -- simulation ---------------------------------------------------------------


@dataclass
class SimResult:
    sat: int = 0
    unsat: int = 0
    avoided: int = 0
    trace: list = field(default_factory=list)  # (path, "sat" | "unsat")
    avoided_paths: list = field(default_factory=list)

    @property
    def invocations(self) -> int:
        return self.sat + self.unsat

    def probe(self, path: str, feasible: bool):
        if feasible:
            self.sat += 1
        else:
            self.unsat += 1
        self.trace.append((path, "sat" if feasible else "unsat"))


def _order(order: str) -> str:
    if order not in (FALSE_FIRST, TRUE_FIRST):
        raise ValueError(f"unknown order {order!r}")
    return "TF" if order == TRUE_FIRST else "FT"


def simulate_pure(t, order: str = FALSE_FIRST, optimize: bool = False) -> SimResult:
    """Classic DFS: one check per branch side entered."""
    letters = _order(order)
    res = SimResult()

    def visit(node, path):
        if node is LEAF:
            return
        first_bad = False
        for i, letter in enumerate(letters):
            child = node.side(letter)
            if i == 1 and optimize and first_bad:
                res.avoided += 1
                res.avoided_paths.append(path + letter)
            else:
                res.probe(path + letter, child is not None)
            if child is None:
                first_bad = i == 0
            else:
                visit(child, path + letter)

    visit(t, "")
    return res


def _bisect_probes(m: int, lo: int) -> list:
    """Prefix lengths probed when only the last of m entries is infeasible."""
    out = []
    hi = m - 1
    while lo <= hi:
        mid = (lo + hi) // 2
        out.append(mid)
        lo = mid + 1
    return out


def simulate_sse(t, k: int, order: str = FALSE_FIRST, optimize: bool = False, anchor: bool = True) -> SimResult:
    """Speculative DFS with bisection backtracking, traced.

    ``d`` is the number of unchecked sides on the current segment and
    ``known`` the number of them (0 or 1, always the first) known feasible
    through the absurdity rule without being an anchor.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    letters = _order(order)
    res = SimResult()

    def fail(path, m, known):
        # every side above the infeasible one is feasible, so bisection
        # walks right until it pins the last entry
        for j in _bisect_probes(m, max(1, known + 1)):
            res.probe(path[: len(path) - m + j], True)

    def check(path, feasible, m, known) -> bool:
        if known == m:
            res.avoided += 1
            res.avoided_paths.append(path)
            return True
        res.probe(path, feasible)
        if not feasible:
            fail(path, m, known)
        return feasible

    def enter(child, path, d, known):
        """Walk into a side with d unchecked sides (it included)."""
        if d >= k or child is LEAF or child is None:
            check(path, child is not None, d, known)
            if child is None:
                return False
            d, known = 0, 0
        if child is not LEAF:
            visit(child, path, d, known)
        return True

    def visit(node, path, d, known):
        first, second = letters
        ok = enter(node.side(first), path + first, d + 1, known)
        second_path = path + second
        if optimize and not ok:
            if anchor:
                res.avoided += 1
                res.avoided_paths.append(second_path)
                child = node.side(second)
                if child is not LEAF:
                    visit(child, second_path, 0, 0)
                return
            enter(node.side(second), second_path, 1, 1)
            return
        enter(node.side(second), second_path, 1, 0)

    if t is not LEAF:
        visit(t, "", 0, 0)
    return res


def sse_count(t, k: int, order: str = FALSE_FIRST, optimize: bool = False) -> int:
    """Invocation count of :func:`simulate_sse`, memoised per shared subtree.

    Much faster than the traced simulator on hash-consed random trees.
    """
    letters = _order(order)
    memo = {}
    probes = [0] + [len(_bisect_probes(m, 1)) for m in range(1, k + 1)]

    def enter(child, d):
        if d >= k or child is LEAF or child is None:
            if child is None:
                return 1 + probes[d], False
            if child is LEAF:
                return 1, True
            return 1 + visit(child, 0), True
        return visit(child, d), True

    def visit(node, d):
        key = (id(node), d)
        hit = memo.get(key)
        if hit is not None:
            return hit
        first, second = letters
        cost, ok = enter(node.side(first), d + 1)
        if optimize and not ok:
            child = node.side(second)
            cost += 0 if child is LEAF else visit(child, 0)
        else:
            cost += enter(node.side(second), 1)[0]
        memo[key] = cost
        return cost

    return 0 if t is LEAF else visit(t, 0)


def pure_count(t, optimize: bool = False, order: str = FALSE_FIRST) -> int:
    """Invocation count of :func:`simulate_pure` without building a trace."""
    if not optimize:
        memo = {}

        def sides(node):
            if node is LEAF:
                return 0
            hit = memo.get(id(node))
            if hit is None:
                hit = 2 + sum(sides(c) for c in (node.false, node.true) if c is not None)
                memo[id(node)] = hit
            return hit

        return sides(t)
    return simulate_pure(t, order, optimize).invocations


# -- closed forms -------------------------------------------------------------


def eq1_formula(n: int, k: int) -> int:
    """The closed form under test for checks on a full tree of height n.

    ``2^n`` when n <= k, else ``2^n + (2^n - 2^(n mod k)) / (2^k - 1)``.
    """
    if n < 1 or k < 1:
        raise ValueError("n and k must be >= 1")
    if n > 30:
        raise OverflowError("n is limited to 30")
    if n <= k:
        return 2**n
    num = 2**n - 2 ** (n % k)
    den = 2**k - 1
    assert num % den == 0, (n, k)
    return 2**n + num // den


def full_tree_sse_count(n: int, k: int) -> int:
    """Checks on a full tree of height n, solved from the recurrence.

    Going one level up doubles the count and, when the segment is exactly
    full at the old root (n divisible by k), each subtree pays one extra
    check for its root side; hence T(n+1) = 2 T(n) + 2 [n mod k == 0].
    """
    if n < 1 or k < 1:
        raise ValueError("n and k must be >= 1")
    if n <= k:
        return 2**n
    r = n % k or k
    return 2**n + (2**n - 2**r) // (2**k - 1)


def full_tree_pure_count(n: int) -> int:
    return 2 ** (n + 1) - 2


# -- fixtures -----------------------------------------------------------------

FIXTURE_DIR = Path(__file__).with_name("fixtures")
FIXTURES = ("full_pure", "full_k3", "pruned_k3", "pruned_k3_true_first", "pruned_k3_absurdity")


@dataclass(frozen=True)
class Fixture:
    name: str
    tree: object
    strategy: str
    k: int
    order: str
    optimize: bool
    expect: tuple  # ((path, verdict), ...)
    avoided: tuple


class FixtureMismatch(AssertionError):
    def __init__(self, name, position, expected, got):
        self.name, self.position, self.expected, self.got = name, position, expected, got
        super().__init__(f"{name}: probe {position}: expected {expected}, got {got}")


def load_fixture(name: str) -> Fixture:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; known: {', '.join(FIXTURES)}")
    meta, body = {}, []
    for line in (FIXTURE_DIR / f"{name}.sexp").read_text().splitlines():
        if line.startswith(";;"):
            key, _, value = line[2:].partition(":")
            meta[key.strip()] = value.strip()
        elif not line.startswith(";"):
            body.append(line)

    def pairs(text):
        out = []
        for item in text.split():
            path, _, verdict = item.partition(":")
            out.append((path, verdict))
        return tuple(out)

    return Fixture(
        name=name,
        tree=parse_sexp(" ".join(body)),
        strategy=meta["strategy"],
        k=int(meta.get("k", "1")),
        order=meta["order"],
        optimize=meta.get("optimize", "false") == "true",
        expect=pairs(meta["expect"]),
        avoided=tuple(meta.get("avoided", "").split()),
    )


def simulate_fixture(fx: Fixture) -> SimResult:
    if fx.strategy == "pure":
        return simulate_pure(fx.tree, fx.order, fx.optimize)
    return simulate_sse(fx.tree, fx.k, fx.order, fx.optimize)


def replay_fixture(name: str):
    """Simulate a recorded example tree and compare with its recorded trace.

    Returns (result, expected trace); raises FixtureMismatch at the first
    differing probe.
    """
    fx = load_fixture(name)
    res = simulate_fixture(fx)
    for i in range(max(len(fx.expect), len(res.trace))):
        want = fx.expect[i] if i < len(fx.expect) else None
        got = res.trace[i] if i < len(res.trace) else None
        if want != got:
            raise FixtureMismatch(name, i + 1, want, got)
    if tuple(res.avoided_paths) != fx.avoided:
        raise FixtureMismatch(name, "avoided", fx.avoided, tuple(res.avoided_paths))
    return res, fx.expect


# -- program synthesis --------------------------------------------------------


def tree_to_program(t) -> lang.Program:
    """A program whose execution tree is exactly ``t``.

    Depth j tests its own input ``dj``.  ``dj > 0`` leaves both sides
    feasible; ``dj + dj == 1`` has no integer solution, so its true side
    is dead, and ``dj + dj != 1`` kills the false side.
    """
    h = height(t)
    inputs = tuple(f"d{j}" for j in range(h))

    def block(node, j):
        if node is None or node is LEAF:
            return ()
        v = lang.Var(f"d{j}")
        twice = lang.Add(v, v)
        if node.true is None:
            cond = lang.Cond(twice, "==", lang.Num(1))
        elif node.false is None:
            cond = lang.Cond(twice, "!=", lang.Num(1))
        else:
            cond = lang.Cond(v, ">", lang.Num(0))
        return (lang.If(cond, block(node.true, j + 1), block(node.false, j + 1)),)

    return lang.Program(inputs, block(t, 0))


def bisect_budget(m: int) -> int:
    return math.ceil(math.log2(m)) if m > 1 else 0

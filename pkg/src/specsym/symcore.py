"""Symbolic values, constraints, path conditions and single-step execution.

Everything here is an immutable value: ``step`` never mutates its input
state, so a stored state can be replayed at any time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional, Union

from . import lang

# -- linear forms -------------------------------------------------------------


@dataclass(frozen=True)
class DivTerm:
    """An unresolved integer division ``num / den`` inside a linear form."""

    num: "LinearForm"
    den: "LinearForm"

    def __str__(self):
        return f"({self.num} / {self.den})"


def _atom_key(atom):
    if isinstance(atom, str):
        return (0, atom)
    return (1, str(atom))


@dataclass(frozen=True)
class LinearForm:
    """``const + sum(coef * atom)``; atoms are symbol names or DivTerms.

    ``terms`` is kept sorted and never holds a zero coefficient, so equal
    forms compare and hash equal.
    """

    const: int = 0
    terms: tuple = ()

    @staticmethod
    def constant(value: int) -> "LinearForm":
        return LinearForm(value, ())

    @staticmethod
    def symbol(atom) -> "LinearForm":
        return LinearForm(0, ((atom, 1),))

    @staticmethod
    def _build(const: int, coeffs: dict) -> "LinearForm":
        items = sorted(((a, c) for a, c in coeffs.items() if c != 0), key=lambda ac: _atom_key(ac[0]))
        return LinearForm(const, tuple(items))

    def is_constant(self) -> bool:
        return not self.terms

    def atoms(self):
        return [a for a, _ in self.terms]

    def symbols(self) -> set:
        out = set()
        for a, _ in self.terms:
            if isinstance(a, str):
                out.add(a)
            else:
                out |= a.num.symbols() | a.den.symbols()
        return out

    def div_terms(self) -> list:
        """Division atoms, innermost first."""
        out = []
        for a, _ in self.terms:
            if isinstance(a, DivTerm):
                for inner in a.num.div_terms() + a.den.div_terms():
                    if inner not in out:
                        out.append(inner)
                if a not in out:
                    out.append(a)
        return out

    def __add__(self, other: "LinearForm") -> "LinearForm":
        coeffs = dict(self.terms)
        for a, c in other.terms:
            coeffs[a] = coeffs.get(a, 0) + c
        return LinearForm._build(self.const + other.const, coeffs)

    def scale(self, k: int) -> "LinearForm":
        if k == 0:
            return LinearForm()
        return LinearForm(self.const * k, tuple((a, c * k) for a, c in self.terms))

    def __neg__(self) -> "LinearForm":
        return self.scale(-1)

    def __sub__(self, other: "LinearForm") -> "LinearForm":
        return self + (-other)

    def substitute(self, mapping: dict) -> "LinearForm":
        """Replace atoms by linear forms."""
        out = LinearForm.constant(self.const)
        for a, c in self.terms:
            out = out + mapping.get(a, LinearForm.symbol(a)).scale(c)
        return out

    def evaluate(self, model: dict) -> int:
        total = self.const
        for a, c in self.terms:
            if not isinstance(a, str):
                raise ValueError("cannot evaluate an unresolved division")
            total += c * model[a]
        return total

    def __str__(self):
        parts = []
        for a, c in self.terms:
            name = str(a)
            if c == 1:
                parts.append(f"+ {name}")
            elif c == -1:
                parts.append(f"- {name}")
            elif c < 0:
                parts.append(f"- {-c}*{name}")
            else:
                parts.append(f"+ {c}*{name}")
        if self.const or not parts:
            parts.append(f"- {-self.const}" if self.const < 0 else f"+ {self.const}")
        s = " ".join(parts)
        return s[2:] if s.startswith("+ ") else "-" + s[2:]


SymExpr = LinearForm


def trunc_div(a: int, b: int) -> int:
    """Integer division rounding toward zero (C/Java semantics)."""
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b > 0) else -q


class EvalError(Exception):
    pass


def eval_expr(env: dict, e, div_memo: Optional[dict] = None) -> LinearForm:
    """Evaluate an IntExpr over a symbolic environment.

    ``div_memo`` maps already-resolved DivTerms to their quotient symbols.
    """
    if isinstance(e, lang.Num):
        return LinearForm.constant(e.value)
    if isinstance(e, lang.Var):
        try:
            return env[e.name]
        except KeyError:
            raise EvalError(f"unbound variable {e.name!r}") from None
    if isinstance(e, lang.Neg):
        return -eval_expr(env, e.operand, div_memo)
    left = eval_expr(env, e.left, div_memo)
    right = eval_expr(env, e.right, div_memo)
    if isinstance(e, lang.Add):
        return left + right
    if isinstance(e, lang.Sub):
        return left - right
    if isinstance(e, lang.Mul):
        if left.is_constant():
            return right.scale(left.const)
        if right.is_constant():
            return left.scale(right.const)
        raise EvalError("non-linear product")
    # division
    if left.is_constant() and right.is_constant() and right.const != 0:
        return LinearForm.constant(trunc_div(left.const, right.const))
    term = DivTerm(left, right)
    if div_memo and term in div_memo:
        return LinearForm.symbol(div_memo[term])
    return LinearForm.symbol(term)


# -- constraints --------------------------------------------------------------

REL_LE, REL_GE, REL_EQ, REL_NE = "<=", ">=", "==", "!="

_PRETTY = {REL_LE: "≤", REL_GE: "≥", REL_EQ: "=", REL_NE: "≠"}


@dataclass(frozen=True)
class Constraint:
    """Canonical integer constraint ``sum(coef * var) REL rhs``.

    Canonical form: strict relations tightened to ``<=``/``>=``, variables
    sorted, coefficients divided by their gcd, first coefficient positive.
    Variable-free constraints collapse to TRUE (``0 <= 0``) or FALSE
    (``0 <= -1``).
    """

    terms: tuple
    rel: str
    rhs: int

    def variables(self):
        return [v for v, _ in self.terms]

    def lhs_value(self, model: dict) -> int:
        return sum(c * model.get(v, 0) for v, c in self.terms)

    def holds(self, model: dict) -> bool:
        x = self.lhs_value(model)
        if self.rel == REL_LE:
            return x <= self.rhs
        if self.rel == REL_GE:
            return x >= self.rhs
        if self.rel == REL_EQ:
            return x == self.rhs
        return x != self.rhs

    @property
    def is_equation(self) -> bool:
        return self.rel in (REL_EQ, REL_NE)

    def __str__(self):
        lhs = str(LinearForm(0, self.terms)) if self.terms else "0"
        return f"{lhs} {_PRETTY[self.rel]} {self.rhs}"


TRUE = Constraint((), REL_LE, 0)
FALSE = Constraint((), REL_LE, -1)


def normalize(terms: dict, rel: str, rhs: int) -> Constraint:
    """Canonicalize ``sum(terms) rel rhs`` with rel in < <= > >= == !=."""
    if rel == "<":
        rel, rhs = REL_LE, rhs - 1
    elif rel == ">":
        rel, rhs = REL_GE, rhs + 1
    elif rel not in (REL_LE, REL_GE, REL_EQ, REL_NE):
        raise ValueError(f"unknown relation {rel!r}")
    items = sorted((v, c) for v, c in terms.items() if c != 0)
    if not items:
        ok = {REL_LE: 0 <= rhs, REL_GE: 0 >= rhs, REL_EQ: rhs == 0, REL_NE: rhs != 0}[rel]
        return TRUE if ok else FALSE
    if items[0][1] < 0:
        items = [(v, -c) for v, c in items]
        rhs = -rhs
        rel = {REL_LE: REL_GE, REL_GE: REL_LE}.get(rel, rel)
    g = 0
    for _, c in items:
        g = math.gcd(g, c)
    if g > 1:
        items = [(v, c // g) for v, c in items]
        if rel == REL_LE:
            rhs = rhs // g
        elif rel == REL_GE:
            rhs = -((-rhs) // g)
        elif rhs % g:
            return FALSE if rel == REL_EQ else TRUE
        else:
            rhs //= g
    return Constraint(tuple(items), rel, rhs)


def make_constraint(left: LinearForm, rel: str, right: LinearForm) -> Constraint:
    diff = left - right
    if diff.div_terms():
        raise ValueError("unresolved division in constraint")
    return normalize(dict(diff.terms), rel, -diff.const)


def complement(c: Constraint) -> Constraint:
    """Exact logical complement over the integers."""
    if c.rel == REL_LE:
        return normalize(dict(c.terms), REL_GE, c.rhs + 1)
    if c.rel == REL_GE:
        return normalize(dict(c.terms), REL_LE, c.rhs - 1)
    return normalize(dict(c.terms), REL_NE if c.rel == REL_EQ else REL_EQ, c.rhs)


# -- path conditions ----------------------------------------------------------

UNKNOWN, SAT, UNSAT = "unknown", "sat", "unsat"


@dataclass(frozen=True)
class PathCondition:
    """Ordered conjunction with per-conjunct branch provenance."""

    entries: tuple = ()
    status: str = UNKNOWN

    @property
    def constraints(self) -> tuple:
        return tuple(c for c, _ in self.entries)

    def prefix(self, n: int) -> "PathCondition":
        return PathCondition(self.entries[:n])

    def __len__(self):
        return len(self.entries)

    def __str__(self):
        if not self.entries:
            return "⟨true⟩"
        return "⟨" + " ∧ ".join(str(c) for c, _ in self.entries) + "⟩"


class ProvenanceError(ValueError):
    pass


def append_constraint(pc: PathCondition, c: Constraint, branch_id: int) -> PathCondition:
    if pc.entries and branch_id <= pc.entries[-1][1]:
        raise ProvenanceError(f"branch id {branch_id} not greater than {pc.entries[-1][1]}")
    return PathCondition(pc.entries + ((c, branch_id),), UNKNOWN)


# -- compiled program ---------------------------------------------------------
#
# The AST is flattened once into a list of instructions addressed by index:
#   ("assign", target, expr, next)   ("print", expr, next)
#   ("if", cond, then_pc, else_pc)   ("loop", loop_id, cond, body_pc, exit_pc)
#   ("jump", target)                 ("assert", cond, next)
#   ("error", message)               ("halt",)


@dataclass(frozen=True)
class Compiled:
    code: tuple
    n_loops: int


@lru_cache(maxsize=256)
def compile_program(p: lang.Program) -> Compiled:
    code = []
    n_loops = 0

    def emit(ins) -> int:
        code.append(ins)
        return len(code) - 1

    def block(stmts, after_patch):
        # after_patch: list collecting (index, slot) pairs to point at the block's exit
        nonlocal n_loops
        pending = after_patch
        for s in stmts:
            start = len(code)
            for idx, slot in pending:
                _patch(code, idx, slot, start)
            pending = []
            if isinstance(s, lang.Assign):
                i = emit(["assign", s.target, s.expr, None])
                pending = [(i, 3)]
            elif isinstance(s, lang.Print):
                i = emit(["print", s.expr, None])
                pending = [(i, 2)]
            elif isinstance(s, lang.Assert):
                i = emit(["assert", s.cond, None])
                pending = [(i, 2)]
            elif isinstance(s, lang.Error):
                emit(["error", s.message])
                pending = []
            elif isinstance(s, lang.If):
                i = emit(["if", s.cond, None, None])
                then_exit = block(s.then, [(i, 2)])
                else_exit = block(s.orelse, [(i, 3)])
                pending = then_exit + else_exit
            else:
                loop_id = n_loops
                n_loops += 1
                i = emit(["loop", loop_id, s.cond, None, None])
                body_exit = block(s.body, [(i, 3)])
                for idx, slot in body_exit:
                    _patch(code, idx, slot, i)
                pending = [(i, 4)]
        return pending

    exits = block(p.body, [])
    end = emit(["halt"])
    for idx, slot in exits:
        _patch(code, idx, slot, end)
    return Compiled(tuple(tuple(ins) for ins in code), n_loops)


def _patch(code, idx, slot, target):
    code[idx][slot] = target


# -- symbolic state -----------------------------------------------------------


@dataclass(frozen=True)
class SymState:
    env: tuple  # sorted (name, LinearForm) pairs
    pc: PathCondition
    loc: int
    loops: tuple
    spec_depth: int = 0
    fresh: int = 0
    div_memo: tuple = ()  # (DivTerm, quotient symbol) pairs
    steps: int = 0
    trail: tuple = ()  # (loc, taken) for every conditional decision on the path

    def env_dict(self) -> dict:
        return dict(self.env)

    def lookup(self, name: str) -> LinearForm:
        return self.env_dict()[name]


def initial_state(p: lang.Program) -> SymState:
    compiled = compile_program(p)
    env = tuple(sorted((name, LinearForm.symbol(name)) for name in p.inputs))
    return SymState(env=env, pc=PathCondition((), SAT), loc=0, loops=(0,) * compiled.n_loops)


# -- step results -------------------------------------------------------------


@dataclass(frozen=True)
class Next:
    state: SymState


@dataclass(frozen=True)
class BranchOutcome:
    """Both successors of a symbolic two-way branch."""

    false_state: SymState
    true_state: SymState
    branch_id: int
    false_constraint: Constraint
    true_constraint: Constraint
    equation: bool


@dataclass(frozen=True)
class PathEnd:
    state: SymState
    reason: str  # "halt" or "loop-bound"


@dataclass(frozen=True)
class ErrorSite:
    """A potential bug point.

    ``constraint`` is the extra condition needed for the error (None when
    the error is unconditional once the statement is reached);
    ``continuation`` is the non-error successor, if execution can go on.
    """

    state: SymState
    message: str
    constraint: Optional[Constraint]
    continuation: Optional[SymState]
    branch_id: int


StepResult = Union[Next, BranchOutcome, PathEnd, ErrorSite]


def _resolve_divisions(state: SymState, forms, branch_id: int):
    """Resolve the first pending division among ``forms``.

    Returns (state, None) when nothing needed resolving or only constant
    non-zero divisors were memoised, or (state, ErrorSite) for a division
    that may fail.
    """
    memo = dict(state.div_memo)
    fresh = state.fresh
    for form in forms:
        for term in form.div_terms():
            if term in memo:
                continue
            num = term.num.substitute({t: LinearForm.symbol(q) for t, q in memo.items()})
            den = term.den.substitute({t: LinearForm.symbol(q) for t, q in memo.items()})
            if num.div_terms() or den.div_terms():
                continue
            if den.is_constant() and den.const == 0:
                return state, ErrorSite(state, "divide-by-zero", None, None, branch_id)
            fresh += 1
            symbol = f"q${fresh}"
            memo[term] = symbol
            if not den.is_constant():
                zero = make_constraint(den, "==", LinearForm())
                nonzero = complement(zero)
                cont = replace(
                    state,
                    pc=append_constraint(state.pc, nonzero, branch_id),
                    fresh=fresh,
                    div_memo=tuple(memo.items()),
                    spec_depth=state.spec_depth + 1,
                )
                return state, ErrorSite(state, "divide-by-zero", zero, cont, branch_id)
    if fresh != state.fresh:
        state = replace(state, fresh=fresh, div_memo=tuple(memo.items()))
    return state, None


def _eval_all(state: SymState, exprs):
    env = state.env_dict()
    memo = dict(state.div_memo)
    return [eval_expr(env, e, memo) for e in exprs]


def step(s: SymState, p: lang.Program, branch_id: int = 0, loop_bound: int = 4) -> StepResult:
    """Execute the statement at ``s.loc``.

    ``branch_id`` labels any constraint this step appends; callers supply
    strictly increasing ids.
    """
    code = compile_program(p).code
    ins = code[s.loc]
    op = ins[0]
    base = replace(s, steps=s.steps + 1)

    if op == "halt":
        return PathEnd(base, "halt")
    if op == "jump":
        return Next(replace(base, loc=ins[1]))
    if op == "error":
        return ErrorSite(base, ins[1], None, None, branch_id)

    if op in ("assign", "print"):
        expr = ins[2] if op == "assign" else ins[1]
        (form,) = _eval_all(s, [expr])
        resolved, site = _resolve_divisions(s, [form], branch_id)
        if site is not None:
            return replace(site, state=replace(site.state, steps=base.steps),
                           continuation=site.continuation and replace(site.continuation, steps=base.steps))
        if resolved is not s:
            (form,) = _eval_all(resolved, [expr])
        base = replace(resolved, steps=base.steps)
        if op == "print":
            return Next(replace(base, loc=ins[2]))
        env = base.env_dict()
        env[ins[1]] = form
        return Next(replace(base, env=tuple(sorted(env.items())), loc=ins[3]))

    # conditional forms: if / loop / assert
    cond = ins[2] if op == "loop" else ins[1]
    if op == "loop" and s.loops[ins[1]] >= loop_bound:
        return PathEnd(base, "loop-bound")
    left, right = _eval_all(s, [cond.left, cond.right])
    resolved, site = _resolve_divisions(s, [left, right], branch_id)
    if site is not None:
        return replace(site, state=replace(site.state, steps=base.steps),
                       continuation=site.continuation and replace(site.continuation, steps=base.steps))
    if resolved is not s:
        left, right = _eval_all(resolved, [cond.left, cond.right])
    base = replace(resolved, steps=base.steps)
    diff = left - right

    if op == "assert":
        if diff.is_constant():
            if make_constraint(left, cond.op, right) == TRUE:
                return Next(replace(base, loc=ins[2]))
            return ErrorSite(base, "assertion failed", None, None, branch_id)
        holds = make_constraint(left, cond.op, right)
        cont = replace(
            base,
            pc=append_constraint(base.pc, holds, branch_id),
            loc=ins[2],
            spec_depth=base.spec_depth + 1,
        )
        return ErrorSite(base, "assertion failed", complement(holds), cont, branch_id)

    if op == "if":
        then_loc, else_loc = ins[2], ins[3]
        loops_true = loops_false = base.loops
    else:
        loop_id = ins[1]
        then_loc, else_loc = ins[3], ins[4]
        loops_true = base.loops[:loop_id] + (base.loops[loop_id] + 1,) + base.loops[loop_id + 1:]
        loops_false = base.loops[:loop_id] + (0,) + base.loops[loop_id + 1:]

    if diff.is_constant():
        taken = make_constraint(left, cond.op, right) == TRUE
        return Next(replace(
            base,
            loc=then_loc if taken else else_loc,
            loops=loops_true if taken else loops_false,
            trail=base.trail + ((s.loc, taken),),
        ))

    true_c = make_constraint(left, cond.op, right)
    false_c = complement(true_c)
    depth = base.spec_depth + 1
    t_state = replace(base, pc=append_constraint(base.pc, true_c, branch_id), loc=then_loc,
                      loops=loops_true, spec_depth=depth, trail=base.trail + ((s.loc, True),))
    f_state = replace(base, pc=append_constraint(base.pc, false_c, branch_id), loc=else_loc,
                      loops=loops_false, spec_depth=depth, trail=base.trail + ((s.loc, False),))
    return BranchOutcome(f_state, t_state, branch_id, false_c, true_c, cond.op in ("==", "!="))


def error_state(site: ErrorSite) -> SymState:
    """The state in which the error of ``site`` actually happens."""
    s = site.state
    if site.constraint is None:
        return s
    return replace(s, pc=append_constraint(s.pc, site.constraint, site.branch_id),
                   spec_depth=s.spec_depth + 1)

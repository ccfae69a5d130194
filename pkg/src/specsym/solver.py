"""Feasibility checking for conjunctions of linear integer constraints.

The built-in procedure works on a bounded box (every symbol lies in
``[lo, hi]``): Fourier-Motzkin elimination gives a rational witness,
branch-and-bound turns it into an integer one, and ``!=`` conjuncts are
split lazily, only when the current witness violates them.  When the
branch-and-bound tree grows past a node limit the solver falls back to
enumerating the box, and raises :class:`SolverException` if even that
is too large.

Every call the search makes goes through :func:`counted_solve`, which is
the single place where invocation counts are recorded.
"""

from __future__ import annotations

import math
import os
import re
import subprocess
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .symcore import FALSE, REL_EQ, REL_GE, REL_LE, REL_NE, TRUE, Constraint

SAT, UNSAT = "sat", "unsat"


class SolverException(Exception):
    """The solver could not decide a query (capacity, timeout, bad reply)."""

    def __init__(self, message, constraints=None):
        super().__init__(message)
        self.constraints = tuple(constraints) if constraints is not None else None


@dataclass(frozen=True)
class Verdict:
    status: str
    model: Optional[dict] = None
    elapsed: float = 0.0

    @property
    def is_sat(self) -> bool:
        return self.status == SAT


@dataclass(frozen=True)
class SolverConfig:
    """Limits of the built-in solver.

    ``lo``/``hi`` bound every symbol; ``node_limit`` caps branch-and-bound
    nodes before enumeration is attempted; ``enum_limit`` caps the number
    of box points enumeration may visit.
    """

    lo: int = -64
    hi: int = 63
    max_vars: int = 24
    max_coeff: int = 10**15
    node_limit: int = 4000
    enum_limit: int = 2_000_000


def collect_vars(constraints) -> list:
    names = set()
    for c in constraints:
        names.update(c.variables())
    return sorted(names)


def check_model(constraints, model: dict) -> bool:
    return all(c.holds(model) for c in constraints)


# -- Fourier-Motzkin over integer rows ---------------------------------------
#
# A row is (coeffs, b) meaning  sum(coeffs[i] * x_i) <= b  with int entries.


def _tighten(coeffs: tuple, b: int):
    g = 0
    for a in coeffs:
        g = math.gcd(g, a)
    if g > 1:
        return tuple(a // g for a in coeffs), b // g
    return coeffs, b


def _dedupe(rows):
    best = {}
    for coeffs, b in rows:
        if coeffs in best and best[coeffs] <= b:
            continue
        best[coeffs] = b
    return list(best.items())


class _Infeasible(Exception):
    pass


def _fm_witness(rows, n: int, max_coeff: int):
    """Rational point satisfying every row, or None.

    Rows are tightened for integers at every stage, so the projection only
    ever loses non-integral points; each stage is still contained in the
    projection of the one before, so back-substitution cannot get stuck.
    """
    stages = []
    current = []
    try:
        for coeffs, b in rows:
            current.append(_normalize_row(coeffs, b))
        current = _dedupe(r for r in current if r is not None)
        remaining = set(range(n))
        while remaining:
            def cost(j):
                pos = sum(1 for c, _ in current if c[j] > 0)
                neg = sum(1 for c, _ in current if c[j] < 0)
                return (pos * neg - pos - neg, j)

            j = min(remaining, key=cost)
            remaining.discard(j)
            pos = [r for r in current if r[0][j] > 0]
            neg = [r for r in current if r[0][j] < 0]
            rest = [r for r in current if r[0][j] == 0]
            stages.append((j, pos + neg))
            new = list(rest)
            for cp, bp in pos:
                for cn, bn in neg:
                    ap, an = cp[j], -cn[j]
                    coeffs = tuple(an * x + ap * y for x, y in zip(cp, cn))
                    b = an * bp + ap * bn
                    if abs(b) > max_coeff or any(abs(x) > max_coeff for x in coeffs):
                        raise SolverException("coefficient overflow during elimination")
                    row = _normalize_row(coeffs, b)
                    if row is not None:
                        new.append(row)
            current = _dedupe(new)
    except _Infeasible:
        return None

    point = [Fraction(0)] * n
    for j, stage_rows in reversed(stages):
        lo, hi = None, None
        for coeffs, b in stage_rows:
            rest = b - sum(coeffs[i] * point[i] for i in range(n) if i != j)
            bound = Fraction(rest, 1) / coeffs[j]
            if coeffs[j] > 0:
                hi = bound if hi is None or bound < hi else hi
            else:
                lo = bound if lo is None or bound > lo else lo
        if lo is None and hi is None:
            value = Fraction(0)
        elif lo is None:
            value = Fraction(math.floor(hi))
        elif hi is None:
            value = Fraction(math.ceil(lo))
        else:
            if lo > hi:  # cannot happen for a well-formed projection
                raise SolverException("inconsistent back-substitution")
            c = math.ceil(lo)
            value = Fraction(c) if c <= hi else lo
        point[j] = value
    return point


def _normalize_row(coeffs, b):
    if not any(coeffs):
        if b < 0:
            raise _Infeasible
        return None
    return _tighten(tuple(coeffs), b)


# -- built-in solver ----------------------------------------------------------


class BuiltinSolver:
    """Bounded-box linear integer feasibility.

    Deterministic and reentrant: all state lives on the call stack.
    """

    name = "builtin"

    def __init__(self, config: SolverConfig | None = None):
        self.config = config or SolverConfig()

    def solve(self, constraints: Sequence[Constraint]) -> Verdict:
        start = time.perf_counter()
        status, model = self._decide(list(constraints))
        return Verdict(status, model, time.perf_counter() - start)

    def _decide(self, constraints):
        cfg = self.config
        if any(c == FALSE for c in constraints):
            return UNSAT, None
        constraints = [c for c in constraints if c != TRUE]
        names = collect_vars(constraints)
        if not names:
            return SAT, {}
        if len(names) > cfg.max_vars:
            raise SolverException(f"too many variables ({len(names)} > {cfg.max_vars})", constraints)
        index = {v: i for i, v in enumerate(names)}
        n = len(names)

        def vec(c):
            coeffs = [0] * n
            for v, a in c.terms:
                if abs(a) > cfg.max_coeff:
                    raise SolverException("coefficient too large", constraints)
                coeffs[index[v]] = a
            return tuple(coeffs)

        rows, diseqs = [], []
        for c in constraints:
            a = vec(c)
            if c.rel == REL_LE:
                rows.append((a, c.rhs))
            elif c.rel == REL_GE:
                rows.append((tuple(-x for x in a), -c.rhs))
            elif c.rel == REL_EQ:
                rows.append((a, c.rhs))
                rows.append((tuple(-x for x in a), -c.rhs))
            else:
                diseqs.append((a, c.rhs))
        for i in range(n):
            unit = tuple(1 if k == i else 0 for k in range(n))
            rows.append((unit, cfg.hi))
            rows.append((tuple(-x for x in unit), -cfg.lo))

        nodes = 0
        stack = [rows]
        while stack:
            nodes += 1
            if nodes > cfg.node_limit:
                return self._enumerate(constraints, names)
            node_rows = stack.pop()
            point = _fm_witness(node_rows, n, cfg.max_coeff)
            if point is None:
                continue
            frac = next((i for i, x in enumerate(point) if x.denominator != 1), None)
            if frac is not None:
                unit = tuple(1 if k == frac else 0 for k in range(n))
                v = point[frac]
                # push the "up" branch first so "down" is explored first
                stack.append(node_rows + [(tuple(-x for x in unit), -math.ceil(v))])
                stack.append(node_rows + [(unit, math.floor(v))])
                continue
            ints = [int(x) for x in point]
            broken = next((d for d in diseqs if sum(a * x for a, x in zip(d[0], ints)) == d[1]), None)
            if broken is not None:
                a, c = broken
                stack.append(node_rows + [(tuple(-x for x in a), -(c + 1))])
                stack.append(node_rows + [(a, c - 1)])
                continue
            model = dict(zip(names, ints))
            if not check_model(constraints, model):
                raise SolverException("internal error: model fails re-verification", constraints)
            return SAT, model
        return UNSAT, None

    def _enumerate(self, constraints, names):
        cfg = self.config
        size = (cfg.hi - cfg.lo + 1) ** len(names)
        if size > cfg.enum_limit:
            raise SolverException("search space exceeds enumeration limit", constraints)
        model = brute_force(constraints, cfg.lo, cfg.hi, names)
        return (SAT, model) if model is not None else (UNSAT, None)


def brute_force(constraints, lo: int, hi: int, names=None) -> Optional[dict]:
    """Exhaustive search of the box; returns a model or None.

    Vectorized with numpy; meant as a test oracle and a last-resort
    fallback, so it makes no attempt to be clever.
    """
    import numpy as np

    constraints = list(constraints)
    if any(c == FALSE for c in constraints):
        return None
    names = list(names) if names is not None else collect_vars(constraints)
    if not names:
        return {} if all(c.holds({}) for c in constraints) else None
    axis = np.arange(lo, hi + 1, dtype=np.int64)
    grids = np.meshgrid(*([axis] * len(names)), indexing="ij")
    cols = {v: g.ravel() for v, g in zip(names, grids)}
    mask = np.ones(axis.size ** len(names), dtype=bool)
    for c in constraints:
        lhs = np.zeros_like(mask, dtype=np.int64)
        for v, a in c.terms:
            lhs += a * cols[v]
        if c.rel == REL_LE:
            mask &= lhs <= c.rhs
        elif c.rel == REL_GE:
            mask &= lhs >= c.rhs
        elif c.rel == REL_EQ:
            mask &= lhs == c.rhs
        else:
            mask &= lhs != c.rhs
    hits = np.flatnonzero(mask)
    if hits.size == 0:
        return None
    k = hits[0]
    return {v: int(cols[v][k]) for v in names}


# -- external solver ----------------------------------------------------------

_SIMPLE_SYMBOL = re.compile(r"^[A-Za-z~!@$%^&*_+=<>.?/-][A-Za-z0-9~!@$%^&*_+=<>.?/-]*$")


def smt_symbol(name: str) -> str:
    return name if _SIMPLE_SYMBOL.match(name) else f"|{name}|"


def _smt_int(v: int) -> str:
    return str(v) if v >= 0 else f"(- {-v})"


def _smt_term(c: Constraint) -> str:
    parts = []
    for v, a in c.terms:
        parts.append(smt_symbol(v) if a == 1 else f"(* {_smt_int(a)} {smt_symbol(v)})")
    if not parts:
        return "0"
    return parts[0] if len(parts) == 1 else "(+ " + " ".join(parts) + ")"


def _smt_assert(c: Constraint) -> str:
    lhs, rhs = _smt_term(c), _smt_int(c.rhs)
    if c.rel == REL_NE:
        return f"(assert (not (= {lhs} {rhs})))"
    op = {REL_LE: "<=", REL_GE: ">=", REL_EQ: "="}[c.rel]
    return f"(assert ({op} {lhs} {rhs}))"


def emit_external_query(constraints, domain: Optional[tuple] = None) -> str:
    """SMT-LIB 2 text for a QF_LIA satisfiability query.

    When ``domain`` is given every symbol is additionally bounded to it, so
    the external verdict is comparable with the bounded built-in one.
    """
    constraints = list(constraints)
    lines = ["(set-logic QF_LIA)"]
    names = collect_vars(constraints)
    for v in names:
        lines.append(f"(declare-fun {smt_symbol(v)} () Int)")
    if domain is not None:
        lo, hi = domain
        for v in names:
            lines.append(f"(assert (and (<= {_smt_int(lo)} {smt_symbol(v)}) (<= {smt_symbol(v)} {_smt_int(hi)})))")
    if not constraints:
        lines.append("(assert true)")
    lines.extend(_smt_assert(c) for c in constraints)
    lines.append("(check-sat)")
    if names:
        lines.append("(get-model)")
    lines.append("(exit)")
    return "\n".join(lines) + "\n"


_DEFINE_RE = re.compile(r"\(define-fun\s+(\|[^|]*\||\S+)\s+\(\)\s+Int\s+(\(\s*-\s*\d+\s*\)|-?\d+)\s*\)")


def parse_model(text: str) -> dict:
    model = {}
    for name, value in _DEFINE_RE.findall(text):
        name = name[1:-1] if name.startswith("|") else name
        value = value.replace("(", "").replace(")", "").replace(" ", "")
        model[name] = int(value)
    return model


class ExternalSolver:
    """Runs an SMT-LIB 2 solver as a subprocess, one process per query."""

    def __init__(self, path: str, timeout: float = 5.0, domain: Optional[tuple] = (-64, 63), args=None):
        self.path = path
        self.timeout = timeout
        self.domain = domain
        if args is None:
            args = ["-in"] if os.path.basename(path) in ("z3", "z3.exe") else []
        self.args = list(args)
        self.name = f"external:{path}"

    def solve(self, constraints) -> Verdict:
        constraints = list(constraints)
        query = emit_external_query(constraints, self.domain)
        start = time.perf_counter()
        try:
            proc = subprocess.run(
                [self.path, *self.args], input=query, capture_output=True, text=True, timeout=self.timeout
            )
        except subprocess.TimeoutExpired:
            raise SolverException(f"external solver timed out after {self.timeout}s", constraints) from None
        except OSError as exc:
            raise SolverException(f"cannot run external solver: {exc}", constraints) from None
        elapsed = time.perf_counter() - start
        out = proc.stdout.strip()
        head = out.split(None, 1)[0] if out else ""
        if head == UNSAT:
            return Verdict(UNSAT, None, elapsed)
        if head != SAT:
            raise SolverException(f"external solver answered {head or proc.stderr.strip()!r}", constraints)
        model = parse_model(out)
        for v in collect_vars(constraints):
            model.setdefault(v, 0)
        if not check_model(constraints, model):
            raise SolverException("external model fails re-verification", constraints)
        return Verdict(SAT, model, elapsed)


def make_solver(spec: str, config: SolverConfig | None = None, timeout: float = 5.0):
    """``builtin`` or ``external:<path>``."""
    if spec == "builtin":
        return BuiltinSolver(config)
    if spec.startswith("external:") and len(spec) > len("external:"):
        cfg = config or SolverConfig()
        return ExternalSolver(spec[len("external:"):], timeout=timeout, domain=(cfg.lo, cfg.hi))
    raise ValueError(f"unknown solver {spec!r} (expected builtin or external:<path>)")


# -- counting -----------------------------------------------------------------


@dataclass(frozen=True)
class SideInfo:
    """Which branch side a query checks: ``side`` is "true" or "false"."""

    side: str
    equation: bool


@dataclass
class SolverStats:
    """Invocation counters for one search run.

    ``total`` is derived, so it always equals ``sat + unsat``.  Queries
    that end in a solver exception are tallied separately.
    """

    sat: int = 0
    unsat: int = 0
    avoided: int = 0
    exceptions: int = 0
    solving_time: float = 0.0
    tallies: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return self.sat + self.unsat

    def tally(self, info: SideInfo, feasible: bool):
        key = f"{info.side}/{'equation' if info.equation else 'inequation'}/{'feasible' if feasible else 'infeasible'}"
        self.tallies[key] = self.tallies.get(key, 0) + 1

    def to_dict(self) -> dict:
        return {
            "sat": self.sat,
            "unsat": self.unsat,
            "total": self.total,
            "avoided": self.avoided,
            "exceptions": self.exceptions,
            "solving_time": self.solving_time,
            "tallies": dict(sorted(self.tallies.items())),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolverStats":
        return cls(d["sat"], d["unsat"], d["avoided"], d["exceptions"], d["solving_time"], dict(d["tallies"]))


def counted_solve(stats: SolverStats, solver, constraints, side: Optional[SideInfo] = None) -> Verdict:
    """Solve and record exactly one invocation in ``stats``."""
    start = time.perf_counter()
    try:
        verdict = solver.solve(constraints)
    except SolverException:
        stats.exceptions += 1
        stats.solving_time += time.perf_counter() - start
        raise
    stats.solving_time += time.perf_counter() - start
    if verdict.is_sat:
        stats.sat += 1
    else:
        stats.unsat += 1
    if side is not None:
        stats.tally(side, verdict.is_sat)
    return verdict

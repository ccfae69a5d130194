"""Path exploration strategies: classic DFS and speculative DFS.

Speculative DFS takes up to ``depth`` branches without asking the solver,
then checks the whole batch with one query.  When that query comes back
unsat, a bisection over the prefixes of the batch finds the first
infeasible branch and the search resumes at its sibling.

Both strategies share the same leaf bookkeeping so their execution trees
can be compared directly (see :func:`leaf_multiset`).
"""

from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from . import lang
from .solver import BuiltinSolver, SideInfo, SolverException, SolverStats, Verdict, counted_solve
from .symcore import (
    SAT,
    BranchOutcome,
    ErrorSite,
    Next,
    PathEnd,
    SymState,
    error_state,
    initial_state,
    step,
)

PURE, SPECULATIVE = "pure", "speculative"
FALSE_FIRST, TRUE_FIRST = "false-first", "true-first"
_STRATEGY_ALIASES = {"pure": PURE, "speculative": SPECULATIVE, "sse": SPECULATIVE}

NORMAL_END, ERROR, PRUNED = "normal-end", "error", "pruned-infeasible"


@dataclass(frozen=True)
class SearchConfig:
    """Knobs of one exploration run.

    ``absurdity_anchor`` decides whether a branch side known feasible via
    the absurdity ledger restarts the speculation segment (the default) or
    is simply carried along inside the current one.
    """

    strategy: str = SPECULATIVE
    depth: int = 3
    order: str = TRUE_FIRST
    optimize: bool = True
    recheck: bool = True
    loop_bound: int = 4
    absurdity_anchor: bool = True

    def __post_init__(self):
        if self.strategy not in _STRATEGY_ALIASES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        object.__setattr__(self, "strategy", _STRATEGY_ALIASES[self.strategy])
        if not isinstance(self.depth, int) or self.depth < 1:
            raise ValueError("max speculation depth must be an integer >= 1")
        if self.order not in (FALSE_FIRST, TRUE_FIRST):
            raise ValueError(f"unknown exploration order {self.order!r}")
        if self.loop_bound < 0:
            raise ValueError("loop bound must be >= 0")

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "depth": self.depth,
            "order": self.order,
            "optimize": self.optimize,
            "recheck": self.recheck,
            "loop_bound": self.loop_bound,
            "absurdity_anchor": self.absurdity_anchor,
        }


@dataclass(frozen=True)
class Leaf:
    kind: str
    constraints: tuple
    model: Optional[dict] = None
    reason: str = ""
    trail: tuple = ()  # (statement address, taken) for each decision on the path


@dataclass(frozen=True)
class BugReport:
    message: str
    constraints: tuple
    model: Optional[dict]


@dataclass(frozen=True)
class QueryRecord:
    """One solver invocation; ``purpose`` is side, segment, probe, scan or error."""

    constraints: tuple
    status: str
    purpose: str


@dataclass(frozen=True)
class FailedSegment:
    """A speculation segment whose check came back unsat.

    ``prefixes`` holds the path condition of each segment entry, so tests
    can recompute the first infeasible position independently.
    """

    length: int
    index: int
    invocations: int
    prefixes: tuple


@dataclass
class ExplorationRecord:
    config: SearchConfig
    leaves: list = field(default_factory=list)
    stats: SolverStats = field(default_factory=SolverStats)
    instructions: int = 0
    bugs: list = field(default_factory=list)
    queries: list = field(default_factory=list)
    failed_segments: list = field(default_factory=list)
    absurdity_confirmed: list = field(default_factory=list)

    def leaf_multiset(self, kinds=(NORMAL_END, ERROR)) -> Counter:
        return leaf_multiset(self, kinds)


def leaf_multiset(record: ExplorationRecord, kinds=(NORMAL_END, ERROR)) -> Counter:
    return Counter((leaf.kind, leaf.constraints) for leaf in record.leaves if leaf.kind in kinds)


class AbsurdityLedger:
    """Branch id -> the side proven infeasible."""

    def __init__(self):
        self._infeasible = {}

    def record(self, branch_id: int, side: str):
        previous = self._infeasible.get(branch_id)
        if previous is not None and previous != side:
            raise AssertionError(f"both sides of branch {branch_id} recorded infeasible")
        self._infeasible[branch_id] = side

    def infeasible_side(self, branch_id: int) -> Optional[str]:
        return self._infeasible.get(branch_id)

    def __len__(self):
        return len(self._infeasible)


KNOWN_FEASIBLE, UNKNOWN = "known-feasible", "unknown"

_SIBLING = {"true": "false", "false": "true", "error": "cont", "cont": "error"}


def apply_absurdity(ledger: AbsurdityLedger, branch_id: int, side: str) -> str:
    """Known-feasible iff the opposite side of ``branch_id`` is recorded infeasible."""
    return KNOWN_FEASIBLE if ledger.infeasible_side(branch_id) == _SIBLING[side] else UNKNOWN


@dataclass(frozen=True)
class BacktrackResult:
    index: int
    probes: int
    model: Optional[dict]


def backtrack_binary_search(length: int, probe: Callable[[int], Verdict], known_sat: int = 0) -> BacktrackResult:
    """First infeasible position of a failed segment.

    ``probe(j)`` checks the prefix made of the first ``j`` entries.  The
    full segment (``j == length``) is already known unsat and prefixes up
    to ``known_sat`` are known sat, so only ``known_sat + 1 .. length - 1``
    are probed.  ``model`` is the witness of prefix ``index - 1`` when a
    probe produced it, else None.
    """
    lo, hi, ans = max(1, known_sat + 1), length - 1, length
    probes = 0
    models = {}
    while lo <= hi:
        mid = (lo + hi) // 2
        verdict = probe(mid)
        probes += 1
        if verdict.is_sat:
            models[mid] = verdict.model
            lo = mid + 1
        else:
            ans = mid
            hi = mid - 1
    return BacktrackResult(ans, probes, models.get(ans - 1))


# -- shared run context -------------------------------------------------------


class _Run:
    def __init__(self, program: lang.Program, cfg: SearchConfig, solver):
        self.p = program
        self.cfg = cfg
        self.solver = solver if solver is not None else BuiltinSolver()
        self.record = ExplorationRecord(cfg)
        self.ledger = AbsurdityLedger()
        self.next_id = 0

    def step(self, state: SymState):
        self.next_id += 1
        self.record.instructions += 1
        return step(state, self.p, branch_id=self.next_id, loop_bound=self.cfg.loop_bound)

    def solve(self, constraints: tuple, purpose: str, info: Optional[SideInfo]) -> Verdict:
        try:
            verdict = counted_solve(self.record.stats, self.solver, constraints, info)
        except SolverException as exc:
            if exc.constraints is None:
                exc.constraints = constraints
            raise
        self.record.queries.append(QueryRecord(constraints, verdict.status, purpose))
        return verdict

    def ordered(self, out: BranchOutcome):
        f = (out.false_state, "false", SideInfo("false", out.equation))
        t = (out.true_state, "true", SideInfo("true", out.equation))
        return (t, f) if self.cfg.order == TRUE_FIRST else (f, t)

    def leaf(self, kind, state: SymState, model=None, reason=""):
        self.record.leaves.append(Leaf(kind, state.pc.constraints, model, reason, state.trail))

    def bug(self, message, state: SymState, model):
        self.record.bugs.append(BugReport(message, state.pc.constraints, model))
        self.leaf(ERROR, state, model, message)

    def avoided(self, state: SymState):
        self.record.stats.avoided += 1
        self.record.absurdity_confirmed.append(state.pc.constraints)


def _confirmed(state: SymState) -> SymState:
    return replace(state, spec_depth=0, pc=replace(state.pc, status=SAT))


# -- classic DFS --------------------------------------------------------------


def run_pure_dfs(p: lang.Program, cfg: SearchConfig, solver=None) -> ExplorationRecord:
    """Check every branch side the moment it is entered."""
    if cfg.strategy != PURE:
        cfg = replace(cfg, strategy=PURE)
    run = _Run(p, cfg, solver)
    # work items: (state, branch_id, side, info, parent_model, error_message);
    # side None marks a state that is already known feasible
    work = [(initial_state(p), 0, None, None, {}, "")]
    while work:
        state, bid, side, info, model, message = work.pop()
        if side is not None:
            if cfg.optimize and apply_absurdity(run.ledger, bid, side) == KNOWN_FEASIBLE:
                run.avoided(state)
            else:
                purpose = "error" if side == "error" else "side"
                verdict = run.solve(state.pc.constraints, purpose, info)
                if not verdict.is_sat:
                    if cfg.optimize:
                        run.ledger.record(bid, side)
                    if side != "error":
                        run.leaf(PRUNED, state)
                    continue
                model = verdict.model
            if side == "error":
                run.bug(message, state, model)
                continue
        state = _confirmed(state)
        while True:
            res = run.step(state)
            if isinstance(res, Next):
                state = res.state
            elif isinstance(res, PathEnd):
                run.leaf(NORMAL_END, res.state, model, res.reason)
                break
            elif isinstance(res, BranchOutcome):
                first, second = run.ordered(res)
                work.append((second[0], res.branch_id, second[1], second[2], model, ""))
                work.append((first[0], res.branch_id, first[1], first[2], model, ""))
                break
            else:
                if res.constraint is None:
                    run.bug(res.message, res.state, model)
                    break
                # the error side is examined first, then the continuation
                work.append((res.continuation, res.branch_id, "cont", None, model, ""))
                work.append((error_state(res), res.branch_id, "error", None, model, res.message))
                break
    return run.record


# -- speculative DFS ----------------------------------------------------------


@dataclass
class _Entry:
    """One taken branch side on the current path."""

    state: SymState
    branch_id: int
    side: str
    info: Optional[SideInfo]
    alt: Optional[tuple] = None  # (state, side, info) of the untaken sibling
    confirmed: bool = False
    model: Optional[dict] = None
    known_feasible: bool = False
    message: str = ""


class _Speculative:
    def __init__(self, run: _Run):
        self.run = run
        self.cfg = run.cfg
        self.path: list = []

    # segment helpers

    def seg_start(self) -> int:
        i = len(self.path)
        while i > 0 and not self.path[i - 1].confirmed:
            i -= 1
        return i

    def anchor_model(self, upto: int) -> dict:
        for e in reversed(self.path[:upto]):
            if e.confirmed:
                return e.model
        return {}

    def confirm(self, lo: int, hi: int, model: dict):
        for e in self.path[lo:hi]:
            e.confirmed = True
            e.model = model
            e.state = _confirmed(e.state)

    def check(self) -> bool:
        """Check the unconfirmed tail of the path; False if it was infeasible.

        On failure the path is truncated so that its last entry is the
        first infeasible one.
        """
        s = self.seg_start()
        m = len(self.path) - s
        if m == 0:
            return True
        known = 0
        while known < m and self.path[s + known].known_feasible:
            known += 1
        if known == m:
            for e in self.path[s:]:
                self.run.avoided(e.state)
            self.confirm(s, len(self.path), self.anchor_model(s))
            return True
        last = self.path[-1]
        try:
            verdict = self.run.solve(last.state.pc.constraints, "segment", last.info)
        except SolverException as exc:
            return self.careful_scan(s, m, known, exc)
        if verdict.is_sat:
            self.confirm(s, len(self.path), verdict.model)
            return True

        def probe(j):
            e = self.path[s + j - 1]
            return self.run.solve(e.state.pc.constraints, "probe", e.info)

        try:
            result = backtrack_binary_search(m, probe, known)
        except SolverException as exc:
            return self.careful_scan(s, m, known, exc)
        self.fail_at(s, m, result.index, result.model, 1 + result.probes)
        return False

    def careful_scan(self, s, m, known, exc) -> bool:
        """Front-to-back prefix scan after a solver exception.

        The failing conjunction is never re-submitted; if every shorter
        prefix is sat the original exception propagates.
        """
        failing = exc.constraints
        model = self.anchor_model(s)
        spent = 1
        for j in range(known + 1, m):
            e = self.path[s + j - 1]
            if e.state.pc.constraints == failing:
                raise exc
            verdict = self.run.solve(e.state.pc.constraints, "scan", e.info)
            spent += 1
            if not verdict.is_sat:
                self.fail_at(s, m, j, model, spent)
                return False
            model = verdict.model
        raise exc

    def fail_at(self, s, m, index, model, invocations):
        prefixes = tuple(e.state.pc.constraints for e in self.path[s:s + m])
        if index > 1:
            if model is None:
                model = self.anchor_model(s)
            self.confirm(s, s + index - 1, model)
        bad = self.path[s + index - 1]
        if self.cfg.optimize:
            self.run.ledger.record(bad.branch_id, bad.side)
        if bad.side != "error":
            self.run.leaf(PRUNED, bad.state)
        del self.path[s + index:]
        self.run.record.failed_segments.append(FailedSegment(m, index, invocations, prefixes))

    # path growth

    def enter(self, state, bid, side, info, alt=None, message=""):
        self.path.append(_Entry(replace(state, spec_depth=len(self.path) - self.seg_start() + 1),
                                bid, side, info, alt, message=message))

    def depth(self) -> int:
        return len(self.path) - self.seg_start()

    def take_alternative(self) -> Optional[SymState]:
        """Pop to the deepest pending sibling and enter it; None when done."""
        while self.path:
            e = self.path.pop()
            if e.alt is None:
                continue
            state, side, info = e.alt
            if self.cfg.optimize and apply_absurdity(self.run.ledger, e.branch_id, side) == KNOWN_FEASIBLE:
                self.enter(state, e.branch_id, side, info)
                new = self.path[-1]
                if self.cfg.absurdity_anchor:
                    self.run.avoided(new.state)
                    self.confirm(len(self.path) - 1, len(self.path), self.anchor_model(len(self.path) - 1))
                    return new.state
                new.known_feasible = True
            else:
                self.enter(state, e.branch_id, side, info)
            if self.depth() >= self.cfg.depth and not self.check():
                continue
            return self.path[-1].state
        return None

    def current_model(self) -> dict:
        return self.anchor_model(len(self.path))

    def run_all(self):
        run, cfg = self.run, self.cfg
        state: Optional[SymState] = initial_state(run.p)
        while state is not None:
            res = run.step(state)
            if isinstance(res, Next):
                state = res.state
                continue
            if isinstance(res, BranchOutcome):
                first, second = run.ordered(res)
                self.enter(first[0], res.branch_id, first[1], first[2], alt=second)
                if self.depth() >= cfg.depth and not self.check():
                    state = self.take_alternative()
                else:
                    state = self.path[-1].state
                continue
            if isinstance(res, PathEnd):
                if self.check():
                    run.leaf(NORMAL_END, res.state, self.current_model(), res.reason)
                state = self.take_alternative()
                continue
            state = self.error_site(res)

    def error_site(self, site: ErrorSite) -> Optional[SymState]:
        run, cfg = self.run, self.cfg
        if site.constraint is None:
            if not cfg.recheck:
                run.bug(site.message, site.state, None)
                self.check()
            elif self.check():
                run.bug(site.message, site.state, self.current_model())
            return self.take_alternative()

        err = error_state(site)
        alt = (site.continuation, "cont", None)
        if not cfg.recheck:
            run.bug(site.message, err, None)
            if not self.check():
                return self.take_alternative()
            self.enter(site.continuation, site.branch_id, "cont", None)
            if self.depth() >= cfg.depth and not self.check():
                return self.take_alternative()
            return self.path[-1].state

        # the error side joins the segment but never counts toward the depth limit
        self.enter(err, site.branch_id, "error", None, alt=alt, message=site.message)
        if self.check():
            run.bug(site.message, err, self.path[-1].model)
        return self.take_alternative()


def run_speculative_dfs(p: lang.Program, cfg: SearchConfig, solver=None) -> ExplorationRecord:
    """Speculative DFS with bisection backtracking."""
    if cfg.strategy != SPECULATIVE:
        cfg = replace(cfg, strategy=SPECULATIVE)
    run = _Run(p, cfg, solver)
    _Speculative(run).run_all()
    return run.record


def run(p: lang.Program, cfg: SearchConfig, solver=None) -> ExplorationRecord:
    if cfg.strategy == PURE:
        return run_pure_dfs(p, cfg, solver)
    return run_speculative_dfs(p, cfg, solver)


def timed_run(p: lang.Program, cfg: SearchConfig, solver=None):
    start = time.perf_counter()
    record = run(p, cfg, solver)
    return record, time.perf_counter() - start


def budget(m: int) -> int:
    """Largest number of invocations a failed segment of length m may cost."""
    return 1 + math.ceil(math.log2(m)) if m > 1 else 1

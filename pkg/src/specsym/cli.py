"""Command-line front end.

Exit codes: 0 clean run, 1 failed check (compare/treesim), 2 bugs found,
3 solver exception, 64 usage, configuration or input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import random
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

from . import lang, treesim
from .search import (
    ERROR,
    FALSE_FIRST,
    NORMAL_END,
    PRUNED,
    TRUE_FIRST,
    SearchConfig,
    leaf_multiset,
    run,
)
from .solver import SolverConfig, SolverException, make_solver

EXIT_OK, EXIT_FAIL, EXIT_BUGS, EXIT_SOLVER, EXIT_USAGE = 0, 1, 2, 3, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- reports ------------------------------------------------------------------


@dataclass
class RunReport:
    program: str
    config: dict
    stats: dict
    leaves: dict
    bugs: list
    instructions: int
    wall_time: float
    solving_time: float
    solver: str = "builtin"
    savings: Optional[dict] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.savings is None:
            del d["savings"]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def build_report(path: str, cfg: SearchConfig, record, wall: float, solver_name: str) -> RunReport:
    kinds = {NORMAL_END: 0, ERROR: 0, PRUNED: 0}
    for leaf in record.leaves:
        kinds[leaf.kind] += 1
    bugs = [
        {
            "message": b.message,
            "path_condition": [str(c) for c in b.constraints],
            "model": None if b.model is None else dict(sorted(b.model.items())),
        }
        for b in record.bugs
    ]
    stats = record.stats.to_dict()
    return RunReport(
        program=path,
        config=cfg.to_dict(),
        stats=stats,
        leaves=kinds,
        bugs=bugs,
        instructions=record.instructions,
        wall_time=wall,
        solving_time=stats["solving_time"],
        solver=solver_name,
    )


def savings(report: RunReport, baseline: RunReport) -> dict:
    def pct_saved(base, new):
        return round(100.0 * (base - new) / base, 2) if base else 0.0

    return {
        "baseline": baseline.config,
        "baseline_calls": baseline.stats["total"],
        "calls_saved_pct": pct_saved(baseline.stats["total"], report.stats["total"]),
        "solving_time_saved_pct": pct_saved(baseline.solving_time, report.solving_time),
        "wall_time_saved_pct": pct_saved(baseline.wall_time, report.wall_time),
        "extra_instructions": report.instructions - baseline.instructions,
    }


# -- helpers ------------------------------------------------------------------


def load_program(path: str) -> lang.Program:
    try:
        return lang.parse_file(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None
    except lang.LangError as exc:
        raise UsageError(f"{path}: {exc}") from None


def make_config(args, strategy=None, depth=None, order=None, optimize=None) -> SearchConfig:
    try:
        return SearchConfig(
            strategy=strategy or args.strategy,
            depth=depth if depth is not None else args.depth,
            order=order or args.order,
            optimize=args.optimize if optimize is None else optimize,
            recheck=not args.no_recheck,
            loop_bound=args.loop_bound,
            absurdity_anchor=not args.no_absurdity_anchor,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def get_solver(args):
    try:
        return make_solver(args.solver, SolverConfig(lo=args.domain[0], hi=args.domain[1]), timeout=args.timeout)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def write_text(dest: Optional[str], text: str):
    if dest is None:
        return
    if dest == "-":
        sys.stdout.write(text)
    else:
        Path(dest).write_text(text)


def execute(path, p, cfg, solver) -> RunReport:
    start = time.perf_counter()
    record = run(p, cfg, solver)
    return build_report(path, cfg, record, time.perf_counter() - start, getattr(solver, "name", "builtin"))


def parse_range(text: str) -> list:
    """``3``, ``1-4`` or ``1,2,5``."""
    out = []
    try:
        for part in text.split(","):
            if "-" in part:
                a, b = part.split("-", 1)
                out.extend(range(int(a), int(b) + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise UsageError(f"bad range {text!r}") from None
    return out


# -- subcommands --------------------------------------------------------------


def cmd_run(args) -> int:
    random.seed(args.seed)
    p = load_program(args.program)
    cfg = make_config(args)
    solver = get_solver(args)
    try:
        report = execute(args.program, p, cfg, solver)
        if args.baseline:
            if args.baseline == "pure":
                base = execute(args.program, p, make_config(args, strategy="pure", optimize=False), solver)
            else:
                try:
                    base = RunReport.from_dict(json.loads(Path(args.baseline).read_text()))
                except (OSError, ValueError, TypeError) as exc:
                    raise UsageError(f"cannot load baseline {args.baseline}: {exc}") from None
            report.savings = savings(report, base)
    except SolverException as exc:
        pc = " & ".join(str(c) for c in exc.constraints or ())
        print(f"solver exception: {exc} [path condition: {pc}]", file=sys.stderr)
        return EXIT_SOLVER
    s = report.stats
    out = sys.stderr if args.json == "-" else sys.stdout
    print(
        f"{args.program}: strategy={cfg.strategy} k={cfg.depth} order={cfg.order} "
        f"optimize={'on' if cfg.optimize else 'off'}",
        file=out,
    )
    print(f"  solver calls: {s['total']} (sat {s['sat']}, unsat {s['unsat']}), avoided {s['avoided']}", file=out)
    print(f"  leaves: {report.leaves[NORMAL_END]} normal, {report.leaves[ERROR]} error, "
          f"{report.leaves[PRUNED]} pruned; instructions {report.instructions}", file=out)
    for bug in report.bugs:
        print(f"  bug: {bug['message']} under {' & '.join(bug['path_condition']) or 'true'}"
              f" witness {bug['model']}", file=out)
    if report.savings:
        print(f"  calls saved vs baseline: {report.savings['calls_saved_pct']}%", file=out)
    write_text(args.json, report.to_json())
    return EXIT_BUGS if report.bugs else EXIT_OK


SWEEP_FIELDS = ("k", "order", "optimize", "total", "sat", "unsat", "avoided",
                "pct_vs_pure", "pct_vs_pure_same_opt", "bugs")


def _sweep_row(job):
    path, cfg, solver_spec, domain, timeout = job
    p = lang.parse_file(path)
    rec = run(p, cfg, make_solver(solver_spec, SolverConfig(lo=domain[0], hi=domain[1]), timeout))
    return rec.stats.total, rec.stats.sat, rec.stats.unsat, rec.stats.avoided, len(rec.bugs)


def sweep_rows(args) -> list:
    p = load_program(args.program)
    longest = lang.longest_path_branch_count(p, args.loop_bound)
    ks = parse_range(args.k) if args.k else list(range(1, max(longest, 1) + 1))
    if not ks or min(ks) < 1 or max(ks) > max(longest, 1):
        raise UsageError(f"k range must lie within 1..{max(longest, 1)}")
    orders = [FALSE_FIRST, TRUE_FIRST] if args.orders == "both" else [args.orders]
    variants = {"both": [False, True], "on": [True], "off": [False]}[args.optimize_variants]
    get_solver(args)  # validate early

    plan = []
    for opt in variants:
        for order in orders:
            plan.append(("pure", 1, order, opt))
            for k in ks:
                plan.append(("sse", k, order, opt))
    if False not in variants:
        plan.append(("pure", 1, orders[0], False))
    jobs = [(args.program, make_config(args, strategy=s, depth=k, order=o, optimize=opt),
             args.solver, tuple(args.domain), args.timeout) for s, k, o, opt in plan]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_sweep_row, jobs))
    else:
        results = [_sweep_row(j) for j in jobs]
    by_key = dict(zip(plan, results))
    pure_plain = by_key[("pure", 1, orders[0], False)][0]
    rows = []
    for opt in variants:
        for order in orders:
            same = by_key[("pure", 1, order, opt)][0]
            for k in ks:
                total, sat, unsat, avoided, bugs = by_key[("sse", k, order, opt)]
                rows.append({
                    "k": k, "order": order, "optimize": opt,
                    "total": total, "sat": sat, "unsat": unsat, "avoided": avoided,
                    "pct_vs_pure": round(100.0 * total / pure_plain, 1) if pure_plain else 100.0,
                    "pct_vs_pure_same_opt": round(100.0 * total / same, 1) if same else 100.0,
                    "bugs": bugs,
                })
    return rows


def cmd_sweep(args) -> int:
    try:
        rows = sweep_rows(args)
    except SolverException as exc:
        print(f"solver exception: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if args.csv:
        write_text(args.csv, buf.getvalue())
    if args.json:
        write_text(args.json, json.dumps({"program": args.program, "rows": rows}, indent=2) + "\n")
    if not args.csv and not args.json:
        sys.stdout.write(buf.getvalue())
    else:
        for r in rows:
            print(f"k={r['k']:>2} {r['order']:<11} opt={'on ' if r['optimize'] else 'off'} "
                  f"calls={r['total']:>4} {r['pct_vs_pure']:>6.1f}%")
    return EXIT_OK


def cmd_treesim(args) -> int:
    if args.mode == "replay":
        names = args.names or list(treesim.FIXTURES)
        failed = 0
        for name in names:
            try:
                res, _ = treesim.replay_fixture(name)
                extra = f", {res.avoided} avoided" if res.avoided else ""
                print(f"PASS {name}: {res.invocations} checks ({res.sat} sat, {res.unsat} unsat{extra})")
            except KeyError as exc:
                raise UsageError(str(exc.args[0])) from None
            except treesim.FixtureMismatch as exc:
                failed += 1
                print(f"FAIL {name}: first differing probe #{exc.position}: expected {exc.expected}, got {exc.got}")
        print(f"{len(names) - failed}/{len(names)} fixtures pass")
        return EXIT_FAIL if failed else EXIT_OK

    if args.mode == "random":
        summary = prop2_check(args.trees, args.seed, args.max_height, args.max_k)
        print(f"{summary['comparisons']} comparisons over {args.trees} trees; "
              f"min ratio T^k/T^p = {summary['min_ratio']:.4f} "
              f"(tree {summary['argmin']['tree']}, k={summary['argmin']['k']}, {summary['argmin']['order']})")
        ok = summary["min_ratio"] > 0.5
        print("PASS" if ok else "FAIL", "min ratio > 0.5")
        return EXIT_OK if ok else EXIT_FAIL

    grid = eq1_grid(args.max_n, args.max_k)
    print(f"printed closed form: {grid['formula_matches']}/{grid['cases']} cases agree with simulation")
    for n, k, sim, formula in grid["formula_mismatches"]:
        print(f"  n={n:>2} k={k:>2}: simulated {sim}, closed form {formula}")
    print(f"recurrence solution: {grid['recurrence_matches']}/{grid['cases']} cases agree with simulation")
    ok = grid["formula_matches"] == grid["cases"]
    return EXIT_OK if ok else EXIT_FAIL


PROP2_PROBABILITIES = (0.0, 0.1, 0.25, 0.42)


def prop2_trees(count: int, seed: int, max_height: int = 12):
    rng = random.Random(seed)
    for i in range(count):
        h = rng.randint(1, max_height)
        p = PROP2_PROBABILITIES[i % len(PROP2_PROBABILITIES)]
        yield i, h, p, treesim.gen_random_tree(h, p, rng.getrandbits(64))


def prop2_check(count: int, seed: int, max_height: int = 12, max_k: int = 12) -> dict:
    best = None
    n = 0
    for i, h, p, t in prop2_trees(count, seed, max_height):
        pure = treesim.pure_count(t)
        for k in range(1, max_k + 1):
            for order in (FALSE_FIRST, TRUE_FIRST):
                ratio = treesim.sse_count(t, k, order) / pure
                n += 1
                if best is None or ratio < best[0]:
                    best = (ratio, {"tree": i, "height": h, "p": p, "k": k, "order": order})
    return {"comparisons": n, "min_ratio": best[0], "argmin": best[1]}


def eq1_grid(max_n: int = 12, max_k: int = 12) -> dict:
    mismatches, rec_ok, cases = [], 0, 0
    for n in range(1, max_n + 1):
        tree = treesim.full_tree(n)
        for k in range(1, max_k + 1):
            cases += 1
            sim = treesim.simulate_sse(tree, k).invocations
            formula = treesim.eq1_formula(n, k)
            if sim != formula:
                mismatches.append((n, k, sim, formula))
            rec_ok += sim == treesim.full_tree_sse_count(n, k)
    return {"cases": cases, "formula_matches": cases - len(mismatches),
            "formula_mismatches": mismatches, "recurrence_matches": rec_ok}


def compare_program(p, ks, args, solver):
    """(verdict, message) for pure DFS against every speculative variant."""
    base_cfg = make_config(args, strategy="pure", optimize=False)
    base = leaf_multiset(run(p, base_cfg, solver))
    runs = 0
    for k in ks:
        for order in (FALSE_FIRST, TRUE_FIRST):
            for opt in (False, True):
                cfg = make_config(args, strategy="sse", depth=k, order=order, optimize=opt)
                got = leaf_multiset(run(p, cfg, solver))
                runs += 1
                if got != base:
                    extra = got - base
                    missing = base - got
                    leaf, side = (next(iter(extra)), "extra") if extra else (next(iter(missing)), "missing")
                    kind, pcs = leaf
                    pc = " & ".join(str(c) for c in pcs) or "true"
                    return False, (f"FAIL k={k} order={order} optimize={'on' if opt else 'off'}: "
                                   f"{side} {kind} leaf under {pc}")
    return True, f"PASS {runs} speculative runs match pure DFS ({sum(base.values())} leaves)"


def cmd_compare(args) -> int:
    p = load_program(args.program)
    longest = max(lang.longest_path_branch_count(p, args.loop_bound), 1)
    ks = parse_range(args.k) if args.k else list(range(1, longest + 1))
    if not ks or min(ks) < 1:
        raise UsageError("k values must be >= 1")
    solver = get_solver(args)
    try:
        ok, message = compare_program(p, ks, args, solver)
    except SolverException as exc:
        print(f"solver exception: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(message)
    return EXIT_OK if ok else EXIT_FAIL


# -- argument parsing ---------------------------------------------------------


def _domain(text):
    try:
        lo, hi = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected LO:HI") from None
    if lo > hi:
        raise argparse.ArgumentTypeError("LO must not exceed HI")
    return lo, hi


def _add_engine_flags(sp, with_strategy=True):
    if with_strategy:
        sp.add_argument("--strategy", choices=["pure", "sse", "speculative"], default="sse")
        sp.add_argument("--depth", type=int, default=3, help="max speculation depth k (default 3)")
        sp.add_argument("--order", choices=[FALSE_FIRST, TRUE_FIRST], default=TRUE_FIRST)
        sp.add_argument("--optimize", action=argparse.BooleanOptionalAction, default=True,
                        help="absurdity rule (default on)")
    sp.add_argument("--no-recheck", action="store_true", help="debug: report bugs without a reachability check")
    sp.add_argument("--no-absurdity-anchor", action="store_true",
                    help="sides known feasible by the absurdity rule do not restart the segment")
    sp.add_argument("--loop-bound", type=int, default=4)
    sp.add_argument("--solver", default="builtin", help="builtin or external:<path>")
    sp.add_argument("--timeout", type=float, default=5.0, help="external solver timeout in seconds")
    sp.add_argument("--domain", type=_domain, default=(-64, 63), help="symbol range LO:HI (default -64:63)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="specsym", description="Speculative symbolic execution for a small integer language.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("run", help="explore one program")
    sp.add_argument("program")
    _add_engine_flags(sp)
    sp.add_argument("--json", metavar="OUT", help="write the report as JSON ('-' for stdout)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--baseline", help="'pure' or a JSON report to compute savings against")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="solver calls across speculation depths")
    sp.add_argument("program")
    sp.add_argument("--k", help="depths, e.g. 1-6 or 1,2,4 (default 1..longest path)")
    sp.add_argument("--orders", choices=["both", FALSE_FIRST, TRUE_FIRST], default="both")
    sp.add_argument("--optimize-variants", choices=["both", "on", "off"], default="both")
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--csv", metavar="OUT")
    sp.add_argument("--json", metavar="OUT")
    sp.add_argument("--seed", type=int, default=0)
    _add_engine_flags(sp, with_strategy=False)
    sp.set_defaults(func=cmd_sweep, strategy="sse", depth=1, order=TRUE_FIRST, optimize=False)

    sp = sub.add_parser("treesim", help="abstract tree simulations")
    tsub = sp.add_subparsers(dest="mode", required=True, parser_class=_Parser)
    r = tsub.add_parser("replay", help="replay the recorded example traces")
    r.add_argument("names", nargs="*")
    r = tsub.add_parser("random", help="randomized lower-bound check")
    r.add_argument("--trees", type=int, default=10_000)
    r.add_argument("--seed", type=int, default=7)
    r.add_argument("--max-height", type=int, default=12)
    r.add_argument("--max-k", type=int, default=12)
    r = tsub.add_parser("eq1", help="closed form against simulation on full trees")
    r.add_argument("--max-n", type=int, default=12)
    r.add_argument("--max-k", type=int, default=12)
    sp.set_defaults(func=cmd_treesim)

    sp = sub.add_parser("compare", help="check that speculative runs build the pure execution tree")
    sp.add_argument("program")
    sp.add_argument("--k", help="depths (default 1..longest path)")
    _add_engine_flags(sp, with_strategy=False)
    sp.set_defaults(func=cmd_compare, strategy="sse", depth=1, order=TRUE_FIRST, optimize=False)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"specsym: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

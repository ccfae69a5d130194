"""Sweep speculation depth over every corpus program.

Writes one CSV per program into the output directory and prints, for
each program and order, the best depth with optimization on next to
classic DFS.

    python3 scripts/sweep_corpus.py --out results/sweep
"""

import argparse
import csv
from pathlib import Path

from specsym import lang
from specsym.search import FALSE_FIRST, TRUE_FIRST, SearchConfig, run

ROOT = Path(__file__).resolve().parents[1]
FIELDS = ("k", "order", "optimize", "total", "sat", "unsat", "avoided", "pct_vs_pure")


def sweep(p, loop_bound):
    longest = max(lang.longest_path_branch_count(p, loop_bound), 1)
    rows = []
    for order in (FALSE_FIRST, TRUE_FIRST):
        pure = run(p, SearchConfig("pure", 1, order, optimize=False, loop_bound=loop_bound)).stats.total
        for opt in (False, True):
            for k in range(1, longest + 1):
                s = run(p, SearchConfig("sse", k, order, opt, loop_bound=loop_bound)).stats
                rows.append({
                    "k": k, "order": order, "optimize": opt, "total": s.total, "sat": s.sat,
                    "unsat": s.unsat, "avoided": s.avoided,
                    "pct_vs_pure": round(100.0 * s.total / pure, 1),
                })
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--corpus", type=Path, default=ROOT / "corpus")
    ap.add_argument("--out", type=Path, default=ROOT / "results" / "sweep")
    ap.add_argument("--loop-bound", type=int, default=4)
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    for path in sorted(args.corpus.glob("*.sx")):
        rows = sweep(lang.parse_file(path), args.loop_bound)
        with open(args.out / f"{path.stem}.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=FIELDS)
            writer.writeheader()
            writer.writerows(rows)
        for order in (FALSE_FIRST, TRUE_FIRST):
            best = min((r for r in rows if r["order"] == order and r["optimize"]), key=lambda r: r["total"])
            print(f"{path.stem:<14} {order:<11} best k={best['k']:<2} "
                  f"{best['total']:>4} calls ({best['pct_vs_pure']:.1f}% of classic DFS)")
    print(f"CSV tables in {args.out}")


if __name__ == "__main__":
    main()

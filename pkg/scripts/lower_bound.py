"""Randomized check that speculation never saves more than half the calls.

Generates labeled random trees, counts solver calls for classic DFS and
for speculative DFS at every depth, and reports the smallest ratio seen
per depth.  Every ratio must stay above 0.5.

    python3 scripts/lower_bound.py --trees 10000 --seed 7
"""

import argparse
from collections import defaultdict

from specsym import treesim
from specsym.cli import prop2_trees


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trees", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--max-height", type=int, default=12)
    ap.add_argument("--max-k", type=int, default=12)
    args = ap.parse_args()

    lowest = defaultdict(lambda: (float("inf"), None))
    for i, h, p, t in prop2_trees(args.trees, args.seed, args.max_height):
        pure = treesim.pure_count(t)
        for k in range(1, args.max_k + 1):
            for order in (treesim.FALSE_FIRST, treesim.TRUE_FIRST):
                ratio = treesim.sse_count(t, k, order) / pure
                if ratio < lowest[k][0]:
                    lowest[k] = (ratio, (i, h, p, order))

    print(" k  min ratio  tree  height  p     order")
    for k in sorted(lowest):
        ratio, (i, h, p, order) = lowest[k]
        print(f"{k:>2}  {ratio:.5f}    {i:>5}  {h:>6}  {p:<4}  {order}")
    overall = min(r for r, _ in lowest.values())
    print(f"overall minimum {overall:.5f}: {'PASS' if overall > 0.5 else 'FAIL'}")
    return 0 if overall > 0.5 else 1


if __name__ == "__main__":
    raise SystemExit(main())

"""Full-tree call counts: simulation, the printed closed form, the recurrence.

Prints the n x k grid and marks every cell where the printed closed form
differs from the simulated count.

    python3 scripts/closed_form_grid.py --max-n 12 --max-k 12
"""

import argparse

from specsym import treesim


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-n", type=int, default=12)
    ap.add_argument("--max-k", type=int, default=12)
    args = ap.parse_args()

    ks = range(1, args.max_k + 1)
    print("n\\k " + "".join(f"{k:>8}" for k in ks))
    bad = 0
    for n in range(1, args.max_n + 1):
        sim_row = [treesim.simulate_sse(treesim.full_tree(n), k).invocations for k in ks]
        cells = []
        for k, sim in zip(ks, sim_row):
            assert sim == treesim.full_tree_sse_count(n, k)
            if treesim.eq1_formula(n, k) != sim:
                bad += 1
                cells.append(f"{sim:>7}*")
            else:
                cells.append(f"{sim:>8}")
        print(f"{n:>3} " + "".join(cells))
    cases = args.max_n * args.max_k
    print(f"* printed closed form differs: {bad}/{cases} cells; recurrence matches all {cases}")


if __name__ == "__main__":
    main()

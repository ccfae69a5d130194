"""Regenerate or verify corpus/<name>.expected.json.

    python3 scripts/freeze_corpus.py           # verify, exit 1 on drift
    python3 scripts/freeze_corpus.py --write   # rewrite the sidecars
"""

import argparse
import json
from pathlib import Path

from specsym import lang
from specsym.search import FALSE_FIRST, TRUE_FIRST, SearchConfig, run

ROOT = Path(__file__).resolve().parents[1]
WORKED_EXAMPLES = {"abs_sum", "abs_sum_modified", "dead_division"}
RUNS = {
    "pure": SearchConfig("pure", 1, FALSE_FIRST, optimize=False),
    "pure_optimized": SearchConfig("pure", 1, FALSE_FIRST, optimize=True),
    "sse_k3_false_first": SearchConfig("sse", 3, FALSE_FIRST, optimize=False),
    "sse_k3_true_first": SearchConfig("sse", 3, TRUE_FIRST, optimize=False),
    "sse_k3_false_first_optimized": SearchConfig("sse", 3, FALSE_FIRST, optimize=True),
}


def expectations(path: Path) -> dict:
    p = lang.parse_file(path)
    runs = {}
    for label, cfg in RUNS.items():
        rec = run(p, cfg)
        s = rec.stats
        runs[label] = {
            "config": cfg.to_dict(), "total": s.total, "sat": s.sat, "unsat": s.unsat,
            "avoided": s.avoided, "bugs": sorted(b.message for b in rec.bugs),
        }
    return {
        "source": "worked-example" if path.stem in WORKED_EXAMPLES else "regression",
        "longest_path": lang.longest_path_branch_count(p, 4),
        "runs": runs,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--corpus", type=Path, default=ROOT / "corpus")
    ap.add_argument("--write", action="store_true")
    args = ap.parse_args()

    drift = 0
    for path in sorted(args.corpus.glob("*.sx")):
        text = json.dumps(expectations(path), indent=2) + "\n"
        sidecar = path.with_suffix(".expected.json")
        if args.write:
            sidecar.write_text(text)
            print(f"wrote {sidecar.name}")
        elif not sidecar.exists() or sidecar.read_text() != text:
            drift += 1
            print(f"DRIFT {sidecar.name}")
        else:
            print(f"ok    {sidecar.name}")
    return 1 if drift else 0


if __name__ == "__main__":
    raise SystemExit(main())

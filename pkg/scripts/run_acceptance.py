"""Run every acceptance suite at full size and write one JSON line per suite.

    python scripts/run_acceptance.py [-o results.jsonl] [--only drp conversion ...]
"""

import argparse
import sys
from fractions import Fraction

from searchlab import experiments as ex
from searchlab.report import emit

RUNS = {
    "drp": lambda: ex.drp_suite(trials=200, n=10, seed=1),
    "conversion": lambda: ex.conversion_suite(count=100, n=8, max_depth=5, gamma=Fraction(1, 2), seed=2),
    "closure": lambda: ex.closure_suite(count=50, seed=3),
    "expansion": lambda: ex.expansion_suite(trials=500, seed=4),
    "partition": lambda: ex.partition_suite(pairs=200, seed=5),
    "concentration": lambda: ex.concentration_suite(trials=1_000_000, seed=6),
    "leaf-bounds": lambda: ex.leaf_bound_suite(count=40, seed=7),
    "identity": lambda: ex.identity_suite(count=100, seed=8),
    "tooling": lambda: ex.tooling_suite(count=20, seed=9),
}


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-o", "--out", type=argparse.FileType("w"), default=sys.stdout)
    ap.add_argument("--only", nargs="*", choices=sorted(RUNS), default=sorted(RUNS))
    args = ap.parse_args()
    results = []
    for name in args.only:
        res = RUNS[name]()
        print(f"{name:14s} {'PASS' if res.passed else 'FAIL'}  {res.seconds:7.1f}s", file=sys.stderr)
        results.append(res.as_dict())
    emit(args.out, "run_acceptance", {"suites": args.only}, results)
    return 0 if all(r["pass"] for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())

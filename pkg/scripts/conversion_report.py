"""Convert one random protocol and print its per-edge trace table and shaving summary.

    python scripts/conversion_report.py --n 8 --depth 5 --family xor --gamma 1/2 --seed 2
"""

import argparse
import sys
from fractions import Fraction

from searchlab.conversion import check_fidelity, codim_tail, convert, h_tail, shave
from searchlab.protocol import FAMILIES, RandomProtocolConfig, random_protocol
from searchlab.report import emit


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=8)
    ap.add_argument("--depth", type=int, default=5)
    ap.add_argument("--family", choices=FAMILIES, default="xor")
    ap.add_argument("--gamma", type=Fraction, default=Fraction(1, 2))
    ap.add_argument("--d", type=int, help="shaving parameter (defaults to the depth)")
    ap.add_argument("--seed", type=int, default=2)
    args = ap.parse_args()
    pi = random_protocol(RandomProtocolConfig(args.n, args.depth, args.family, "random", seed=args.seed), m=8)
    tree = convert(pi, args.gamma)
    d = args.depth if args.d is None else args.d
    sh = shave(tree, args.gamma, d)
    rows = [{"check": "edge", "node": v, "parent": c.parent, "codim": c.codim, **c.trace.as_dict()}
            for v, c in enumerate(tree.nodes) if c.trace is not None]
    rows.append({"check": "summary", "nodes": len(tree.nodes), "leaves": len(tree.leaves()),
                 "fidelity": check_fidelity(tree).agree, "max_codim": max(c.codim for c in tree.nodes),
                 "threshold": sh.threshold, "codim_tail": codim_tail(tree, args.gamma, d),
                 "h_tail": h_tail(tree, d)})
    emit(sys.stdout, "conversion_report", vars(args), rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())

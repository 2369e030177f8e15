"""Full-depth GoT and UoT against the exact value of small random SLSR games.

    python3 scripts/full_games.py --instances 25 --out full_games.csv
"""

import argparse
import csv
import sys
from dataclasses import asdict, fields

import numpy as np

from slsgot.harness import FullGameRow, GameSpec, fullgame_comparison


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--instances", type=int, default=25)
    ap.add_argument("--min-n", type=int, default=3)
    ap.add_argument("--max-n", type=int, default=8)
    ap.add_argument("--m", type=int, default=2)
    ap.add_argument("--iterations", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--out", default=None)
    args = ap.parse_args(argv)

    rs = np.random.default_rng(args.seed)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh, lineterminator="\n")
    cols = ["r", "seed"] + [f.name for f in fields(FullGameRow)]
    w.writerow(cols)
    for _ in range(args.instances):
        n = int(rs.integers(args.min_n, args.max_n + 1))
        r = float(rs.uniform(0.2, 0.5))
        seed = int(rs.integers(2**31))
        row = fullgame_comparison(GameSpec(n=n, r=r, m=args.m, seed=seed), args.iterations)
        w.writerow([f"{r:.3f}", seed] + [f"{v:.6g}" if isinstance(v, float) else v for v in asdict(row).values()])
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()

"""Sampler comparison over the measurement-noise grid (Gaussian and mixture targets).

    python3 scripts/fig1.py --out results [--skip-mixture] [--workers N]
"""

import argparse
import time

from smlb.harness.config import from_dict
from smlb.harness.experiments import run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--skip-mixture", action="store_true", help="the k-NN mixture run takes a few minutes")
    args = ap.parse_args()

    names = ["fig1_gaussian"] + ([] if args.skip_mixture else ["fig1_mixture"])
    for name in names:
        t0 = time.perf_counter()
        table, paths = run_experiment(from_dict({"experiment": name, "seed": args.seed}),
                                      out=args.out, workers=args.workers)
        print(f"{name}: {time.perf_counter() - t0:.1f}s -> {', '.join(map(str, paths))}")
        print("  " + " ".join(f"{c:>14s}" for c in table.columns))
        for row in table.rows:
            print("  " + " ".join(f"{v:14.6g}" for v in row))


if __name__ == "__main__":
    main()

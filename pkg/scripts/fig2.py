"""Limiting KL of BO-DDNM against the observation scale and the cross-block correlation.

    python3 scripts/fig2.py --out results
"""

import argparse

import numpy as np

from smlb.harness.config import from_dict
from smlb.harness.experiments import run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    table, _ = run_experiment(from_dict({"experiment": "fig2_y_sweep", "seed": args.seed}), out=args.out)
    s = np.array(table.column("y_scale"))
    kl = np.array(table.column("kl_limit"))
    coef = np.polyfit(s, kl, 2)
    resid = kl - np.polyval(coef, s)
    r2 = 1 - resid @ resid / np.sum((kl - kl.mean()) ** 2)
    print("y_scale sweep:", ", ".join(f"{a:g}:{b:.4g}" for a, b in zip(s, kl)))
    print(f"  quadratic fit {coef[0]:.4g} s^2 + {coef[1]:.3g} s + {coef[2]:.3g}, R^2 = {r2:.6f}")

    table, _ = run_experiment(from_dict({"experiment": "fig2_rho_sweep", "seed": args.seed}), out=args.out)
    print("rho sweep:", ", ".join(f"{a:g}:{b:.4g}" for a, b in zip(table.column("rho"), table.column("kl_limit"))))


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Error-rate sweep: median recovery error vs sample count, with a log-log fit.

Noisy linear observations on a sparse signal under an l1-ball constraint show
a slope near -1/2; adding a fixed-budget adversarial perturbation floors the
error at the budget instead.
"""

import argparse
import json

from siren.harness import run_config


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=128)
    parser.add_argument("--s", type=int, default=4)
    parser.add_argument("--noise-std", type=float, default=0.3)
    parser.add_argument("--grid", type=int, nargs="+",
                        default=[100, 200, 400, 800, 1600, 3200])
    parser.add_argument("--trials", type=int, default=50)
    parser.add_argument("--seed", type=int, default=606)
    parser.add_argument("--adversarial-eps", type=float, default=0.0,
                        help="add a bounded-L2 corruption of this RMS budget")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", help="directory for CSV/JSON artifacts")
    parser.add_argument("--plot", action="store_true", help="also write chart.svg")
    args = parser.parse_args()

    trial = {
        "n": args.n, "m": args.grid[0],
        "set": {"kind": "l1ball", "radius": "auto"},
        "loss": {"kind": "square"},
        "model": {"kind": "linear", "gain": 1.0, "noise_std": args.noise_std},
        "x0": {"kind": "sparse", "s": args.s},
    }
    if args.adversarial_eps > 0:
        trial["corruption"] = {"kind": "l2", "eps": args.adversarial_eps}
    cfg = {
        "kind": "sweep-m", "trial": trial, "grid": args.grid,
        "trials": args.trials, "seed": args.seed,
        "out": args.out, "plot": args.plot,
    }
    res = run_config(cfg, workers=args.workers)
    print(json.dumps({
        "per_point": [{"m": p["grid_value"], "median_err": p["median_err_l2"]}
                      for p in res.per_point],
        "slope": res.slope,
        "slope_stderr": res.slope_stderr,
    }, indent=2))


if __name__ == "__main__":
    main()

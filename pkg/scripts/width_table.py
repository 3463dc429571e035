#!/usr/bin/env python3
"""Effective-dimension table for the stock signal sets.

Subspaces report their algebraic dimension, scaled l1 balls at sparse
boundary points report s log(2n/s)-like values, and a Euclidean ball reports
the ambient dimension; all estimated by Monte Carlo local mean widths.
"""

import argparse
import math

import numpy as np

from siren.analysis import effective_dimension, local_mean_width_mc
from siren.core import RngStream
from siren.signal_sets import L1Ball, L2Ball, Subspace


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=128)
    parser.add_argument("--t", type=float, default=0.2)
    parser.add_argument("--samples", type=int, default=4000)
    parser.add_argument("--seed", type=int, default=3)
    args = parser.parse_args()

    n, t = args.n, args.t
    rows = []
    for d in (2, 8, 24):
        sub = Subspace(np.eye(n)[:, :d])
        rows.append((f"subspace dim {d}", sub, np.zeros(n), f"~{d}"))
    for s in (1, 4, 16):
        x0 = np.zeros(n)
        x0[:s] = 1.0 / math.sqrt(s)
        k = L1Ball(float(np.linalg.norm(x0, 1)), n)
        rows.append((f"l1 ball at {s}-sparse point", k, x0,
                     f"~O({s} log(2n/{s})) = O({s * math.log(2 * n / s):.0f})"))
    rows.append(("euclidean ball", L2Ball(np.zeros(n), 1.0), np.zeros(n), f"~{n}"))

    print(f"{'set':<28} {'d_t':>8} {'std err':>9}   expected scale")
    for i, (name, set_, center, expect) in enumerate(rows):
        w = local_mean_width_mc(set_, center, t, args.samples, RngStream(args.seed, (i,)))
        dim = effective_dimension(w)
        print(f"{name:<28} {dim.value:>8.2f} {dim.std_error:>9.2f}   {expect}")


if __name__ == "__main__":
    main()

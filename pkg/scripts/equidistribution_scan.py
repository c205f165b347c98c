#!/usr/bin/env python3
"""Boundary averages of g(lambda y) over a lambda grid: Diophantine vs rational.

Prints a table and writes gnuplot-ready columns to out/equidistribution.dat.
"""

import argparse
import os

import numpy as np

from polyhom import geometry, oscillatory, periodic


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out")
    ap.add_argument("--decades", type=int, default=4)
    args = ap.parse_args()

    g = periodic.from_coefficients(2, {(1, 0): 0.5, (-1, 0): 0.5,
                                       (1, 1): -0.5j, (-1, -1): 0.5j})
    golden = geometry.golden_square()
    axis = geometry.unit_square()
    lams = np.logspace(0.5, 0.5 + args.decades, 3 * args.decades + 1)

    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "equidistribution.dat")
    print(f"{'lambda':>12} {'|avg| golden':>14} {'|avg| axis':>12}")
    with open(path, "w") as f:
        f.write("# lambda abs_golden abs_axis\n")
        for lam in lams:
            bg = abs(oscillatory.boundary_average(golden, g, float(lam)))
            ba = abs(oscillatory.boundary_average(axis, g, float(lam)))
            print(f"{lam:12.2f} {bg:14.3e} {ba:12.3e}")
            f.write(f"{float(lam)!r} {bg!r} {ba!r}\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()

"""Radial quadrature error E(0, p0, p0; n_xi) against the number of Gauss-Legendre nodes.

Writes a CSV with columns R, n_xi, ratio (n_xi / cR), error.
"""
import argparse
import csv
import sys

import numpy as np

from ffbspca.basis import build_basis
from ffbspca.specfun import bessel_j, gauss_legendre


def quadrature_error(c, R, n_xi):
    spec = build_basis(c, R)
    z = spec.zeros[0][spec.p[0] - 1]
    rule = gauss_legendre(n_xi, 0.0, c)
    approx = np.dot(rule.weights, bessel_j(0, z * rule.nodes / c) ** 2 * rule.nodes)
    return abs(approx - c * c / 2 * bessel_j(1, z) ** 2)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--c", type=float, default=0.5)
    ap.add_argument("--radii", default="15,30,60")
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh)
    w.writerow(["R", "n_xi", "ratio", "error"])
    for R in (int(v) for v in args.radii.split(",")):
        cr = args.c * R
        for n in range(max(2, int(cr)), int(8 * cr) + 1):
            w.writerow([R, n, f"{n / cr:.3f}", f"{quadrature_error(args.c, R, n):.3e}"])
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()

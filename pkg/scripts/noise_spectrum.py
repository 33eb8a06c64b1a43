"""Eigenvalues of the steerable covariance of white noise, as a histogram of lambda / sigma^2."""
import argparse

import numpy as np

from ffbspca.basis import build_basis
from ffbspca.fbcoeff import expand
from ffbspca.simulate import noise_blocks
from ffbspca.spca import CovarianceAccumulator, block_eig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--L", type=int, default=121)
    ap.add_argument("--c", type=float, default=1 / 3)
    ap.add_argument("--R", type=int, default=60)
    ap.add_argument("--sigma", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    spec = build_basis(args.c, args.R)
    acc = CovarianceAccumulator(spec)
    for blk in noise_blocks(args.n, args.L, args.sigma, args.seed, block=500):
        acc.add(expand(blk, spec))
    pairs = block_eig(acc.result())
    lam = np.concatenate([np.repeat(l, 1 if k == 0 else 2) for k, (l, _) in enumerate(pairs)]) / args.sigma**2
    hist, edges = np.histogram(lam, bins=np.linspace(0, 2, 21))
    for h, lo in zip(hist, edges[:-1]):
        print(f"{lo:4.1f}-{lo + 0.1:4.1f} {h:6d} {'#' * int(60 * h / hist.max())}")
    inside = np.mean((lam >= 0.8) & (lam <= 1.2))
    print(f"{lam.size} eigenvalues, {100 * inside:.2f}% in [0.8, 1.2]")


if __name__ == "__main__":
    main()

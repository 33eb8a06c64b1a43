"""Timing harness for the expansion and steerable PCA stages."""
import time

import numpy as np

from .basis import build_basis, radial_table
from .fbcoeff import FBCoeffs, _coeffs_from_angular, _Weights, angular_transform, expand
from .polarft import DEFAULT_EPS, make_polar_grid, polar_ft_nufft
from .simulate import gen_noise_stack, noise_blocks
from .spca import CovarianceAccumulator, block_eig

__all__ = ["bench_sizes", "bench_counts", "loglog_slope"]


def loglog_slope(x, t):
    """Least-squares slope of log t against log x."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(t, float)), 1)[0])


def _setup(L, c):
    R = L // 2
    spec = build_basis(c, R)
    grid = make_polar_grid(c, R)
    table = radial_table(spec, grid.xi, grid.weights)
    return spec, grid, _Weights(spec, grid, table)


def bench_sizes(sizes=(64, 128, 256), n=64, repetitions=3, c=0.5, eps=DEFAULT_EPS, seed=0):
    """Per-stage wall times for expanding n noise images at each L (R = L/2).

    Each stage time is the minimum over ``repetitions``. Basis and table
    construction is reported separately as ``setup``.
    """
    rows = []
    for L in sizes:
        t0 = time.perf_counter()
        spec, grid, weights = _setup(L, c)
        setup = time.perf_counter() - t0
        images = gen_noise_stack(n, L, 1.0, seed).data
        polar_ft_nufft(images[:1], grid, eps)  # plan and compile outside the timing
        best = None
        for _ in range(repetitions):
            t0 = time.perf_counter()
            samples = polar_ft_nufft(images, grid, eps)
            t1 = time.perf_counter()
            ghat = angular_transform(samples, spec.k_max)
            t2 = time.perf_counter()
            coeffs = _coeffs_from_angular(ghat, spec, weights, L)
            t3 = time.perf_counter()
            stage = {"polar_ft": t1 - t0, "angular_fft": t2 - t1, "radial_quadrature": t3 - t2}
            if best is None or sum(stage.values()) < sum(best.values()):
                best = stage
        t0 = time.perf_counter()
        cov = CovarianceAccumulator(spec).add(FBCoeffs(spec, coeffs, L)).result()
        t1 = time.perf_counter()
        block_eig(cov)
        t2 = time.perf_counter()
        expansion = sum(best.values())
        rows.append(
            {
                "L": L,
                "n": n,
                "setup": setup,
                **best,
                "expansion": expansion,
                "polar_ft_fraction": best["polar_ft"] / expansion,
                "covariance": t1 - t0,
                "eig": t2 - t1,
            }
        )
    return {"rows": rows, "slope_expansion_vs_L": loglog_slope(sizes, [r["expansion"] for r in rows])}


def bench_counts(L=128, counts=(1000, 4000, 16000), c=0.5, eps=DEFAULT_EPS, block=512, seed=0):
    """Expansion wall time against the number of images at fixed L.

    Noise images are generated in blocks and only the expansion is timed, so
    memory stays at O(block * L^2).
    """
    spec, grid, weights = _setup(L, c)
    polar_ft_nufft(np.zeros((1, L, L)), grid, eps)
    rows = []
    for n in counts:
        elapsed = 0.0
        for blk in noise_blocks(n, L, 1.0, seed, block):
            t0 = time.perf_counter()
            expand(blk, spec, grid=grid, table=weights.table, eps=eps, block_size=block)
            elapsed += time.perf_counter() - t0
        rows.append({"L": L, "n": n, "expansion": elapsed})
    return {"rows": rows, "slope_expansion_vs_n": loglog_slope(counts, [r["expansion"] for r in rows])}

"""Command line interface: ``ffbspca <stage> [options]``.

Exit codes: 0 on success, 2 on configuration errors, 3 on malformed input files.
"""
import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .basis import build_basis, radial_table
from .bench import bench_counts, bench_sizes
from .config import RunConfig
from .denoise import (
    denoise_stack,
    estimate_bandlimit,
    estimate_noise_variance,
    estimate_support,
)
from .errors import ConfigurationError, EstimationError, FormatError
from .fbcoeff import expand, reflect_coeffs, rotate_coeffs
from .io import (
    provenance,
    read_fbc,
    read_mrc,
    write_basis,
    write_fbc,
    write_metrics_csv,
    write_mrc,
    write_report,
    write_steerable_basis,
)
from .polarft import make_polar_grid
from .simulate import CtfParams, apply_ctf_envelope, apply_shifts, gen_bandlimited_stack, gen_noise_stack
from .spca import steerable_pca
from .stack import ImageStack


def _ints(text):
    return [int(v) for v in text.split(",") if v]


def _config(args):
    return RunConfig(
        c=getattr(args, "c", None),
        R=getattr(args, "R", None),
        eps=getattr(args, "eps", 1e-10),
        shrinkage=getattr(args, "mode", "spiked"),
        fraction=getattr(args, "fraction", 0.999),
        block_size=getattr(args, "block_size", 1024),
        seed=getattr(args, "seed", 0),
        threads=getattr(args, "threads", None),
    )


def cmd_simulate(args):
    cfg = _config(args)
    if args.noise_only:
        clean = ImageStack(np.zeros((args.n, args.L, args.L)))
    else:
        R0 = args.phantom_R if args.phantom_R is not None else int(round(0.375 * args.L))
        spec = build_basis(args.phantom_c, R0)
        clean, _ = gen_bandlimited_stack(spec, args.n, args.L, n_classes=args.classes, seed=cfg.seed)
        if args.ctf:
            clean = apply_ctf_envelope(clean, CtfParams())
        if args.max_shift:
            clean, _ = apply_shifts(clean, args.max_shift, seed=cfg.seed)
    if args.sigma is not None:
        sigma = args.sigma
    elif args.noise_only:
        sigma = 1.0
    else:
        sigma = float(np.sqrt(clean.data.var() / args.snr))
    noise = gen_noise_stack(args.n, args.L, sigma, seed=cfg.seed + 1)
    write_mrc(ImageStack(clean.data + noise.data), args.out)
    if args.clean_out:
        write_mrc(clean, args.clean_out)
    print(json.dumps({"n": args.n, "L": args.L, "sigma": sigma, "out": args.out}))


def cmd_estimate(args):
    cfg = _config(args)
    stack = read_mrc(args.input)
    sigma2 = estimate_noise_variance(stack)
    R = estimate_support(stack, sigma2, cfg.fraction)
    c = estimate_bandlimit(stack, sigma2, cfg.fraction)
    report = {"sigma2": sigma2, "R": R, "c": c, "fraction": cfg.fraction}
    _emit(report, args.out, cfg)


def _resolve_cR(cfg, stack):
    c, R = cfg.c, cfg.R
    if c is None or R is None:
        sigma2 = estimate_noise_variance(stack)
        if R is None:
            R = estimate_support(stack, sigma2, cfg.fraction)
        if c is None:
            c = estimate_bandlimit(stack, sigma2, cfg.fraction)
    return float(c), int(R)


def cmd_expand(args):
    cfg = _config(args)
    stack = read_mrc(args.input)
    c, R = _resolve_cR(cfg, stack)
    spec = build_basis(c, R)
    coeffs = expand(stack, spec, method=args.method, eps=cfg.eps, block_size=cfg.block_size, workers=cfg.workers)
    write_fbc(coeffs, args.out)
    if args.basis_out:
        write_basis(spec, args.basis_out)
    print(json.dumps({"c": c, "R": R, "n": coeffs.n, "n_coeffs": spec.n_coeffs, "out": args.out}))


def cmd_spca(args):
    cfg = _config(args)
    coeffs = read_fbc(args.input)
    grid = make_polar_grid(coeffs.spec.c, coeffs.spec.R)
    table = radial_table(coeffs.spec, grid.xi, grid.weights)
    basis = steerable_pca(coeffs, table=table)
    write_steerable_basis(basis, args.out, cfg.to_dict())
    print(json.dumps({"out": args.out + ".json", "k_max": basis.k_max}))


def cmd_denoise(args):
    cfg = _config(args)
    stack = read_mrc(args.input)
    clean = read_mrc(args.clean) if args.clean else None
    out, report = denoise_stack(
        stack,
        c=cfg.c,
        R=cfg.R,
        sigma2=args.sigma2,
        mode=cfg.shrinkage,
        fraction=cfg.fraction,
        eps=cfg.eps,
        block_size=cfg.block_size,
        clean=clean,
        metric_R=args.metric_R,
    )
    write_mrc(out, args.out)
    if args.report:
        write_report(report.to_dict(), args.report, cfg.to_dict())
    if clean is not None and args.metrics:
        write_metrics_csv(report.mse, report.psnr, args.metrics, cfg.to_dict())
    print(json.dumps({"out": args.out, "total_selected": report.total_selected, "R": report.R, "c": report.c}))


def cmd_steer(args):
    coeffs = read_fbc(args.input)
    if args.reflect:
        coeffs = reflect_coeffs(coeffs, args.alpha)
    else:
        coeffs = rotate_coeffs(coeffs, args.alpha)
    write_fbc(coeffs, args.out)


def cmd_bench(args):
    cfg = _config(args)
    result = {"sizes": bench_sizes(_ints(args.sizes), n=args.n, repetitions=args.repetitions, eps=cfg.eps)}
    if args.counts:
        result["counts"] = bench_counts(L=args.count_L, counts=_ints(args.counts), eps=cfg.eps)
    prefix = Path(args.out)
    write_report(result, str(prefix) + ".json", cfg.to_dict())
    lines = ["L,n,setup,polar_ft,angular_fft,radial_quadrature,expansion,covariance,eig"]
    for r in result["sizes"]["rows"]:
        lines.append(",".join(repr(r[k]) for k in lines[0].split(",")))
    Path(str(prefix) + ".csv").write_text("\n".join(lines) + "\n")
    print(json.dumps({"slope_expansion_vs_L": result["sizes"]["slope_expansion_vs_L"]}))


def _emit(report, out, cfg):
    if out:
        write_report(report, out, cfg.to_dict())
    else:
        body = dict(report)
        body["provenance"] = provenance(cfg.to_dict())
        print(json.dumps(body))


def build_parser():
    parser = argparse.ArgumentParser(prog="ffbspca", description="Fast steerable PCA for image stacks.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, cR=True):
        if cR:
            p.add_argument("--c", type=float, help="band limit in cycles/pixel (estimated if omitted)")
            p.add_argument("--R", type=int, help="support radius in pixels (estimated if omitted)")
        p.add_argument("--eps", type=float, default=1e-10, help="NUFFT accuracy")
        p.add_argument("--fraction", type=float, default=0.999, help="variance fraction for R and c estimates")
        p.add_argument("--block-size", type=int, default=1024)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int)

    p = sub.add_parser("simulate", help="write a noisy phantom or pure-noise stack")
    common(p, cR=False)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--phantom-c", type=float, default=0.25)
    p.add_argument("--phantom-R", type=int, help="phantom support radius (default 3L/8)")
    p.add_argument("--classes", type=int, default=40)
    p.add_argument("--snr", type=float, default=0.1)
    p.add_argument("--sigma", type=float, help="noise level (overrides --snr)")
    p.add_argument("--noise-only", action="store_true")
    p.add_argument("--ctf", action="store_true", help="filter phantoms by the default CTF envelope")
    p.add_argument("--max-shift", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--clean-out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate-params", help="estimate noise variance, support radius and band limit")
    common(p, cR=False)
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("expand", help="Fourier-Bessel coefficients of an MRC stack")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=("nufft", "direct"), default="nufft")
    p.add_argument("--out", required=True)
    p.add_argument("--basis-out")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("spca", help="steerable PCA of an FBC1 coefficient file")
    common(p, cR=False)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True, help="output prefix for .json and .bin")
    p.set_defaults(func=cmd_spca)

    p = sub.add_parser("denoise", help="denoise an MRC stack")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--mode", choices=("spiked", "soft"), default="spiked")
    p.add_argument("--clean")
    p.add_argument("--metric-R", type=float)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--metrics")
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("steer", help="rotate or reflect coefficients")
    p.add_argument("--input", required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--reflect", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_steer)

    p = sub.add_parser("bench", help="time the expansion against L and n")
    common(p, cR=False)
    p.add_argument("--sizes", default="64,128,256")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--counts", default="", help="image counts for the linearity sweep, e.g. 1000,4000")
    p.add_argument("--count-L", type=int, default=128)
    p.add_argument("--out", required=True, help="output prefix for .json and .csv")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ConfigurationError, EstimationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Expansion timings against image size L and image count n.

Prints the per-stage table and the log-log slopes, and writes a JSON report.
"""
import argparse
import json

from ffbspca.bench import bench_counts, bench_sizes


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="64,128,256")
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--counts", default="1000,4000,16000")
    ap.add_argument("--count-L", type=int, default=128)
    ap.add_argument("--out", default="bench.json")
    args = ap.parse_args(argv)
    sizes = bench_sizes([int(v) for v in args.sizes.split(",")], n=args.n)
    print(f"{'L':>5} {'setup':>8} {'polar':>8} {'angular':>8} {'radial':>8} {'per image':>10}")
    for r in sizes["rows"]:
        print(
            f"{r['L']:>5} {r['setup']:8.3f} {r['polar_ft']:8.3f} {r['angular_fft']:8.3f} "
            f"{r['radial_quadrature']:8.3f} {1e3 * r['expansion'] / r['n']:8.2f}ms"
        )
    print(f"slope vs L: {sizes['slope_expansion_vs_L']:.2f}")
    result = {"sizes": sizes}
    if args.counts:
        counts = bench_counts(L=args.count_L, counts=[int(v) for v in args.counts.split(",")])
        for r in counts["rows"]:
            print(f"n={r['n']:>6}  {r['expansion']:.2f} s")
        print(f"slope vs n: {counts['slope_expansion_vs_n']:.3f}")
        result["counts"] = counts
    with open(args.out, "w") as fh:
        json.dump(result, fh, indent=1)


if __name__ == "__main__":
    main()

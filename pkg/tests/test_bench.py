import numpy as np
import pytest

from ffbspca.bench import bench_counts, bench_sizes, loglog_slope


def test_loglog_slope():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    assert loglog_slope(x, 3 * x**2) == pytest.approx(2.0)
    assert loglog_slope(x, x**-1) == pytest.approx(-1.0)


def test_bench_rows_have_stage_times():
    out = bench_sizes((16, 32), n=4, repetitions=1)
    for row in out["rows"]:
        for key in ("setup", "polar_ft", "angular_fft", "radial_quadrature", "expansion", "covariance", "eig"):
            assert row[key] >= 0
        assert row["expansion"] == pytest.approx(row["polar_ft"] + row["angular_fft"] + row["radial_quadrature"])
    assert np.isfinite(out["slope_expansion_vs_L"])
    counts = bench_counts(L=16, counts=(4, 8), block=3)
    assert [r["n"] for r in counts["rows"]] == [4, 8]

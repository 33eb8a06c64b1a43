import json

import numpy as np
import pytest

from ffbspca.cli import main
from ffbspca.io import read_fbc, read_metrics_csv, read_mrc, read_steerable_basis


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    rc = main(
        ["simulate", "--n", "300", "--L", "33", "--phantom-R", "12", "--classes", "5", "--snr", "0.5",
         "--out", str(d / "noisy.mrc"), "--clean-out", str(d / "clean.mrc")]
    )
    assert rc == 0
    return d


def test_simulate_writes_stacks(workdir):
    noisy, clean = read_mrc(workdir / "noisy.mrc"), read_mrc(workdir / "clean.mrc")
    assert noisy.data.shape == clean.data.shape == (300, 33, 33)
    ratio = clean.data.var() / (noisy.data - clean.data).var()
    assert ratio == pytest.approx(0.5, rel=0.05)


def test_estimate_params(workdir, capsys):
    assert main(["estimate-params", "--input", str(workdir / "noisy.mrc")]) == 0
    out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert {"sigma2", "R", "c", "provenance"} <= out.keys()
    assert 6 <= out["R"] <= 16


def test_expand_spca_steer(workdir, capsys):
    fbc = workdir / "a.fbc"
    assert main(["expand", "--input", str(workdir / "noisy.mrc"), "--c", "0.25", "--R", "12",
                 "--out", str(fbc), "--basis-out", str(workdir / "basis.json")]) == 0
    coeffs = read_fbc(fbc)
    assert coeffs.n == 300 and coeffs.spec.c == 0.25
    assert main(["spca", "--input", str(fbc), "--out", str(workdir / "sb")]) == 0
    basis = read_steerable_basis(workdir / "sb")
    assert basis.n == 300 and basis.radial is not None
    assert main(["steer", "--input", str(fbc), "--alpha", "0", "--out", str(workdir / "b.fbc")]) == 0
    assert (workdir / "b.fbc").read_bytes() == fbc.read_bytes()
    assert main(["steer", "--input", str(fbc), "--alpha", "0.3", "--reflect", "--out", str(workdir / "c.fbc")]) == 0
    moved = read_fbc(workdir / "c.fbc")
    assert np.allclose(np.abs(moved.values), np.abs(coeffs.values))


def test_denoise_with_metrics(workdir):
    rc = main(["denoise", "--input", str(workdir / "noisy.mrc"), "--clean", str(workdir / "clean.mrc"),
               "--out", str(workdir / "den.mrc"), "--report", str(workdir / "rep.json"),
               "--metrics", str(workdir / "m.csv")])
    assert rc == 0
    rep = json.loads((workdir / "rep.json").read_text())
    assert rep["total_selected"] > 0 and "provenance" in rep
    mse, psnr = read_metrics_csv(workdir / "m.csv")
    assert mse.size == 300 and np.all(np.isfinite(psnr))
    assert read_mrc(workdir / "den.mrc").data.shape == (300, 33, 33)


def test_configuration_error_exit_code(workdir, capsys):
    assert main(["expand", "--input", str(workdir / "noisy.mrc"), "--c", "0.9", "--R", "12",
                 "--out", str(workdir / "x.fbc")]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_pure_noise_estimation_exit_code(tmp_path):
    assert main(["simulate", "--n", "100", "--L", "32", "--noise-only", "--out", str(tmp_path / "n.mrc")]) == 0
    assert main(["estimate-params", "--input", str(tmp_path / "n.mrc")]) == 2


def test_format_error_exit_code(workdir, tmp_path, capsys):
    bad = tmp_path / "bad.mrc"
    bad.write_bytes((workdir / "noisy.mrc").read_bytes()[:2000])
    assert main(["denoise", "--input", str(bad), "--out", str(tmp_path / "o.mrc")]) == 3
    assert "format error" in capsys.readouterr().err
    junk = tmp_path / "bad.fbc"
    junk.write_bytes(b"nope")
    assert main(["spca", "--input", str(junk), "--out", str(tmp_path / "s")]) == 3


def test_bench_small(tmp_path, capsys):
    rc = main(["bench", "--sizes", "16,24", "--n", "4", "--repetitions", "1", "--counts", "8,16",
               "--count-L", "16", "--out", str(tmp_path / "b")])
    assert rc == 0
    body = json.loads((tmp_path / "b.json").read_text())
    assert len(body["sizes"]["rows"]) == 2 and len(body["counts"]["rows"]) == 2
    assert (tmp_path / "b.csv").read_text().startswith("L,n,setup")

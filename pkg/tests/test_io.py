import json
import struct

import numpy as np
import pytest

from ffbspca.basis import build_basis
from ffbspca.config import RunConfig
from ffbspca.errors import ConfigurationError, FormatError
from ffbspca.fbcoeff import FBCoeffs
from ffbspca.io import (
    config_hash,
    read_basis,
    read_fbc,
    read_metrics_csv,
    read_mrc,
    read_steerable_basis,
    write_basis,
    write_fbc,
    write_metrics_csv,
    write_mrc,
    write_report,
    write_steerable_basis,
)
from ffbspca.spca import steerable_pca
from ffbspca.stack import ImageStack, centered_indices


def test_mrc_round_trip(tmp_path, rng):
    imgs = rng.standard_normal((3, 10, 10)).astype(np.float32).astype(float)
    imgs[0, 1, 2] = 5.0
    path = tmp_path / "a.mrc"
    write_mrc(ImageStack(imgs, 1.5), path)
    back = read_mrc(path)
    assert np.array_equal(back.data, imgs) and back.pixel_size == pytest.approx(1.5)
    raw = path.read_bytes()
    assert struct.unpack_from("<4i", raw, 0) == (10, 10, 3, 2)
    assert raw[208:212] == b"MAP "
    # x is the fastest axis on disk: pixel (x=1, y=2) of image 0 sits at row y=2, column x=1
    on_disk = np.frombuffer(raw, "<f4", offset=1024).reshape(3, 10, 10)
    assert on_disk[0, 2, 1] == 5.0


def test_mrc_skips_extended_header(tmp_path):
    imgs = np.arange(2 * 4 * 4, dtype=float).reshape(2, 4, 4)
    path = tmp_path / "b.mrc"
    write_mrc(imgs, path)
    raw = bytearray(path.read_bytes())
    struct.pack_into("<i", raw, 92, 8)
    raw[1024:1024] = b"\0" * 8
    path.write_bytes(bytes(raw))
    assert np.array_equal(read_mrc(path).data, imgs)


@pytest.mark.parametrize(
    "mutate,fragment",
    [
        (lambda r: r[:100], "shorter"),
        (lambda r: r[:-4], "truncated"),
        (lambda r: r[:208] + b"XXXX" + r[212:], "offset 208"),
        (lambda r: r[:12] + struct.pack("<i", 1) + r[16:], "mode 1"),
        (lambda r: r[:4] + struct.pack("<i", 5) + r[8:], "expected square"),
        (lambda r: r[:212] + b"\x11\x11\x00\x00" + r[216:], "big-endian"),
    ],
)
def test_mrc_malformed(tmp_path, mutate, fragment):
    path = tmp_path / "c.mrc"
    write_mrc(np.zeros((2, 4, 4)), path)
    path.write_bytes(mutate(path.read_bytes()))
    with pytest.raises(FormatError, match=fragment):
        read_mrc(path)


def test_mrc_non_finite(tmp_path):
    path = tmp_path / "d.mrc"
    write_mrc(np.zeros((1, 4, 4)), path)
    raw = bytearray(path.read_bytes())
    struct.pack_into("<f", raw, 1024, float("nan"))
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        read_mrc(path)


def test_fbc_round_trip_is_exact(tmp_path, small_spec, rng):
    v = rng.standard_normal((4, small_spec.n_coeffs)) + 1j * rng.standard_normal((4, small_spec.n_coeffs))
    v[:, : small_spec.p[0]] = v[:, : small_spec.p[0]].real
    c = FBCoeffs(small_spec, v, 17)
    path = tmp_path / "a.fbc"
    write_fbc(c, path)
    back = read_fbc(path)
    assert back.L == 17 and back.spec == small_spec
    assert np.array_equal(back.values, v)
    raw = path.read_bytes()
    assert raw[:4] == b"FBC1"
    k_max = small_spec.k_max
    width = small_spec.p[0] + 2 * small_spec.p[1:].sum()
    assert len(raw) == 4 + 28 + 4 * (k_max + 1) + 8 * width * 4


@pytest.mark.parametrize(
    "mutate,fragment",
    [
        (lambda r: b"FBC2" + r[4:], "magic"),
        (lambda r: r[:-8], "expected"),
        (lambda r: r[:10], "too short"),
        (lambda r: r[:4] + struct.pack("<I", 9) + r[8:], "version"),
    ],
)
def test_fbc_malformed(tmp_path, small_spec, mutate, fragment):
    path = tmp_path / "b.fbc"
    write_fbc(FBCoeffs(small_spec, np.zeros((2, small_spec.n_coeffs)), 17), path)
    path.write_bytes(mutate(path.read_bytes()))
    with pytest.raises(FormatError, match=fragment):
        read_fbc(path)


def test_fbc_p_table_mismatch(tmp_path, small_spec):
    path = tmp_path / "c.fbc"
    write_fbc(FBCoeffs(small_spec, np.zeros((1, small_spec.n_coeffs)), 17), path)
    raw = bytearray(path.read_bytes())
    struct.pack_into("<I", raw, 32, small_spec.p[0] + 1)
    struct.pack_into("<I", raw, 32 + 4, small_spec.p[1] - 1)
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        read_fbc(path)


def test_basis_file_round_trip(tmp_path, small_spec):
    path = tmp_path / "basis.json"
    write_basis(small_spec, path)
    assert read_basis(path) == small_spec
    path.write_text("{not json")
    with pytest.raises(FormatError):
        read_basis(path)


def test_steerable_basis_round_trip(tmp_path, small_spec, rng):
    from ffbspca.basis import radial_table
    from ffbspca.polarft import make_polar_grid

    v = rng.standard_normal((20, small_spec.n_coeffs)) + 1j * rng.standard_normal((20, small_spec.n_coeffs))
    grid = make_polar_grid(small_spec.c, small_spec.R)
    basis = steerable_pca(FBCoeffs(small_spec, v, 17), table=radial_table(small_spec, grid.xi, grid.weights))
    write_steerable_basis(basis, tmp_path / "sb", {"seed": 1})
    back = read_steerable_basis(tmp_path / "sb")
    header = json.loads((tmp_path / "sb.json").read_text())
    assert header["provenance"]["config_hash"] == config_hash({"seed": 1})
    assert back.n == 20 and np.array_equal(back.mean, basis.mean) and np.array_equal(back.xi, basis.xi)
    for a, b in zip(back.eigvecs, basis.eigvecs):
        assert np.array_equal(a, b)
    for a, b in zip(back.radial, basis.radial):
        assert np.array_equal(a, b)
    for a, b in zip(back.eigvals, basis.eigvals):
        assert np.array_equal(a, b)
    (tmp_path / "sb.bin").write_bytes((tmp_path / "sb.bin").read_bytes()[:-8])
    with pytest.raises(FormatError):
        read_steerable_basis(tmp_path / "sb")


def test_reports_and_metrics(tmp_path):
    write_report({"psnr": float("inf"), "x": np.float64(2.0)}, tmp_path / "r.json", {"c": 0.5})
    body = json.loads((tmp_path / "r.json").read_text())
    assert body["psnr"] == 999.0 and body["x"] == 2.0 and "config_hash" in body["provenance"]
    write_metrics_csv([0.5, 0.0], [3.0, float("inf")], tmp_path / "m.csv", {"c": 0.5})
    text = (tmp_path / "m.csv").read_text()
    assert text.startswith("# provenance")
    mse, psnr = read_metrics_csv(tmp_path / "m.csv")
    assert mse.tolist() == [0.5, 0.0] and psnr.tolist() == [3.0, 999.0]


def test_config_hash_is_canonical():
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


@pytest.mark.parametrize(
    "kw",
    [dict(c=0.6), dict(c=0.0), dict(R=1), dict(R=2.5), dict(eps=1e-3), dict(shrinkage="x"), dict(fraction=0),
     dict(block_size=0), dict(threads=0)],
)
def test_run_config_validation(kw):
    with pytest.raises(ConfigurationError):
        RunConfig(**kw)


def test_run_config_defaults():
    cfg = RunConfig(threads=3)
    assert cfg.workers == 3 and cfg.to_dict()["eps"] == 1e-10


def test_image_stack_validation():
    with pytest.raises(ValueError):
        ImageStack(np.zeros((2, 3, 4)))
    with pytest.raises(ValueError):
        ImageStack(np.full((1, 2, 2), np.nan))
    s = ImageStack(np.zeros((4, 4)))
    assert s.n == 1 and s.L == 4 and len(s[0:1]) == 1
    assert centered_indices(4).tolist() == [-2, -1, 0, 1]
    assert centered_indices(5).tolist() == [-2, -1, 0, 1, 2]

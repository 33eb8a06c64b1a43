"""File formats: MRC2014 image stacks, FBC1 coefficient files, basis and report files.

All multi-byte values are little-endian.
"""
import csv
import hashlib
import io as _io
import json
import math
import struct
from pathlib import Path

import numpy as np

from . import __version__
from .basis import BasisSpec, build_basis
from .errors import FormatError
from .fbcoeff import FBCoeffs
from .spca import SteerableBasis
from .stack import ImageStack, as_images

__all__ = [
    "config_hash",
    "provenance",
    "read_basis",
    "read_fbc",
    "read_mrc",
    "read_steerable_basis",
    "write_basis",
    "write_fbc",
    "write_metrics_csv",
    "write_mrc",
    "write_report",
    "write_steerable_basis",
]

MRC_HEADER = 1024
_MRC_MODE_FLOAT32 = 2
_MACHINE_STAMP_LE = b"\x44\x44\x00\x00"
FBC_MAGIC = b"FBC1"
FBC_VERSION = 1


def config_hash(config):
    """Short SHA-256 of a configuration mapping in canonical JSON form."""
    text = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def provenance(config=None):
    return {"tool": "ffbspca", "version": __version__, "config_hash": config_hash(config or {})}


# MRC: the stack is stored as (nz, ny, nx) with x fastest; in memory data[i, x, y].


def write_mrc(stack, path):
    images = as_images(stack)
    pixel = stack.pixel_size if isinstance(stack, ImageStack) else 1.0
    n, L, _ = images.shape
    data = np.ascontiguousarray(images.transpose(0, 2, 1), dtype="<f4")
    header = bytearray(MRC_HEADER)
    struct.pack_into("<3i", header, 0, L, L, n)
    struct.pack_into("<i", header, 12, _MRC_MODE_FLOAT32)
    struct.pack_into("<3i", header, 28, L, L, n)
    struct.pack_into("<3f", header, 40, L * pixel, L * pixel, n * pixel)
    struct.pack_into("<3f", header, 52, 90.0, 90.0, 90.0)
    struct.pack_into("<3i", header, 64, 1, 2, 3)
    if data.size:
        struct.pack_into("<3f", header, 76, float(data.min()), float(data.max()), float(data.mean()))
        struct.pack_into("<f", header, 216, float(data.std()))
    struct.pack_into("<i", header, 88, 0)
    header[104:108] = b"MRCO"
    struct.pack_into("<i", header, 108, 20140)
    header[208:212] = b"MAP "
    header[212:216] = _MACHINE_STAMP_LE
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_mrc(path):
    raw = Path(path).read_bytes()
    if len(raw) < MRC_HEADER:
        raise FormatError(f"{path}: file has {len(raw)} bytes, shorter than the {MRC_HEADER}-byte header")
    if raw[208:212] != b"MAP ":
        raise FormatError(f"{path}: missing 'MAP ' identifier at byte offset 208 (found {raw[208:212]!r})")
    if raw[212] == 0x11:
        raise FormatError(f"{path}: big-endian machine stamp at byte offset 212 is not supported")
    nx, ny, nz, mode = struct.unpack_from("<4i", raw, 0)
    if mode != _MRC_MODE_FLOAT32:
        raise FormatError(f"{path}: mode {mode} at byte offset 12 is not 2 (32-bit float)")
    if nx != ny:
        raise FormatError(f"{path}: images are {nx} x {ny} (offsets 0 and 4), expected square frames")
    if nx < 1 or nz < 0:
        raise FormatError(f"{path}: invalid dimensions nx={nx}, nz={nz}")
    nsymbt = struct.unpack_from("<i", raw, 92)[0]
    if nsymbt < 0:
        raise FormatError(f"{path}: negative extended header size at byte offset 92")
    start = MRC_HEADER + nsymbt
    need = start + 4 * nx * ny * nz
    if len(raw) < need:
        raise FormatError(f"{path}: truncated data, expected {need} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4", count=nx * ny * nz, offset=start).reshape(nz, ny, nx)
    mx = struct.unpack_from("<i", raw, 28)[0]
    cella = struct.unpack_from("<f", raw, 40)[0]
    pixel = cella / mx if mx > 0 and cella > 0 else 1.0
    try:
        return ImageStack(data.transpose(0, 2, 1).astype(np.float64), pixel)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# FBC1 coefficient files


def write_fbc(coeffs, path):
    spec = coeffs.spec
    p = np.asarray(spec.p, dtype="<u4")
    head = FBC_MAGIC + struct.pack("<IdIIII", FBC_VERSION, spec.c, spec.R, coeffs.L, coeffs.n, spec.k_max)
    p0 = int(spec.p[0])
    vals = np.ascontiguousarray(coeffs.values)
    rows = np.concatenate([vals[:, :p0].real, vals[:, p0:].view(np.float64)], axis=1)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(p.tobytes())
        fh.write(np.ascontiguousarray(rows, dtype="<f8").tobytes())


def read_fbc(path, spec=None):
    """Read an FBC1 file; the basis is rebuilt from (c, R) unless ``spec`` is given."""
    raw = Path(path).read_bytes()
    fixed = 4 + struct.calcsize("<IdIIII")
    if len(raw) < fixed:
        raise FormatError(f"{path}: file too short for an FBC1 header")
    if raw[:4] != FBC_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r} at offset 0, expected {FBC_MAGIC!r}")
    version, c, R, L, n, k_max = struct.unpack_from("<IdIIII", raw, 4)
    if version != FBC_VERSION:
        raise FormatError(f"{path}: unsupported FBC version {version} at offset 4")
    pos = fixed
    if len(raw) < pos + 4 * (k_max + 1):
        raise FormatError(f"{path}: truncated p_k table at offset {pos}")
    p = np.frombuffer(raw, dtype="<u4", count=k_max + 1, offset=pos).astype(np.int64)
    pos += 4 * (k_max + 1)
    width = int(p[0] + 2 * p[1:].sum())
    need = pos + 8 * width * n
    if len(raw) != need:
        raise FormatError(f"{path}: expected {need} bytes for {n} images of {width} values, found {len(raw)}")
    if spec is None:
        spec = build_basis(c, R)
    if spec.c != c or spec.R != R or not np.array_equal(spec.p, p):
        raise FormatError(f"{path}: p_k table does not match the basis for c={c}, R={R}")
    rows = np.frombuffer(raw, dtype="<f8", count=width * n, offset=pos).reshape(n, width)
    p0 = int(p[0])
    vals = np.empty((n, spec.n_coeffs), dtype=complex)
    vals[:, :p0] = rows[:, :p0]
    vals[:, p0:] = np.ascontiguousarray(rows[:, p0:]).view(complex)
    return FBCoeffs(spec, vals, int(L))


# basis files


def write_basis(spec, path):
    Path(path).write_text(spec.to_json())


def read_basis(path):
    try:
        return BasisSpec.from_json(Path(path).read_text())
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: invalid basis file ({exc})") from exc


def write_steerable_basis(basis, prefix, config=None):
    """Write ``prefix.json`` (header) and ``prefix.bin`` (mean, eigenvectors, radial samples)."""
    prefix = str(prefix)
    header = basis.header()
    header["n_xi"] = 0 if basis.radial is None else int(basis.xi.size)
    header["provenance"] = provenance(config)
    parts = [np.asarray(basis.mean, "<f8").ravel()]
    parts += [np.asarray(U, "<f8").ravel() for U in basis.eigvecs]
    if basis.radial is not None:
        parts.append(np.asarray(basis.xi, "<f8"))
        parts += [np.asarray(f, "<f8").ravel() for f in basis.radial]
    Path(prefix + ".json").write_text(json.dumps(header, indent=1))
    Path(prefix + ".bin").write_bytes(np.concatenate(parts).astype("<f8").tobytes())


def read_steerable_basis(prefix):
    prefix = str(prefix)
    try:
        header = json.loads(Path(prefix + ".json").read_text())
        spec = build_basis(header["c"], header["R"])
        p = np.asarray(header["p"], dtype=np.int64)
        n_xi = int(header["n_xi"])
        eigvals = [np.asarray(v, float) for v in header["eigenvalues"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{prefix}.json: invalid steerable basis header ({exc})") from exc
    if not np.array_equal(p, spec.p):
        raise FormatError(f"{prefix}.json: p_k table does not match the basis")
    payload = np.frombuffer(Path(prefix + ".bin").read_bytes(), dtype="<f8")
    need = p[0] + (p**2).sum() + (n_xi + n_xi * p.sum() if n_xi else 0)
    if payload.size != need:
        raise FormatError(f"{prefix}.bin: expected {need} values, found {payload.size}")
    pos = int(p[0])
    mean = payload[:pos].copy()
    eigvecs = []
    for pk in p:
        eigvecs.append(payload[pos : pos + pk * pk].reshape(pk, pk).copy())
        pos += pk * pk
    basis = SteerableBasis(spec=spec, eigvals=eigvals, eigvecs=eigvecs, mean=mean, n=int(header["n"]))
    if n_xi:
        basis.xi = payload[pos : pos + n_xi].copy()
        pos += n_xi
        basis.radial = []
        for pk in p:
            basis.radial.append(payload[pos : pos + pk * n_xi].reshape(pk, n_xi).copy())
            pos += pk * n_xi
    return basis


# reports


def _clean_json(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return 999.0 if obj > 0 else -999.0
    if isinstance(obj, dict):
        return {k: _clean_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean_json(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean_json(obj.item())
    return obj


def write_report(report, path, config=None):
    body = dict(report)
    body["provenance"] = provenance(config)
    Path(path).write_text(json.dumps(_clean_json(body), indent=1))


def write_metrics_csv(mse, psnr, path, config=None):
    """CSV with columns index, mse, psnr; infinite PSNR is written as 999."""
    from .denoise import PSNR_SENTINEL

    buf = _io.StringIO()
    prov = provenance(config)
    buf.write(f"# provenance tool={prov['tool']} version={prov['version']} config_hash={prov['config_hash']}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "mse", "psnr"])
    for i, (m, p) in enumerate(zip(mse, psnr)):
        w.writerow([i, repr(float(m)), repr(PSNR_SENTINEL if math.isinf(p) else float(p))])
    Path(path).write_text(buf.getvalue())


def read_metrics_csv(path):
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    return np.array([float(r["mse"]) for r in rows]), np.array([float(r["psnr"]) for r in rows])

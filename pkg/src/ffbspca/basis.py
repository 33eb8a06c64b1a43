"""Truncated Fourier-Bessel basis on the frequency disk of radius ``c``.

A pair (k, q) is kept when the zero *after* it, R_{k,q+1}, satisfies
R_{k,q+1} <= 2*pi*c*R, so the real-space energy of every kept function sits
inside the support disk of radius R. Only k >= 0 is stored; the function with
angular index -k is ``(-1)^k * conj(psi_{k,q})``.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .specfun import bessel_j, bessel_j_orders, bessel_zeros
from .stack import centered_indices

__all__ = [
    "BasisSpec",
    "RadialTable",
    "build_basis",
    "eval_psi_fourier",
    "eval_psi_real",
    "radial_table",
    "real_space_basis",
    "pixel_polar",
    "RealSpaceRenderer",
]


@dataclass(frozen=True, eq=False)
class BasisSpec:
    c: float
    R: int
    p: np.ndarray  # p_0..p_kmax
    zeros: tuple  # zeros[k] has p_k + 1 entries
    normalizers: tuple  # normalizers[k] has p_k entries

    @property
    def k_max(self):
        return len(self.p) - 1

    @property
    def p_total(self):
        """Number of basis functions counting both +k and -k."""
        return int(self.p[0] + 2 * self.p[1:].sum())

    @property
    def n_coeffs(self):
        """Number of stored (k >= 0) coefficients."""
        return int(self.p.sum())

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.p)])

    def check(self, k, q):
        if not (0 <= abs(k) <= self.k_max and 1 <= q <= self.p[abs(k)]):
            raise IndexError(f"(k={k}, q={q}) is not in the basis")

    def to_dict(self):
        return {
            "c": self.c,
            "R": self.R,
            "k_max": self.k_max,
            "p": [int(v) for v in self.p],
            "zeros": [float(v) for z in self.zeros for v in z],
            "normalizers": [float(v) for n in self.normalizers for v in n],
        }

    def to_json(self):
        # json writes floats with repr(), which round-trips doubles exactly
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        p = np.asarray(d["p"], dtype=np.int64)
        if len(p) != d["k_max"] + 1:
            raise ValueError("k_max does not match the length of p")
        zs, ns = np.asarray(d["zeros"], float), np.asarray(d["normalizers"], float)
        if zs.size != (p + 1).sum() or ns.size != p.sum():
            raise ValueError("zero/normalizer tables do not match p")
        zsplit = np.split(zs, np.cumsum(p + 1)[:-1])
        nsplit = np.split(ns, np.cumsum(p)[:-1])
        return cls(c=float(d["c"]), R=int(d["R"]), p=p, zeros=tuple(zsplit), normalizers=tuple(nsplit))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, BasisSpec):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _validate_cR(c, R):
    if not (0 < c <= 0.5):
        raise ConfigurationError(f"band limit c must lie in (0, 1/2], got {c}")
    if int(R) != R or R < 2:
        raise ConfigurationError(f"support radius R must be an integer >= 2, got {R}")
    if c * R < 1:
        raise ConfigurationError(f"c*R = {c * R:.3g} < 1 gives an empty basis")


def build_basis(c, R):
    """Enumerate all (k, q) meeting the sampling criterion for band limit c, radius R."""
    _validate_cR(c, R)
    R = int(R)
    limit = 2 * np.pi * c * R
    p, zeros, norms = [], [], []
    k = 0
    while True:
        z = bessel_zeros(k, upto=limit)
        pk = max(z.size - 1, 0)
        if pk == 0:
            break
        z = z[: pk + 1]
        p.append(pk)
        zeros.append(z)
        norms.append(1.0 / (c * np.sqrt(np.pi) * np.abs(bessel_j(k + 1, z[:pk]))))
        k += 1
    return BasisSpec(c=float(c), R=R, p=np.asarray(p, dtype=np.int64), zeros=tuple(zeros), normalizers=tuple(norms))


@dataclass(frozen=True, eq=False)
class RadialTable:
    """``values[k][q-1, j] = N_{k,q} J_k(R_{k,q} xi_j / c)`` at quadrature radii ``xi``."""

    xi: np.ndarray
    weights: np.ndarray
    values: tuple = field(repr=False)


def radial_table(spec, xi, weights):
    xi = np.asarray(xi, float)
    vals = []
    for k in range(spec.k_max + 1):
        pk = spec.p[k]
        x = spec.zeros[k][:pk, None] * xi[None, :] / spec.c
        vals.append(spec.normalizers[k][:, None] * bessel_j(k, x))
    return RadialTable(xi=xi, weights=np.asarray(weights, float), values=tuple(vals))


def eval_psi_fourier(spec, k, q, xi, theta):
    """psi_{k,q}(xi, theta) on the frequency disk; zero outside radius c."""
    spec.check(k, q)
    ka = abs(k)
    xi = np.asarray(xi, float)
    theta = np.asarray(theta, float)
    inside = xi <= spec.c
    arg = spec.zeros[ka][q - 1] * np.where(inside, xi, 0.0) / spec.c
    radial = spec.normalizers[ka][q - 1] * bessel_j(ka, arg)
    if k < 0:
        radial = radial * (-1) ** ka
    out = np.where(inside, radial * np.exp(1j * k * theta), 0.0)
    return complex(out) if out.ndim == 0 else out


_TAYLOR_WINDOW = 0.1
_TAYLOR_TERMS = 18


def _taylor_about_zero(k, zero, jk1_at_zero, n_terms=_TAYLOR_TERMS):
    """Taylor coefficients a_n of J_k(zero + t), from the Bessel equation about a zero."""
    a = np.zeros(n_terms + 1)
    a[1] = -jk1_at_zero
    z = zero
    for n in range(0, n_terms - 1):
        s = (2 * z * n * (n + 1) + z * (n + 1)) * a[n + 1] + (n * n + z * z - k * k) * a[n]
        if n >= 1:
            s += 2 * z * a[n - 1]
        if n >= 2:
            s += a[n - 2]
        a[n + 2] = -s / (z * z * (n + 2) * (n + 1))
    return a


def _psi_real_radial(k, zero, x, jk, jk1_at_zero):
    """Radial factor J_k(x) / (x^2 - zero^2) with the removable singularity patched.

    Near the zero both numerator and denominator lose relative accuracy, so a
    Taylor series of J_k about the zero is divided by (x + zero) instead.
    """
    d = x * x - zero * zero
    near = np.abs(x - zero) < _TAYLOR_WINDOW
    with np.errstate(divide="ignore", invalid="ignore"):
        out = jk / d
    if near.any():
        t = x[near] - zero
        a = _taylor_about_zero(k, zero, jk1_at_zero)
        out[near] = np.polynomial.polynomial.polyval(t, a[1:]) / (2.0 * zero + t)
    return out


def eval_psi_real(spec, k, q, r, phi):
    """Inverse Fourier transform of psi_{k,q} at polar position (r, phi) in pixels."""
    spec.check(k, q)
    ka = abs(k)
    r = np.asarray(r, float)
    phi = np.asarray(phi, float)
    shape = np.broadcast(r, phi).shape
    r, phi = np.broadcast_to(r, shape).ravel(), np.broadcast_to(phi, shape).ravel()
    zero = spec.zeros[ka][q - 1]
    x = 2 * np.pi * spec.c * r
    radial = _psi_real_radial(ka, zero, x, bessel_j(ka, x), bessel_j(ka + 1, zero))
    val = 2 * spec.c * np.sqrt(np.pi) * (-1) ** q * zero * radial * (1j) ** ka * np.exp(1j * ka * phi)
    if k < 0:
        val = np.conj(val)
    val = val.reshape(shape)
    return complex(val) if val.ndim == 0 else val


def pixel_polar(L):
    """Polar coordinates (r, phi) of the centred L x L pixel grid; axis 0 is x."""
    idx = centered_indices(L)
    x, y = np.meshgrid(idx, idx, indexing="ij")
    return np.hypot(x, y), np.arctan2(y, x)


def real_space_basis(spec, L, kmax=None, kmin=0):
    """Real-space images of the stored basis functions on the L x L pixel grid.

    Returns a list over k = kmin..kmax of complex arrays of shape (p_k, L*L).
    """
    kmax = spec.k_max if kmax is None else kmax
    r, phi = pixel_polar(L)
    r, phi = r.ravel(), phi.ravel()
    x = 2 * np.pi * spec.c * r
    ux, inv = np.unique(x, return_inverse=True)
    jall = bessel_j_orders(kmax + 1, ux)
    pref = 2 * spec.c * np.sqrt(np.pi)
    out = []
    for k in range(kmin, kmax + 1):
        pk = spec.p[k]
        zeros = spec.zeros[k][:pk]
        jk1 = bessel_j(k + 1, zeros)
        ang = (1j) ** k * np.exp(1j * k * phi)
        block = np.empty((pk, x.size), dtype=complex)
        for qi in range(pk):
            rad = _psi_real_radial(k, zeros[qi], ux, jall[k], jk1[qi])[inv]
            block[qi] = pref * (-1) ** (qi + 1) * zeros[qi] * rad * ang
        out.append(block)
    return out


class RealSpaceRenderer:
    """Maps packed k >= 0 coefficients to real L x L images.

    A real image with coefficients a (and a_{-k} = conj(a_k)) is
    a_0 . G_0 + sum_{k>0} 2 Re(a_k . G_k) where G_k are the real-space basis
    images. The real rendering matrix is cached when it fits in ``max_bytes``;
    otherwise it is rebuilt in chunks of k on every call.
    """

    def __init__(self, spec, L, max_bytes=2**30):
        self.spec = spec
        self.L = int(L)
        self._mat = None
        if 2 * spec.n_coeffs * self.L**2 * 8 <= max_bytes:
            self._mat = self._matrix(0, spec.k_max)

    def _matrix(self, k0, k1):
        blocks = real_space_basis(self.spec, self.L, kmax=k1, kmin=k0)
        G = np.concatenate(blocks, axis=0)
        w = np.repeat(np.where(np.arange(k0, k1 + 1) == 0, 1.0, 2.0), self.spec.p[k0 : k1 + 1])
        return np.concatenate([w[:, None] * G.real, -w[:, None] * G.imag], axis=0)

    def render(self, values):
        """Images (n, L, L) from coefficient rows of shape (n, n_coeffs)."""
        values = np.atleast_2d(values)
        if self._mat is not None:
            X = np.concatenate([values.real, values.imag], axis=1)
            out = X @ self._mat
        else:
            out = np.zeros((values.shape[0], self.L**2))
            off = self.spec.offsets
            step = max(1, self.spec.k_max // 8)
            for k0 in range(0, self.spec.k_max + 1, step):
                k1 = min(k0 + step - 1, self.spec.k_max)
                V = values[:, off[k0] : off[k1 + 1]]
                out += np.concatenate([V.real, V.imag], axis=1) @ self._matrix(k0, k1)
        return out.reshape(-1, self.L, self.L)

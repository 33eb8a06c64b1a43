"""Discrete Fourier transform of Cartesian images sampled on a polar grid.

For an L x L image with centred pixel indices i = (i1, i2),

    F(I)(xi1, xi2) = L^-2 * sum_i I(i1, i2) exp(-2 pi i (i1 xi1 + i2 xi2)),

evaluated at Gauss-Legendre radii times uniform angles inside the disk of
radius c. Two evaluators are provided: an exact separable sum (slow, used as
the reference) and a type-2 NUFFT by kernel gridding.

NUFFT details: the image is divided by the kernel's Fourier transform,
zero-padded to an M x M grid (M >= 2L), transformed with an FFT and then
interpolated to each node with a separable exponential-of-semicircle kernel
exp(beta * (sqrt(1 - (t/w)^2) - 1)) of half-width w cells. Real images have
Hermitian transforms, so when n_theta is even only the first half of the
angles is interpolated and the rest is filled in by conjugation.
"""
import math
import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
from numba import njit

from .basis import _validate_cR
from .errors import ConfigurationError
from .specfun import gauss_legendre
from .stack import as_images, centered_indices

__all__ = [
    "NufftPlan",
    "PolarGrid",
    "PolarSamples",
    "ceil_count",
    "make_nufft_plan",
    "make_polar_grid",
    "polar_ft_direct",
    "polar_ft_nufft",
]

EPS_MIN, EPS_MAX = 1e-14, 1e-4
DEFAULT_EPS = 1e-10
_OVERSAMPLE = 2
_CHUNK_BYTES = 256 * 2**20


def ceil_count(x):
    """Ceiling that ignores floating noise, so that 4 * (1/3) * 60 gives 80."""
    return int(math.ceil(x - 1e-9 * max(1.0, abs(x))))


@dataclass(frozen=True, eq=False)
class PolarGrid:
    """Polar quadrature grid: ``n_xi`` Gauss-Legendre radii times ``n_theta`` angles."""

    c: float
    R: int
    xi: np.ndarray
    weights: np.ndarray
    theta: np.ndarray

    @property
    def n_xi(self):
        return self.xi.size

    @property
    def n_theta(self):
        return self.theta.size

    @property
    def nodes(self):
        """Node coordinates (xi1, xi2), each of shape (n_xi, n_theta)."""
        return (
            self.xi[:, None] * np.cos(self.theta)[None, :],
            self.xi[:, None] * np.sin(self.theta)[None, :],
        )

    def same_as(self, other):
        return (
            self.c == other.c
            and self.R == other.R
            and np.array_equal(self.xi, other.xi)
            and self.n_theta == other.n_theta
        )


def make_polar_grid(c, R, n_xi=None, n_theta=None):
    """Grid with ``n_xi = ceil(4cR)`` radii on [0, c] and ``n_theta = ceil(16cR)`` angles."""
    _validate_cR(c, R)
    n_xi = ceil_count(4 * c * R) if n_xi is None else int(n_xi)
    n_theta = ceil_count(16 * c * R) if n_theta is None else int(n_theta)
    if n_xi < 1 or n_theta < 1:
        raise ConfigurationError("grid sizes must be positive")
    rule = gauss_legendre(n_xi, 0.0, c)
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    return PolarGrid(c=float(c), R=int(R), xi=rule.nodes, weights=rule.weights, theta=theta)


@dataclass(eq=False)
class PolarSamples:
    """Samples of F(I) on a polar grid, shape (n_images, n_xi, n_theta)."""

    values: np.ndarray
    grid: PolarGrid = field(repr=False)
    L: int
    method: str = "direct"
    eps: float = 0.0

    @property
    def n(self):
        return self.values.shape[0]


def _check_grid_fits(L, grid):
    if L < 2:
        raise ValueError("images must be at least 2 x 2")


def polar_ft_direct(stack, grid, block_size=64):
    """Exact evaluation of the normalised Fourier sum at every polar node."""
    images = as_images(stack)
    n, L, _ = images.shape
    _check_grid_fits(L, grid)
    idx = centered_indices(L)
    x1, x2 = grid.nodes
    x1, x2 = x1.ravel(), x2.ravel()
    e1 = np.exp(-2j * np.pi * np.outer(x1, idx))  # (nodes, L)
    e2 = np.exp(-2j * np.pi * np.outer(x2, idx))
    out = np.empty((n, x1.size), dtype=complex)
    for s in range(0, n, block_size):
        blk = images[s : s + block_size]
        inner = blk @ e2.T  # (b, L, nodes): sum over i2
        out[s : s + block_size] = np.einsum("bin,ni->bn", inner, e1)
    out /= L * L
    return PolarSamples(out.reshape(n, grid.n_xi, grid.n_theta), grid, L, "direct", 0.0)


def _es_kernel(t, w, beta):
    z = t / w
    with np.errstate(invalid="ignore"):
        val = np.exp(beta * (np.sqrt(1.0 - z * z) - 1.0))
    return np.where(np.abs(z) < 1.0, val, 0.0)


@njit(cache=True, nogil=True)
def _interp(G, start1, start2, w1, w2, out):
    """out[n, b] = sum_{a,c} w1[n,a] w2[n,c] G[(start1[n]+a) % M, (start2[n]+c) % M, b]."""
    M = G.shape[0]
    nb = G.shape[2]
    width = w1.shape[1]
    acc = np.empty(nb, dtype=np.complex128)
    row = np.empty(nb, dtype=np.complex128)
    for n in range(start1.size):
        acc[:] = 0.0
        for a in range(width):
            m1 = (start1[n] + a) % M
            row[:] = 0.0
            for cc in range(width):
                m2 = (start2[n] + cc) % M
                wt = w2[n, cc]
                for b in range(nb):
                    row[b] += wt * G[m1, m2, b]
            wa = w1[n, a]
            for b in range(nb):
                acc[b] += wa * row[b]
        for b in range(nb):
            out[n, b] = acc[b]


@dataclass(frozen=True, eq=False)
class NufftPlan:
    """Precomputed gridding data for one image size, grid, and accuracy."""

    L: int
    M: int
    eps: float
    w: int
    beta: float
    grid: PolarGrid = field(repr=False)
    half: bool
    deconv: np.ndarray = field(repr=False)  # (L,) 1-d correction, applied in both axes
    pad_index: np.ndarray = field(repr=False)
    start1: np.ndarray = field(repr=False)
    start2: np.ndarray = field(repr=False)
    w1: np.ndarray = field(repr=False)
    w2: np.ndarray = field(repr=False)


def _check_eps(eps):
    if not (EPS_MIN <= eps <= EPS_MAX):
        raise ConfigurationError(f"NUFFT accuracy must lie in [{EPS_MIN:g}, {EPS_MAX:g}], got {eps!r}")


def make_nufft_plan(L, grid, eps=DEFAULT_EPS):
    _check_eps(eps)
    w = int(math.ceil(math.log(1.0 / eps) / math.pi)) + 1
    beta = 2.30 * (2 * w)
    M = scipy.fft.next_fast_len(max(_OVERSAMPLE * L, 2 * w + 2))
    M += M % 2
    idx = centered_indices(L)
    # Fourier transform of the kernel at the pixel frequencies
    rule = gauss_legendre(max(64, 4 * w + L // 4), 0.0, 1.0)
    phi = _es_kernel(rule.nodes * w, w, beta)
    deconv = 2 * w * np.cos(2 * np.pi * np.outer(idx, rule.nodes) * w / M) @ (rule.weights * phi)
    half = grid.n_theta % 2 == 0
    nt = grid.n_theta // 2 if half else grid.n_theta
    x1, x2 = grid.nodes
    u1, u2 = (x1[:, :nt] * M).ravel(), (x2[:, :nt] * M).ravel()
    offs = np.arange(2 * w)
    start1 = np.floor(u1).astype(np.int64) - w + 1
    start2 = np.floor(u2).astype(np.int64) - w + 1
    w1 = _es_kernel(u1[:, None] - (start1[:, None] + offs), w, beta)
    w2 = _es_kernel(u2[:, None] - (start2[:, None] + offs), w, beta)
    return NufftPlan(
        L=L, M=M, eps=float(eps), w=w, beta=beta, grid=grid, half=half, deconv=deconv,
        pad_index=np.mod(idx, M), start1=start1, start2=start2, w1=w1, w2=w2,
    )


_plan_cache = {}
_plan_lock = threading.Lock()


def _cached_plan(L, grid, eps):
    key = (L, grid.c, grid.R, grid.n_xi, grid.n_theta, eps)
    with _plan_lock:
        plan = _plan_cache.get(key)
        if plan is None or not plan.grid.same_as(grid):
            plan = make_nufft_plan(L, grid, eps)
            if len(_plan_cache) > 8:
                _plan_cache.clear()
            _plan_cache[key] = plan
    return plan


def polar_ft_nufft(stack, grid, eps=DEFAULT_EPS, plan=None):
    """Type-2 NUFFT of each image onto the polar nodes, accurate to about ``eps``."""
    _check_eps(eps)
    images = as_images(stack)
    n, L, _ = images.shape
    _check_grid_fits(L, grid)
    if plan is None:
        plan = _cached_plan(L, grid, eps)
    elif plan.L != L or not plan.grid.same_as(grid) or plan.eps != eps:
        raise ConfigurationError("NUFFT plan does not match the images, grid, or accuracy")
    M = plan.M
    nt = grid.n_theta // 2 if plan.half else grid.n_theta
    out = np.empty((n, grid.n_xi, grid.n_theta), dtype=complex)
    corr = 1.0 / np.outer(plan.deconv, plan.deconv)
    chunk = max(1, min(n, _CHUNK_BYTES // (16 * M * M)))
    pad = np.zeros((chunk, M, M))
    ix = np.ix_(plan.pad_index, plan.pad_index)
    for s in range(0, n, chunk):
        b = min(chunk, n - s)
        pad[:] = 0.0
        pad[(slice(0, b),) + ix] = images[s : s + b] * corr
        G = scipy.fft.fft2(pad[:b], axes=(1, 2))
        G = np.ascontiguousarray(np.moveaxis(G, 0, -1))
        vals = np.empty((plan.start1.size, b), dtype=complex)
        _interp(G, plan.start1, plan.start2, plan.w1, plan.w2, vals)
        vals = vals.T.reshape(b, grid.n_xi, nt)
        out[s : s + b, :, :nt] = vals
        if plan.half:
            out[s : s + b, :, nt:] = np.conj(vals)
    out /= L * L
    return PolarSamples(out, grid, L, "nufft", float(eps))

"""Fourier-Bessel expansion coefficients, synthesis, and steering.

Coefficients are stored for k >= 0 only, packed per image as one complex row
ordered by (k, q); the coefficient of angular index -k is the conjugate.
They are scaled by L^2 so that they expand the continuous Fourier transform
of the image seen as a sum of unit point masses. In these units white pixel
noise of variance sigma^2 gives coefficients of variance close to sigma^2,
and an image rendered from ``eval_psi_real`` expands back to unit weight.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .basis import BasisSpec, radial_table
from .errors import ConfigurationError
from .polarft import DEFAULT_EPS, PolarSamples, make_polar_grid, polar_ft_direct, polar_ft_nufft
from .stack import as_images

__all__ = [
    "FBCoeffs",
    "angular_transform",
    "expand",
    "expand_samples",
    "mean_coeffs",
    "reflect_coeffs",
    "rotate_coeffs",
    "synthesize_polar",
]


@dataclass(eq=False)
class FBCoeffs:
    """Coefficients a[i, (k, q)] for k = 0..k_max, q = 1..p_k, shape (n, n_coeffs)."""

    spec: BasisSpec = field(repr=False)
    values: np.ndarray
    L: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim == 1:
            self.values = self.values[None]
        if self.values.ndim != 2 or self.values.shape[1] != self.spec.n_coeffs:
            raise ConfigurationError(
                f"coefficient array of shape {self.values.shape} does not match "
                f"{self.spec.n_coeffs} basis functions"
            )

    @property
    def n(self):
        return self.values.shape[0]

    def block(self, k):
        """View of the (n, p_k) block for angular frequency k."""
        off = self.spec.offsets
        return self.values[:, off[k] : off[k + 1]]

    def blocks(self):
        return [self.block(k) for k in range(self.spec.k_max + 1)]

    def angular_index(self):
        """Angular frequency k of every packed column."""
        return np.repeat(np.arange(self.spec.k_max + 1), self.spec.p)

    def energy(self):
        """Per-image sum of |a|^2 over +k and -k."""
        mult = np.where(self.angular_index() == 0, 1.0, 2.0)
        return (np.abs(self.values) ** 2) @ mult

    def copy(self, values=None):
        return FBCoeffs(self.spec, self.values.copy() if values is None else values, self.L)

    def __getitem__(self, idx):
        vals = self.values[idx]
        return FBCoeffs(self.spec, vals if vals.ndim == 2 else vals[None], self.L)


def angular_transform(samples, k_max):
    """Angular Fourier coefficients (2 pi / n_theta) * FFT over each ring, bins 0..k_max.

    Returns shape (n, n_xi, k_max + 1).
    """
    vals = samples.values if isinstance(samples, PolarSamples) else np.asarray(samples)
    n_theta = vals.shape[-1]
    if 2 * k_max >= n_theta:
        raise ConfigurationError(f"k_max = {k_max} aliases on {n_theta} angles (need n_theta > 2 k_max)")
    return (2 * np.pi / n_theta) * scipy.fft.fft(vals, axis=-1)[..., : k_max + 1]


class _Weights:
    """Radial table rows premultiplied by xi_j * w_j, one (p_k, n_xi) matrix per k."""

    def __init__(self, spec, grid, table=None):
        if grid.c != spec.c or grid.R != spec.R:
            raise ConfigurationError("polar grid and basis were built for different (c, R)")
        if table is None:
            table = radial_table(spec, grid.xi, grid.weights)
        elif not np.array_equal(table.xi, grid.xi):
            raise ConfigurationError("radial table and polar grid use different radii")
        if grid.n_theta <= 2 * spec.k_max:
            raise ConfigurationError("polar grid has too few angles for this basis")
        self.table = table
        xw = grid.xi * grid.weights
        self.mats = [v * xw[None, :] for v in table.values]


def _coeffs_from_angular(ghat, spec, weights, L):
    n = ghat.shape[0]
    out = np.empty((n, spec.n_coeffs), dtype=complex)
    off = spec.offsets
    for k in range(spec.k_max + 1):
        out[:, off[k] : off[k + 1]] = ghat[:, :, k] @ weights.mats[k].T
    out[:, : off[1]] = out[:, : off[1]].real
    out *= L * L
    return out


def expand_samples(samples, spec, table=None):
    """Fourier-Bessel coefficients from polar samples of F(I)."""
    weights = _Weights(spec, samples.grid, table)
    ghat = angular_transform(samples, spec.k_max)
    return FBCoeffs(spec, _coeffs_from_angular(ghat, spec, weights, samples.L), samples.L)


def expand(stack, spec, grid=None, table=None, method="nufft", eps=DEFAULT_EPS, block_size=1024, workers=1):
    """Expand every image of a stack in the basis, processing ``block_size`` images at a time.

    ``method`` selects the polar transform: ``"nufft"`` (fast) or ``"direct"``.
    Blocks are independent and may run on ``workers`` threads; the result does
    not depend on the worker count.
    """
    images = as_images(stack)
    n, L, _ = images.shape
    if grid is None:
        grid = make_polar_grid(spec.c, spec.R)
    if method not in ("nufft", "direct"):
        raise ConfigurationError(f"unknown polar transform method {method!r}")
    if block_size < 1:
        raise ConfigurationError("block size must be positive")
    weights = _Weights(spec, grid, table)
    out = np.empty((n, spec.n_coeffs), dtype=complex)

    def run(s):
        blk = images[s : s + block_size]
        if method == "nufft":
            samples = polar_ft_nufft(blk, grid, eps)
        else:
            samples = polar_ft_direct(blk, grid)
        ghat = angular_transform(samples, spec.k_max)
        out[s : s + blk.shape[0]] = _coeffs_from_angular(ghat, spec, weights, L)

    starts = range(0, n, block_size)
    if workers > 1 and n > block_size:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    else:
        for s in starts:
            run(s)
    return FBCoeffs(spec, out, L)


def synthesize_polar(coeffs, grid, table=None):
    """Evaluate the truncated expansion on the polar grid, including negative k."""
    spec = coeffs.spec
    weights = _Weights(spec, grid, table)
    n_theta = grid.n_theta
    H = np.zeros((coeffs.n, grid.n_xi, n_theta), dtype=complex)
    for k in range(spec.k_max + 1):
        g = coeffs.block(k) @ weights.table.values[k]  # (n, n_xi)
        H[:, :, k] += g
        if k > 0:
            H[:, :, n_theta - k] += (-1) ** k * np.conj(g)
    vals = n_theta * scipy.fft.ifft(H, axis=-1) / coeffs.L**2
    return PolarSamples(vals, grid, coeffs.L, "synthesized", 0.0)


def rotate_coeffs(coeffs, alpha):
    """Coefficients of the image rotated by ``alpha``: a_{k,q} * exp(-i k alpha)."""
    if alpha == 0:
        return coeffs.copy()
    phase = np.exp(-1j * coeffs.angular_index() * alpha)
    return coeffs.copy(coeffs.values * phase[None, :])


def reflect_coeffs(coeffs, alpha=0.0):
    """Coefficients of the image mirrored in x (then rotated by ``alpha``)."""
    vals = np.conj(coeffs.values)
    if alpha != 0.0:
        vals = vals * np.exp(-1j * coeffs.angular_index() * alpha)[None, :]
    return coeffs.copy(vals)


def mean_coeffs(coeffs):
    """Sample mean of the k = 0 coefficients, the only part of the invariant mean."""
    if coeffs.n < 1:
        raise ValueError("mean of an empty coefficient set")
    return coeffs.block(0).real.mean(axis=0)

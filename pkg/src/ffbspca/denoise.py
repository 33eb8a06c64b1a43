"""Noise, support and band-limit estimation; component selection, shrinkage and denoising.

Units: pixel noise of variance sigma^2 gives Fourier-Bessel coefficients of
variance close to sigma^2 (see ``fbcoeff``), so the Marchenko-Pastur edges
below are expressed directly in pixel units. The power spectrum uses the
unitary DFT (|fft2(I)|^2 / L^2), whose white-noise floor is also sigma^2.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .basis import RealSpaceRenderer, build_basis, pixel_polar
from .errors import ConfigurationError, EstimationError
from .fbcoeff import expand
from .polarft import DEFAULT_EPS
from .spca import baseline_pca, spca_coeffs, steerable_pca
from .stack import ImageStack, as_images

__all__ = [
    "DenoiseReport",
    "NoiseModel",
    "PSNR_SENTINEL",
    "denoise_images",
    "denoise_stack",
    "estimate_bandlimit",
    "estimate_noise_variance",
    "estimate_support",
    "metrics",
    "pca_denoise",
    "radial_power_spectrum",
    "radial_variance",
    "select_components",
    "shrink_eigenvalues",
]

PSNR_SENTINEL = 999.0
SIGNIFICANCE_Z = 4.0
SHRINK_MODES = ("spiked", "soft")


def radial_variance(stack):
    """Per-pixel variance across the mean-subtracted stack, averaged over integer-radius rings.

    Returns (radii, variance, pixels_per_ring) for rings with radius < L/2.
    """
    images = as_images(stack)
    n, L, _ = images.shape
    if n < 2:
        raise ValueError("noise estimation needs at least 2 images")
    var = images.var(axis=0, ddof=1)
    r, _ = pixel_polar(L)
    rb = np.rint(r).astype(np.int64)
    nb = int(math.ceil(L / 2))
    keep = rb < L / 2
    counts = np.bincount(rb[keep], minlength=nb)[:nb]
    sums = np.bincount(rb[keep], weights=var[keep], minlength=nb)[:nb]
    ok = counts > 0
    radii = np.arange(nb)[ok]
    return radii, sums[ok] / counts[ok], counts[ok]


def estimate_noise_variance(stack):
    """Mean of the radial variance curve over the outer 10% of radii below L/2."""
    images = as_images(stack)
    if images.shape[-1] < 16:
        raise ValueError("noise estimation needs images of side at least 16")
    radii, v, counts = radial_variance(images)
    half = images.shape[-1] / 2
    outer = radii >= 0.9 * half
    return float(np.sum(v[outer] * counts[outer]) / np.sum(counts[outer]))


def _significant_excess(level, floor, floor_se, counts, n):
    """Excess of ``level`` over ``floor``, zeroed where it is within SIGNIFICANCE_Z standard errors."""
    se = np.sqrt((floor * np.sqrt(2.0 / (n * counts))) ** 2 + floor_se**2)
    excess = level - floor
    return np.where(excess > SIGNIFICANCE_Z * se, excess, 0.0)


def _floor_se(sigma2, n, L):
    # standard error of the outer-ring noise estimate
    pixels = max(1.0, 0.19 * math.pi * (L / 2) ** 2)
    return sigma2 * math.sqrt(2.0 / (n * pixels))


def _cumulative_cut(mass, fraction):
    total = mass.sum()
    if not total > 0:
        raise EstimationError("no signal above the noise level")
    cum = np.cumsum(mass)
    return int(np.argmax(cum >= fraction * total * (1 - 1e-12)))


def estimate_support(stack, sigma2, fraction=0.999):
    """Smallest radius holding ``fraction`` of the signal variance (weighted by ring area)."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    images = as_images(stack)
    n, L, _ = images.shape
    radii, v, counts = radial_variance(images)
    excess = _significant_excess(v, sigma2, _floor_se(sigma2, n, L), counts, n)
    mass = excess * counts
    if fraction == 1:
        if not mass.sum() > 0:
            raise EstimationError("no signal above the noise level")
        return int(radii[-1])
    return int(radii[_cumulative_cut(mass, fraction)])


def radial_power_spectrum(stack):
    """Mean unitary periodogram of the mean-subtracted images, averaged over rings |f| L = b.

    Returns (frequencies b / L, power, modes_per_ring) for 0 <= f <= 1/2.
    """
    images = as_images(stack)
    n, L, _ = images.shape
    if n < 2:
        raise ValueError("spectrum estimation needs at least 2 images")
    centred = images - images.mean(axis=0, keepdims=True)
    power = np.zeros((L, L))
    for s in range(0, n, 256):
        power += (np.abs(np.fft.fft2(centred[s : s + 256], axes=(1, 2))) ** 2).sum(axis=0)
    power /= (n - 1) * L * L
    fr = np.fft.fftfreq(L)
    fb = np.rint(np.hypot(fr[:, None], fr[None, :]) * L).astype(np.int64)
    nb = L // 2 + 1
    keep = fb < nb
    counts = np.bincount(fb[keep], minlength=nb)
    sums = np.bincount(fb[keep], weights=power[keep], minlength=nb)
    return np.arange(nb) / L, sums / counts, counts


def estimate_bandlimit(stack, sigma2, fraction=0.999):
    """Smallest frequency (cycles/pixel) holding ``fraction`` of the signal power, capped at 1/2."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    images = as_images(stack)
    n, L, _ = images.shape
    f, p, counts = radial_power_spectrum(images)
    excess = _significant_excess(p, sigma2, _floor_se(sigma2, n, L), counts, n)
    mass = excess * counts
    if fraction == 1:
        if not mass.sum() > 0:
            raise EstimationError("no signal above the noise level")
        return 0.5
    return float(min(f[_cumulative_cut(mass, fraction)], 0.5))


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Noise variance and per-block aspect ratios gamma_0 = p_0/n, gamma_k = p_k/(2n)."""

    sigma2: float
    n: int
    p: np.ndarray

    @property
    def gamma(self):
        p = np.asarray(self.p, float)
        g = p / (2.0 * self.n)
        g[0] = p[0] / self.n
        return g

    @property
    def edges(self):
        return self.sigma2 * (1 + np.sqrt(self.gamma)) ** 2


def select_components(eigvals, model):
    """Boolean mask per block marking eigenvalues above that block's upper MP edge."""
    lams = eigvals.eigvals if hasattr(eigvals, "eigvals") else eigvals
    return [np.asarray(lam) > edge for lam, edge in zip(lams, model.edges)]


def shrink_eigenvalues(lam, sigma2, gamma, mode="spiked"):
    """Clean-eigenvalue estimates and Wiener-type weights h = l / (l + sigma^2).

    ``soft``: l = (lam - sigma^2)_+. ``spiked``: the inverse of the spiked
    covariance bias map above the edge sigma^2 (1 + sqrt(gamma))^2, else 0.
    """
    if mode not in SHRINK_MODES:
        raise ConfigurationError(f"unknown shrinkage mode {mode!r}")
    lam = np.asarray(lam, float)
    if sigma2 == 0:
        return lam.copy(), np.ones_like(lam)
    if mode == "soft":
        ell = np.maximum(lam - sigma2, 0.0)
    else:
        edge = sigma2 * (1 + np.sqrt(gamma)) ** 2
        b = lam - sigma2 * (1 + gamma)
        disc = np.maximum(b * b - 4 * gamma * sigma2**2, 0.0)
        ell = np.where(lam > edge, 0.5 * (b + np.sqrt(disc)), 0.0)
    return ell, ell / (ell + sigma2)


@dataclass
class DenoiseReport:
    """Selection counts, weights, estimated parameters and optional quality metrics."""

    sigma2: float
    c: float
    R: int
    selected: list
    weights: list = field(repr=False)
    mode: str = "spiked"
    mse: np.ndarray = None
    psnr: np.ndarray = None

    @property
    def total_selected(self):
        return int(sum(self.selected))

    def to_dict(self):
        d = {
            "sigma2": float(self.sigma2),
            "c": float(self.c),
            "R": int(self.R),
            "mode": self.mode,
            "selected_per_k": [int(v) for v in self.selected],
            "total_selected": self.total_selected,
            "weights": [[float(v) for v in w] for w in self.weights],
        }
        if self.mse is not None:
            d["mean_mse"] = float(np.mean(self.mse))
            d["mean_psnr"] = _finite(float(np.mean(self.psnr)))
        return d


def _finite(v):
    return PSNR_SENTINEL if math.isinf(v) else v


def denoise_images(coeffs, basis, selection, weights, renderer=None):
    """Filtered reconstruction: mean + sum over selected (k, l) of h c^i_{k,l} times the eigenimage.

    Returns an ImageStack of real L x L images.
    """
    if len(selection) != basis.k_max + 1 or len(weights) != basis.k_max + 1:
        raise ConfigurationError("selection/weights do not match the steerable basis")
    if coeffs.spec.n_coeffs != basis.spec.n_coeffs:
        raise ConfigurationError("coefficients and steerable basis use different bases")
    c = spca_coeffs(coeffs, basis.eigvecs, basis.mean)
    out = np.empty_like(coeffs.values)
    off = coeffs.spec.offsets
    for k, U in enumerate(basis.eigvecs):
        filt = np.where(selection[k], weights[k], 0.0)
        out[:, off[k] : off[k + 1]] = (c.block(k) * filt[None, :]) @ U.T
    out[:, : off[1]] += basis.mean[None, :]
    if renderer is None:
        renderer = RealSpaceRenderer(coeffs.spec, coeffs.L)
    return ImageStack(renderer.render(out))


def metrics(clean, test, R):
    """Per-image MSE over pixels with r <= R and PSNR with the clean disk peak."""
    a, b = as_images(clean), as_images(test)
    if a.shape != b.shape:
        raise ValueError(f"stacks differ in shape: {a.shape} vs {b.shape}")
    r, _ = pixel_polar(a.shape[-1])
    mask = r <= R
    if not mask.any():
        raise ValueError("no pixels inside the metric disk")
    diff = (a[:, mask] - b[:, mask]) ** 2
    mse = diff.mean(axis=1)
    peak = np.abs(a[:, mask]).max(axis=1)
    with np.errstate(divide="ignore"):
        psnr = 10 * np.log10(peak**2 / mse)
    psnr = np.where(mse == 0, np.inf, psnr)
    return mse, psnr


def denoise_stack(
    stack,
    c=None,
    R=None,
    sigma2=None,
    mode="spiked",
    fraction=0.999,
    eps=DEFAULT_EPS,
    block_size=1024,
    clean=None,
    metric_R=None,
):
    """Full pipeline: estimate parameters, expand, steerable PCA, select, shrink, reconstruct.

    Unspecified ``sigma2``, ``R`` and ``c`` are estimated from the data.
    Returns (denoised ImageStack, DenoiseReport); metrics are filled in when
    ``clean`` is given (disk radius ``metric_R``, default the support R).
    """
    images = as_images(stack)
    L = images.shape[-1]
    if sigma2 is None:
        sigma2 = estimate_noise_variance(images)
    if R is None:
        R = estimate_support(images, sigma2, fraction)
    if c is None:
        c = estimate_bandlimit(images, sigma2, fraction)
    R = int(min(max(R, 2), L // 2))
    c = float(min(max(c, 1.0 / R), 0.5))
    spec = build_basis(c, R)
    coeffs = expand(images, spec, eps=eps, block_size=block_size)
    basis = steerable_pca(coeffs)
    model = NoiseModel(sigma2, coeffs.n, spec.p)
    selection = select_components(basis, model)
    weights = [shrink_eigenvalues(lam, sigma2, g, mode)[1] for lam, g in zip(basis.eigvals, model.gamma)]
    out = denoise_images(coeffs, basis, selection, weights)
    report = DenoiseReport(
        sigma2=sigma2, c=c, R=R, selected=[int(s.sum()) for s in selection], weights=weights, mode=mode
    )
    if clean is not None:
        report.mse, report.psnr = metrics(clean, out, R if metric_R is None else metric_R)
    return out, report


def pca_denoise(stack, R, sigma2, mode="spiked"):
    """Dense pixel-PCA denoiser on the disk of radius R, with the same selection and shrinkage.

    Pixels outside the disk are set to the sample mean image.
    """
    images = as_images(stack)
    pca = baseline_pca(images, R)
    d = pca.eigvecs.shape[0]
    gamma = d / pca.n
    edge = sigma2 * (1 + np.sqrt(gamma)) ** 2
    lam = pca.eigvals
    _, h = shrink_eigenvalues(lam, sigma2, gamma, mode)
    h = np.where(lam > edge, h, 0.0)
    X = images[:, pca.mask] - pca.mean[None, :]
    coef = X @ pca.eigvecs
    recon = (coef * h[None, :]) @ pca.eigvecs.T + pca.mean[None, :]
    out = np.broadcast_to(images.mean(axis=0), images.shape).copy()
    out[:, pca.mask] = recon
    return ImageStack(out), int((lam > edge).sum())

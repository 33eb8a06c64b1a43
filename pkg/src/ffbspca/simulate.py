"""Synthetic image stacks: white noise, band-limited phantoms, CTF envelope, shifts.

Random streams: every per-image draw comes from
``numpy.random.default_rng([seed, i, purpose])`` with purpose 0 for noise,
1 for phantom rotation angles and 2 for shifts, so any subset of a stack can
be regenerated on its own and nothing depends on batching or workers. Class
templates are drawn from ``default_rng([seed, 2**32 - 1, 3])``.
"""
from dataclasses import dataclass

import numpy as np

from .basis import RealSpaceRenderer
from .errors import ConfigurationError
from .fbcoeff import FBCoeffs
from .stack import ImageStack, as_images

__all__ = [
    "CtfParams",
    "apply_ctf_envelope",
    "apply_shifts",
    "ctf_envelope",
    "default_decay",
    "gen_bandlimited_stack",
    "gen_noise_stack",
    "noise_blocks",
    "unshift",
]

_NOISE, _ROTATION, _SHIFT, _TEMPLATE = 0, 1, 2, 3


def _image_rng(seed, i, purpose):
    return np.random.default_rng([int(seed), int(i), purpose])


def gen_noise_stack(n, L, sigma, seed=0, start=0):
    """i.i.d. N(0, sigma^2) pixels; image i uses the noise stream of index start + i."""
    if sigma < 0:
        raise ValueError("noise level must be non-negative")
    data = np.empty((n, L, L))
    for i in range(n):
        data[i] = _image_rng(seed, start + i, _NOISE).standard_normal((L, L))
    data *= sigma
    return ImageStack(data)


def noise_blocks(n, L, sigma, seed=0, block=1024):
    """Yield consecutive slices of ``gen_noise_stack(n, L, sigma, seed)`` of at most ``block`` images."""
    for s in range(0, n, block):
        yield gen_noise_stack(min(block, n - s), L, sigma, seed, start=s)


def default_decay(spec):
    """Amplitude profile exp(-(k^2 + q^2) / tau^2) with tau = k_max / 3."""
    tau = max(spec.k_max / 3.0, 1.0)
    k = np.repeat(np.arange(spec.k_max + 1), spec.p)
    q = np.concatenate([np.arange(1, p + 1) for p in spec.p])
    return np.exp(-(k**2 + q**2) / tau**2)


def gen_bandlimited_stack(spec, n, L, n_classes=1, energy_decay=None, seed=0, rotate=True):
    """Phantom stack rendered from random Fourier-Bessel coefficients.

    ``n_classes`` templates are drawn with Gaussian amplitudes times
    ``energy_decay`` (an array over packed coefficients or a callable
    ``f(k, q)``); k = 0 amplitudes are real. Image i shows template
    ``i % n_classes``, rotated by a uniform random angle when ``rotate``.
    Returns the ImageStack and the exact FBCoeffs of every image.
    """
    if n_classes < 1:
        raise ValueError("need at least one class")
    k_idx = np.repeat(np.arange(spec.k_max + 1), spec.p)
    if energy_decay is None:
        decay = default_decay(spec)
    elif callable(energy_decay):
        q_idx = np.concatenate([np.arange(1, p + 1) for p in spec.p])
        decay = np.asarray(energy_decay(k_idx, q_idx), float) * np.ones(spec.n_coeffs)
    else:
        decay = np.broadcast_to(np.asarray(energy_decay, float), (spec.n_coeffs,))
    rng = np.random.default_rng([int(seed), 2**32 - 1, _TEMPLATE])
    templates = rng.standard_normal((n_classes, spec.n_coeffs)) + 1j * rng.standard_normal((n_classes, spec.n_coeffs))
    templates[:, k_idx == 0] = np.sqrt(2.0) * templates[:, k_idx == 0].real
    templates *= decay[None, :] / np.sqrt(2.0)
    coeffs = templates[np.arange(n) % n_classes]
    if rotate:
        alpha = np.array([_image_rng(seed, i, _ROTATION).uniform(0, 2 * np.pi) for i in range(n)])
        coeffs = coeffs * np.exp(-1j * np.outer(alpha, k_idx))
    images = RealSpaceRenderer(spec, L).render(coeffs)
    return ImageStack(images), FBCoeffs(spec, coeffs, L)


@dataclass(frozen=True)
class CtfParams:
    """CTF envelope parameters; lengths in Angstrom, phase in radians."""

    wavelength: float = 0.0197
    defocus: float = 25000.0
    phase: float = 0.1
    B: float = 100.0
    pixel_size: float = 1.0

    def __post_init__(self):
        for name in ("wavelength", "defocus", "pixel_size"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"CTF {name} must be positive")
        if self.B < 0:
            raise ConfigurationError("CTF envelope decay B must be non-negative")
        if not 0 <= self.phase < np.pi / 2:
            raise ConfigurationError("CTF phase must lie in [0, pi/2)")

    @property
    def crossover(self):
        """Frequency (1/Angstrom) where the ramp reaches the plateau."""
        return np.sqrt((1 - self.phase) / (np.pi * self.wavelength * self.defocus))


def ctf_envelope(f, params):
    """min(pi lambda z f^2 + a, 1) * exp(-B f^2) at physical frequency f (1/Angstrom)."""
    f2 = np.asarray(f, float) ** 2
    ramp = np.minimum(np.pi * params.wavelength * params.defocus * f2 + params.phase, 1.0)
    return ramp * np.exp(-params.B * f2)


def apply_ctf_envelope(stack, params):
    """Filter every image by the CTF envelope in the DFT domain."""
    images = as_images(stack)
    L = images.shape[-1]
    fr = np.fft.fftfreq(L) / params.pixel_size
    f = np.hypot(fr[:, None], fr[None, :])
    H = ctf_envelope(f, params)
    out = np.fft.ifft2(np.fft.fft2(images, axes=(1, 2)) * H, axes=(1, 2)).real
    return ImageStack(out, params.pixel_size)


def apply_shifts(stack, max_shift, seed=0):
    """Circularly shift image i by an integer offset drawn uniformly from [-max_shift, max_shift]^2.

    Returns (stack, shifts) with shifts of shape (n, 2).
    """
    images = as_images(stack)
    n, L, _ = images.shape
    if max_shift < 0 or max_shift > L / 4:
        raise ConfigurationError(f"max shift must lie in [0, L/4] = [0, {L / 4:g}], got {max_shift}")
    shifts = np.array(
        [_image_rng(seed, i, _SHIFT).integers(-max_shift, max_shift, size=2, endpoint=True) for i in range(n)],
        dtype=np.int64,
    ).reshape(n, 2)
    out = np.empty_like(images)
    for i in range(n):
        out[i] = np.roll(images[i], tuple(shifts[i]), axis=(0, 1))
    pix = stack.pixel_size if isinstance(stack, ImageStack) else 1.0
    return ImageStack(out, pix), shifts


def unshift(stack, shifts):
    """Undo :func:`apply_shifts`."""
    images = as_images(stack)
    out = np.empty_like(images)
    for i in range(images.shape[0]):
        out[i] = np.roll(images[i], tuple(-np.asarray(shifts[i])), axis=(0, 1))
    pix = stack.pixel_size if isinstance(stack, ImageStack) else 1.0
    return ImageStack(out, pix)

"""In-memory image stack container."""
from dataclasses import dataclass

import numpy as np

__all__ = ["ImageStack", "as_images", "centered_indices"]


@dataclass
class ImageStack:
    """``n`` real square images, ``data[i, x, y]``, with pixel size in Angstrom."""

    data: np.ndarray
    pixel_size: float = 1.0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[None]
        if data.ndim != 3 or data.shape[1] != data.shape[2]:
            raise ValueError(f"images must be square, got array of shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("image stack contains non-finite values")
        if not self.pixel_size > 0:
            raise ValueError("pixel size must be positive")
        self.data = data
        self.pixel_size = float(self.pixel_size)

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def L(self):
        return self.data.shape[1]

    def __len__(self):
        return self.n

    def __getitem__(self, idx):
        return ImageStack(self.data[idx], self.pixel_size)


def as_images(stack):
    """Return the ``(n, L, L)`` float array behind an ImageStack or array."""
    if isinstance(stack, ImageStack):
        return stack.data
    data = np.asarray(stack, dtype=np.float64)
    if data.ndim == 2:
        data = data[None]
    if data.ndim != 3 or data.shape[1] != data.shape[2]:
        raise ValueError(f"images must be square, got array of shape {data.shape}")
    return data


def centered_indices(L):
    """Pixel indices -ceil((L-1)/2) .. floor((L-1)/2)."""
    return np.arange(L) - int(np.ceil((L - 1) / 2))

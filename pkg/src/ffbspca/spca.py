"""Steerable PCA: rotation- and reflection-invariant covariance in the Fourier-Bessel basis.

Averaging the sample covariance over all in-plane rotations and reflections
makes it block diagonal in k. The k = 0 block is built from the real,
mean-centred coefficients; every k >= 1 block is Re{A A^*} / n. Each block is
decomposed on its own, giving radial eigenfunctions times angular harmonics.
"""
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigurationError
from .fbcoeff import FBCoeffs, mean_coeffs
from .stack import as_images

__all__ = [
    "BlockCovariance",
    "CovarianceAccumulator",
    "DensePCA",
    "SPCACoeffs",
    "SteerableBasis",
    "baseline_pca",
    "block_covariance",
    "block_eig",
    "block_svd",
    "radial_eigenfunctions",
    "spca_coeffs",
    "steerable_pca",
]


@dataclass(eq=False)
class BlockCovariance:
    """Per-k real symmetric blocks C^(k), the k = 0 mean, and the sample count."""

    blocks: list
    mean: np.ndarray
    n: int

    @property
    def k_max(self):
        return len(self.blocks) - 1

    def total_variance(self):
        return sum((1.0 if k == 0 else 2.0) * np.trace(C) for k, C in enumerate(self.blocks))


def _sym(C):
    return 0.5 * (C + C.T)


def block_covariance(coeffs, mean=None):
    """Block-diagonal covariance of the rotation/reflection-augmented coefficients.

    The k = 0 block is centred on ``mean`` (default: the sample mean).
    """
    if coeffs.n < 1:
        raise ValueError("covariance of an empty coefficient set")
    n = coeffs.n
    mu = mean_coeffs(coeffs) if mean is None else np.asarray(mean, float)
    blocks = []
    for k in range(coeffs.spec.k_max + 1):
        A = coeffs.block(k)
        if k == 0:
            X = A.real - mu[None, :]
            C = X.T @ X / n
        else:
            X, Y = A.real, A.imag
            C = (X.T @ X + Y.T @ Y) / n
        blocks.append(_sym(C))
    return BlockCovariance(blocks=blocks, mean=mu, n=n)


class CovarianceAccumulator:
    """Streaming version of :func:`block_covariance` for stacks that do not fit in memory.

    Sums are accumulated block by block in the order the batches arrive; the
    k = 0 block is centred at the end using the accumulated first moment.
    """

    def __init__(self, spec):
        self.spec = spec
        self.n = 0
        self.s0 = np.zeros(spec.p[0])
        self.blocks = [np.zeros((p, p)) for p in spec.p]

    def add(self, coeffs):
        if coeffs.spec is not self.spec and coeffs.spec != self.spec:
            raise ConfigurationError("coefficients were computed in a different basis")
        self.n += coeffs.n
        for k in range(self.spec.k_max + 1):
            A = coeffs.block(k)
            X = A.real
            if k == 0:
                self.s0 += X.sum(axis=0)
                self.blocks[0] += X.T @ X
            else:
                Y = A.imag
                self.blocks[k] += X.T @ X + Y.T @ Y
        return self

    def result(self):
        if self.n < 1:
            raise ValueError("no coefficients were accumulated")
        mu = self.s0 / self.n
        blocks = [_sym(B / self.n) for B in self.blocks]
        blocks[0] = _sym(blocks[0] - np.outer(mu, mu))
        return BlockCovariance(blocks=blocks, mean=mu, n=self.n)


def _fix_signs(U):
    """Flip columns so that the first non-negligible entry of each is positive."""
    if U.size == 0:
        return U
    tol = 1e-12 * np.abs(U).max(axis=0, keepdims=True)
    first = np.argmax(np.abs(U) > tol, axis=0)
    s = np.sign(U[first, np.arange(U.shape[1])])
    s[s == 0] = 1.0
    return U * s[None, :]


def _eig_sorted(C):
    lam, U = np.linalg.eigh(C)
    order = np.argsort(lam)[::-1]
    return lam[order], _fix_signs(U[:, order])


def block_eig(cov):
    """Eigenvalues (descending) and eigenvectors of every covariance block."""
    out = []
    for k, C in enumerate(cov.blocks):
        try:
            out.append(_eig_sorted(C))
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"eigendecomposition failed for block k={k}") from exc
    return out


def _svd_block(A, k, mu, n):
    if k == 0:
        X = (A.real - mu[None, :]) / np.sqrt(n)
    else:
        X = np.vstack([A.real, A.imag]) / np.sqrt(n)
    p = X.shape[1]
    try:
        _, s, Vt = scipy.linalg.svd(X, full_matrices=X.shape[0] < p, lapack_driver="gesdd")
    except (np.linalg.LinAlgError, ValueError):
        _, s, Vt = scipy.linalg.svd(X, full_matrices=X.shape[0] < p, lapack_driver="gesvd")
    lam = np.zeros(p)
    lam[: s.size] = s**2
    order = np.argsort(lam, kind="stable")[::-1]
    return lam[order], _fix_signs(Vt.T[:, order])


def block_svd(coeffs, mean=None):
    """Same eigenpairs as :func:`block_eig`, from SVDs of the stacked real coefficient blocks."""
    mu = mean_coeffs(coeffs) if mean is None else np.asarray(mean, float)
    out = []
    for k in range(coeffs.spec.k_max + 1):
        try:
            out.append(_svd_block(coeffs.block(k), k, mu, coeffs.n))
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"SVD failed for block k={k}") from exc
    return out


def radial_eigenfunctions(table, eigvecs):
    """f^{k,l}(xi_j) = sum_q table[k][q, j] u_l^(k)(q); returns a list of (p_k, n_xi) arrays."""
    return [U.T @ V for U, V in zip(eigvecs, table.values)]


@dataclass(eq=False)
class SteerableBasis:
    """Per-k eigenvalues, eigenvectors (columns), radial samples, and the k = 0 mean."""

    spec: object = field(repr=False)
    eigvals: list
    eigvecs: list
    mean: np.ndarray
    n: int
    radial: list = None
    xi: np.ndarray = None

    @property
    def k_max(self):
        return len(self.eigvals) - 1

    def header(self):
        return {
            "c": self.spec.c,
            "R": self.spec.R,
            "k": list(range(self.k_max + 1)),
            "p": [int(v) for v in self.spec.p],
            "n": int(self.n),
            "eigenvalues": [[float(v) for v in lam] for lam in self.eigvals],
        }

    def to_json(self):
        return json.dumps(self.header())


def steerable_pca(coeffs, table=None, route="auto"):
    """Eigen-decompose every covariance block of ``coeffs``.

    ``route`` is ``"eig"``, ``"svd"`` or ``"auto"``; auto uses the SVD for
    blocks with fewer samples than coefficients and the covariance
    eigendecomposition otherwise.
    """
    if route not in ("auto", "eig", "svd"):
        raise ConfigurationError(f"unknown decomposition route {route!r}")
    mu = mean_coeffs(coeffs)
    eigvals, eigvecs = [], []
    n = coeffs.n
    for k in range(coeffs.spec.k_max + 1):
        A = coeffs.block(k)
        samples = n if k == 0 else 2 * n
        use_svd = route == "svd" or (route == "auto" and samples < A.shape[1])
        if use_svd:
            lam, U = _svd_block(A, k, mu, n)
        else:
            if k == 0:
                X = A.real - mu[None, :]
                C = X.T @ X / n
            else:
                C = (A.real.T @ A.real + A.imag.T @ A.imag) / n
            lam, U = _eig_sorted(_sym(C))
        eigvals.append(lam)
        eigvecs.append(U)
    basis = SteerableBasis(spec=coeffs.spec, eigvals=eigvals, eigvecs=eigvecs, mean=mu, n=n)
    if table is not None:
        basis.radial = radial_eigenfunctions(table, eigvecs)
        basis.xi = table.xi
    return basis


def basis_from_covariance(spec, cov, table=None):
    """Build a SteerableBasis from an (accumulated) BlockCovariance."""
    pairs = block_eig(cov)
    basis = SteerableBasis(
        spec=spec, eigvals=[p[0] for p in pairs], eigvecs=[p[1] for p in pairs], mean=cov.mean, n=cov.n
    )
    if table is not None:
        basis.radial = radial_eigenfunctions(table, basis.eigvecs)
        basis.xi = table.xi
    return basis


@dataclass(eq=False)
class SPCACoeffs:
    """Coefficients c[i, (k, l)] in the steerable basis, packed like FBCoeffs."""

    spec: object = field(repr=False)
    values: np.ndarray
    L: int

    def block(self, k):
        off = self.spec.offsets
        return self.values[:, off[k] : off[k + 1]]

    @property
    def n(self):
        return self.values.shape[0]


def spca_coeffs(coeffs, eigvecs, mean=None):
    """c^i_{k,l} = sum_q a^i_{k,q} u_l^(k)(q), after centring the k = 0 block."""
    mu = mean_coeffs(coeffs) if mean is None else np.asarray(mean, float)
    out = np.empty_like(coeffs.values)
    off = coeffs.spec.offsets
    for k, U in enumerate(eigvecs):
        A = coeffs.block(k)
        if k == 0:
            A = A.real - mu[None, :]
        out[:, off[k] : off[k + 1]] = A @ U
    return SPCACoeffs(spec=coeffs.spec, values=out, L=coeffs.L)


@dataclass(eq=False)
class DensePCA:
    """Pixel-space PCA restricted to a disk: eigenimages as columns over the disk pixels."""

    eigvals: np.ndarray
    eigvecs: np.ndarray
    mean: np.ndarray
    mask: np.ndarray
    n: int


MAX_DENSE_L = 128


def _disk_mask(L, R):
    from .basis import pixel_polar

    r, _ = pixel_polar(L)
    return r <= R


def baseline_pca(stack, R):
    """Ordinary PCA over the pixels within radius R (no rotations)."""
    images = as_images(stack)
    n, L, _ = images.shape
    if L > MAX_DENSE_L:
        raise ConfigurationError(f"dense PCA baseline is limited to L <= {MAX_DENSE_L}, got {L}")
    if n < 1:
        raise ValueError("PCA of an empty stack")
    mask = _disk_mask(L, R)
    X = images[:, mask]
    mu = X.mean(axis=0)
    X = X - mu[None, :]
    d = X.shape[1]
    if n >= d:
        lam, U = _eig_sorted(_sym(X.T @ X / n))
    else:
        _, s, Vt = scipy.linalg.svd(X / np.sqrt(n), full_matrices=False)
        lam, U = s**2, _fix_signs(Vt.T)
    return DensePCA(eigvals=lam, eigvecs=U, mean=mu, mask=mask, n=n)

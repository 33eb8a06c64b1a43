"""Bessel functions of integer order, their zeros, and Gauss-Legendre rules.

Everything here is double precision and vectorised over the argument ``x``.
Two evaluation regimes are used for J_k(x):

* ``x < max(k, 20)``: Miller backward recurrence from a high starting order,
  normalised with the Neumann sum ``1 = J_0 + 2 * sum_m J_{2m}``.
* ``x >= max(k, 20)``: Hankel asymptotic expansion for J_0 and J_1 followed by
  forward recurrence, which is stable while the order stays below ``x``.

Arguments below 1e-6 use the first two power-series terms instead, which
also keeps the recurrence away from overflow at subnormal ``x``.
"""
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import BracketError

__all__ = [
    "QuadratureRule",
    "bessel_j",
    "bessel_j_orders",
    "bessel_jp",
    "bessel_zero",
    "bessel_zeros",
    "breen_bracket",
    "gauss_legendre",
]

_FORWARD_MIN_X = 20.0
_SERIES_MAX_X = 1e-6


def _check_order(k):
    if int(k) != k or k < 0:
        raise ValueError(f"Bessel order must be a non-negative integer, got {k!r}")
    return int(k)


def _check_arg(x):
    x = np.asarray(x, dtype=np.float64)
    if np.any(~np.isfinite(x)):
        raise ValueError("Bessel argument must be finite")
    if np.any(x < 0):
        raise ValueError("Bessel argument must be non-negative")
    return x


@njit(cache=True)
def _miller_orders(kmax, x):
    """All orders 0..kmax at positive ``x`` (1-d) by normalised backward recurrence."""
    out = np.zeros((kmax + 1, x.size))
    for i in range(x.size):
        xi = x[i]
        n = max(kmax, int(np.ceil(xi)), 1)
        m = n + 20 + int(np.sqrt(60.0 * n))
        m += m % 2
        b_next = 0.0
        b = 1e-300
        norm = 0.0
        for j in range(m, 0, -1):
            b_prev = j * (2.0 / xi) * b - b_next
            b_next = b
            b = b_prev
            if j - 1 <= kmax:
                out[j - 1, i] = b
            if (j - 1) % 2 == 0 and j > 1:
                norm += 2.0 * b
            if abs(b) > 1e200:
                b *= 1e-200
                b_next *= 1e-200
                norm *= 1e-200
                for jj in range(j - 1, kmax + 1):
                    out[jj, i] *= 1e-200
        norm += b
        for jj in range(kmax + 1):
            out[jj, i] /= norm
    return out


@njit(cache=True)
def _miller_single(k, x):
    out = np.empty(x.size)
    for i in range(x.size):
        xi = x[i]
        n = max(k, int(np.ceil(xi)), 1)
        m = n + 20 + int(np.sqrt(60.0 * n))
        m += m % 2
        b_next = 0.0
        b = 1e-300
        norm = 0.0
        val = 0.0
        for j in range(m, 0, -1):
            b_prev = j * (2.0 / xi) * b - b_next
            b_next = b
            b = b_prev
            if j - 1 == k:
                val = b
            if (j - 1) % 2 == 0 and j > 1:
                norm += 2.0 * b
            if abs(b) > 1e200:
                b *= 1e-200
                b_next *= 1e-200
                norm *= 1e-200
                if j - 1 <= k:
                    val *= 1e-200
        out[i] = val / (norm + b)
    return out


@njit(cache=True)
def _hankel_j01(x):
    """J_0(x), J_1(x) for x >= 20 from the Hankel asymptotic expansion."""
    res = np.empty(2)
    for nu in range(2):
        mu = 4.0 * nu * nu
        p = 1.0
        q = 0.0
        term = 1.0
        for j in range(1, 120):
            term = term * (mu - (2 * j - 1) ** 2) / (j * 8.0 * x)
            r = j % 4
            if r == 1:
                q += term
            elif r == 2:
                p -= term
            elif r == 3:
                q -= term
            else:
                p += term
            if abs(term) < 1e-17:
                break
        chi = x - (0.5 * nu + 0.25) * np.pi
        res[nu] = np.sqrt(2.0 / (np.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))
    return res


@njit(cache=True)
def _forward_single(k, x):
    """J_k at ``x >= max(k, 20)`` from asymptotic J_0, J_1 and forward recurrence."""
    out = np.empty(x.size)
    for i in range(x.size):
        xi = x[i]
        j01 = _hankel_j01(xi)
        j0 = j01[0]
        j1 = j01[1]
        if k == 0:
            out[i] = j0
            continue
        for m in range(1, k):
            j0, j1 = j1, (2.0 * m / xi) * j1 - j0
        out[i] = j1
    return out


@njit(cache=True)
def _forward_fill(kmax, x, out):
    """Overwrite out[m, i] by forward recurrence wherever m <= x[i] and x[i] >= 20."""
    for i in range(x.size):
        xi = x[i]
        if xi < 20.0:
            continue
        j01 = _hankel_j01(xi)
        j0 = j01[0]
        j1 = j01[1]
        out[0, i] = j0
        if kmax >= 1:
            out[1, i] = j1
        for m in range(1, kmax):
            if m + 1 > xi:
                break
            j0, j1 = j1, (2.0 * m / xi) * j1 - j0
            out[m + 1, i] = j1


def _series(k, x):
    """Two-term power series (x/2)^k / k! * (1 - x^2 / (4 (k + 1))), for tiny x."""
    with np.errstate(divide="ignore", under="ignore"):
        lead = np.exp(k * np.log(0.5 * x) - math.lgamma(k + 1)) if k else np.ones_like(x)
    return lead * (1.0 - x * x / (4.0 * (k + 1)))


def bessel_j(k, x):
    """Bessel function of the first kind J_k(x) for integer ``k >= 0`` and ``x >= 0``."""
    k = _check_order(k)
    x = _check_arg(x)
    scalar = x.ndim == 0
    xf = np.atleast_1d(x).ravel()
    res = np.empty_like(xf)
    zero = xf == 0.0
    res[zero] = 1.0 if k == 0 else 0.0
    tiny = (~zero) & (xf < _SERIES_MAX_X)
    if tiny.any():
        res[tiny] = _series(k, xf[tiny])
    fwd = (~zero) & (xf >= max(k, _FORWARD_MIN_X))
    bwd = (~zero) & (~tiny) & ~fwd
    if fwd.any():
        res[fwd] = _forward_single(k, xf[fwd])
    if bwd.any():
        res[bwd] = _miller_single(k, xf[bwd])
    res = res.reshape(np.shape(x))
    return float(res) if scalar else res


def bessel_j_orders(kmax, x):
    """J_0..J_kmax at every point of ``x``; returns shape ``(kmax + 1,) + x.shape``.

    Same regime split as :func:`bessel_j`, done in one sweep per point.
    """
    kmax = _check_order(kmax)
    x = _check_arg(x)
    xf = np.atleast_1d(x).ravel()
    out = np.zeros((kmax + 1, xf.size))
    zero = xf == 0.0
    out[0, zero] = 1.0
    tiny = (~zero) & (xf < _SERIES_MAX_X)
    if tiny.any():
        for k in range(kmax + 1):
            out[k, tiny] = _series(k, xf[tiny])
    pos = (~zero) & (~tiny)
    if pos.any():
        vals = _miller_orders(kmax, xf[pos])
        _forward_fill(kmax, xf[pos], vals)
        out[:, pos] = vals
    return out.reshape((kmax + 1,) + np.shape(x))


def bessel_jp(k, x):
    """Derivative J_k'(x)."""
    k = _check_order(k)
    if k == 0:
        return -bessel_j(1, x)
    return 0.5 * (bessel_j(k - 1, x) - bessel_j(k + 1, x))


def _airy_zero_bounds(q):
    """Bounds on |a_q|, the q-th zero of Ai, valid for q >= 1."""
    lo = (3.0 / 8.0 * np.pi * (4 * q - 1.4)) ** (2.0 / 3.0)
    hi = (3.0 / 8.0 * np.pi * (4 * q - 0.965)) ** (2.0 / 3.0)
    return lo, hi


def breen_bracket(k, q):
    """Breen's lower/upper bounds for the q-th positive zero of J_k.

    Lower: ``k + 2/3 |a_{q-1}|^{3/2}`` with the lower Airy-zero bound
    (``k`` itself for q = 1). Upper: ``(k/2 + q - 0.965/4) * pi``.
    The upper bound is violated at (k, q) = (0, 1), where j_{0,1} = 2.4048
    exceeds 2.3837; callers must not rely on it there.
    """
    k = _check_order(k)
    if q < 1:
        raise ValueError("zero index q must be >= 1")
    if q == 1:
        lo = float(k)
    else:
        lo = k + 2.0 / 3.0 * _airy_zero_bounds(q - 1)[0] ** 1.5
    hi = (k / 2.0 + q - 0.965 / 4.0) * np.pi
    return lo, hi


def _refine(k, a, b, fa):
    """Vectorised safeguarded Newton on brackets [a, b] with f(a) = fa."""
    x = 0.5 * (a + b)
    for _ in range(50):
        f = bessel_j(k, x)
        fp = bessel_jp(k, x)
        left = np.sign(f) == np.sign(fa)
        a = np.where(left, x, a)
        b = np.where(left, b, x)
        fa = np.where(left, f, fa)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - f / fp
        bad = ~np.isfinite(xn) | (xn <= a) | (xn >= b)
        xn = np.where(bad, 0.5 * (a + b), xn)
        step = np.abs(xn - x)
        x = xn
        if np.all(step <= 4e-16 * x):
            break
    return x


def bessel_zeros(k, count=None, upto=None):
    """Positive zeros of J_k, either the first ``count`` or all ``<= upto``.

    Zeros are isolated by scanning with a step smaller than the minimal zero
    spacing (> 2.4 for every integer order), then refined by Newton steps
    kept inside each sign-change bracket.
    """
    k = _check_order(k)
    if (count is None) == (upto is None):
        raise ValueError("give exactly one of count, upto")
    h = 0.5
    start = float(k)
    if count is not None:
        if count < 1:
            return np.zeros(0)
        stop = breen_bracket(k, count)[1] + np.pi
    else:
        stop = float(upto) + h
    found = []
    while True:
        grid = start + h * np.arange(int(np.ceil((stop - start) / h)) + 2)
        vals = bessel_j(k, grid)
        s = np.sign(vals)
        idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
        exact = np.nonzero(vals == 0.0)[0]
        roots = []
        if idx.size:
            roots = list(_refine(k, grid[idx], grid[idx + 1], vals[idx]))
        roots += [grid[i] for i in exact if grid[i] > 0]
        found = sorted(roots)
        if count is None or len(found) >= count:
            break
        stop += 4 * np.pi
    found = np.asarray(found)
    if count is not None:
        return found[:count]
    return found[found <= upto]


def bessel_zero(k, q):
    """The q-th positive zero of J_k (q >= 1)."""
    k = _check_order(k)
    if int(q) != q or q < 1:
        raise ValueError(f"zero index must be a positive integer, got {q!r}")
    q = int(q)
    z = bessel_zeros(k, count=q)
    if z.size < q:
        raise BracketError(f"could not isolate zero (k={k}, q={q})")
    x = float(z[q - 1])
    lo, hi = x - 1e-9 * x, x + 1e-9 * x
    if np.sign(bessel_j(k, lo)) == np.sign(bessel_j(k, hi)):
        raise BracketError(f"bracket lost its sign change at (k={k}, q={q})")
    return x


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    a: float
    b: float

    def integrate(self, f):
        return float(np.dot(self.weights, f(self.nodes)))


def gauss_legendre(m, a=-1.0, b=1.0):
    """m-point Gauss-Legendre rule mapped affinely to [a, b]."""
    if int(m) != m or m < 1:
        raise ValueError(f"number of nodes must be a positive integer, got {m!r}")
    if not a < b:
        raise ValueError("interval must satisfy a < b")
    x, w = np.polynomial.legendre.leggauss(int(m))
    half = 0.5 * (b - a)
    return QuadratureRule(nodes=half * x + 0.5 * (a + b), weights=half * w, a=float(a), b=float(b))

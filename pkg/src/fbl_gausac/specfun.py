"""Scalar special functions used by the rate formulas and decoder probabilities.

All functions accept scalars or numpy arrays and return the same shape
(plain ``float`` for scalar input).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import betaln, erfc, gammaln, ndtri

from .errors import DomainError

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)

_CF_EPS = 1e-15
_CF_TINY = 1e-300
_CF_MAXIT = 20000


def _out(x: np.ndarray, like):
    if np.ndim(like) == 0:
        return float(x)
    return x


def gaussian_q(x):
    """Complementary standard normal CDF ``Q(x) = P[N(0,1) > x]``."""
    x = np.asarray(x, dtype=float)
    if np.isnan(x).any():
        raise DomainError("gaussian_q: NaN argument")
    return _out(0.5 * erfc(x / _SQRT2), x)


def gaussian_q_inv(p):
    """Functional inverse of :func:`gaussian_q` on ``(0, 1)``."""
    p = np.asarray(p, dtype=float)
    if np.isnan(p).any() or (p <= 0).any() or (p >= 1).any():
        raise DomainError("gaussian_q_inv: probability must lie in (0, 1)")
    x = -ndtri(p)
    # one Newton step against erfc tightens the tails
    phi = np.exp(-0.5 * x * x) / _SQRT2PI
    with np.errstate(over="ignore", invalid="ignore"):
        step = (0.5 * erfc(x / _SQRT2) - p) / phi
    x = np.where(np.isfinite(step) & (phi > 0), x + step, x)
    return _out(x, p)


_STIRLING = (1 / 12, -1 / 360, 1 / 1260, -1 / 1680, 1 / 1188)
_STIRLING_FROM = 20.0


def _stirling_tail(z):
    zi = 1.0 / z
    z2 = zi * zi
    acc = np.zeros_like(z)
    for c in reversed(_STIRLING):
        acc = acc * z2 + c
    return acc * zi


def _log_beta(a, b):
    """``log B(a, b)``, accurate when one argument is large.

    For ``max(a, b) >= 20`` the gamma-ratio ``log G(b+a) - log G(b)`` is
    evaluated from the Stirling series in a form free of cancellation;
    otherwise scipy's ``betaln`` is accurate already.
    """
    small = np.minimum(a, b)
    big = np.maximum(a, b)
    out = np.asarray(betaln(a, b), dtype=float).copy()
    use = big >= _STIRLING_FROM
    if np.any(use):
        s, z = small[use], big[use]
        ratio = (z - 0.5) * np.log1p(s / z) + s * np.log(z + s) - s + _stirling_tail(z + s) - _stirling_tail(z)
        out[use] = gammaln(s) - ratio
    return out


def _betacf(a, b, x):
    """Continued fraction for the incomplete beta function (modified Lentz).

    Converges fast for ``x < (a + 1) / (a + b + 2)``; callers use the symmetry
    ``I_x(a, b) = 1 - I_{1-x}(b, a)`` otherwise.
    """
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _CF_TINY, _CF_TINY, d)
    d = 1.0 / d
    h = d.copy()
    for m in range(1, _CF_MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _CF_TINY, _CF_TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _CF_TINY, _CF_TINY, c)
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _CF_TINY, _CF_TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _CF_TINY, _CF_TINY, c)
        d = 1.0 / d
        delta = d * c
        h *= delta
        if np.all(np.abs(delta - 1.0) < _CF_EPS):
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc_pair(a, b, x):
    """Regularized incomplete beta ``I_x(a, b)`` and its complement.

    Both values are computed on the rapidly converging side of the symmetry
    relation, so whichever of the two is small keeps full relative accuracy.
    """
    a, b, x = np.broadcast_arrays(
        np.asarray(a, dtype=float), np.asarray(b, dtype=float), np.asarray(x, dtype=float)
    )
    if (a <= 0).any() or (b <= 0).any():
        raise DomainError("betainc_pair: shape parameters must be positive")
    if np.isnan(x).any() or (x < 0).any() or (x > 1).any():
        raise DomainError("betainc_pair: x must lie in [0, 1]")
    lower = np.zeros(x.shape)
    upper = np.ones(x.shape)
    inner = (x > 0) & (x < 1)
    lower[x >= 1] = 1.0
    upper[x >= 1] = 0.0
    if inner.any():
        ai, bi, xi = a[inner], b[inner], x[inner]
        log_front = ai * np.log(xi) + bi * np.log1p(-xi) - _log_beta(ai, bi)
        front = np.exp(log_front)
        direct = xi < (ai + 1.0) / (ai + bi + 2.0)
        lo = np.empty_like(xi)
        hi = np.empty_like(xi)
        if direct.any():
            v = front[direct] * _betacf(ai[direct], bi[direct], xi[direct]) / ai[direct]
            lo[direct] = v
            hi[direct] = 1.0 - v
        flip = ~direct
        if flip.any():
            v = front[flip] * _betacf(bi[flip], ai[flip], 1.0 - xi[flip]) / bi[flip]
            hi[flip] = v
            lo[flip] = 1.0 - v
        lower[inner] = lo
        upper[inner] = hi
    return lower, upper


def betainc_reg(a, b, x):
    """Regularized incomplete beta function ``I_x(a, b)``."""
    lo, _ = betainc_pair(a, b, x)
    return float(lo) if np.ndim(lo) == 0 else lo


def _check_n(n) -> int:
    if int(n) != n or n < 2:
        raise DomainError("sphere coordinate law needs integer n >= 2")
    return int(n)


def _sphere_tail(q, n):
    """``P[Q >= |q|]`` for ``Q = sqrt(n) * (first coordinate on the unit sphere)``."""
    x = np.minimum(q * q / n, 1.0)
    # Q^2 / n ~ Beta(1/2, (n - 1)/2); the upper tail is half the two-sided one
    _, upper = betainc_pair(0.5, (n - 1) / 2.0, x)
    return 0.5 * upper


def sphere_coord_cdf(q, n):
    """CDF of ``sqrt(n)`` times one coordinate of a uniform point on the unit sphere in R^n."""
    n = _check_n(n)
    q = np.asarray(q, dtype=float)
    if np.isnan(q).any():
        raise DomainError("sphere_coord_cdf: NaN argument")
    tail = _sphere_tail(q, n)
    out = np.where(q >= 0, 1.0 - tail, tail)
    out = np.where(q == 0, 0.5, out)
    return _out(out, q)


def sphere_coord_sf(q, n):
    """Survival function ``P[Q >= q]`` matching :func:`sphere_coord_cdf`."""
    n = _check_n(n)
    q = np.asarray(q, dtype=float)
    if np.isnan(q).any():
        raise DomainError("sphere_coord_sf: NaN argument")
    tail = _sphere_tail(q, n)
    out = np.where(q >= 0, tail, 1.0 - tail)
    out = np.where(q == 0, 0.5, out)
    return _out(out, q)


def sphere_coord_pdf(q, n):
    """Density ``c_n (1 - q^2/n)_+^{(n-3)/2}`` of the sphere coordinate law."""
    n = _check_n(n)
    q = np.asarray(q, dtype=float)
    log_c = gammaln(n / 2.0) - gammaln((n - 1) / 2.0) - 0.5 * math.log(math.pi * n)
    base = 1.0 - q * q / n
    inside = base > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(inside, np.exp(log_c + (n - 3) / 2.0 * np.log(np.where(inside, base, 1.0))), 0.0)
    return _out(val, q)


def chi2_tail_bounds(n, t):
    """Laurent-Massart tail bounds for a chi-squared variable with ``n`` degrees of freedom.

    Returns ``(upper, lower)`` where ``upper`` bounds
    ``P[chi2_n - n >= 2 sqrt(n t) + 2 t]`` and ``lower`` bounds
    ``P[chi2_n - n <= -2 sqrt(n t)]``.  Both equal ``exp(-t)``.
    """
    if int(n) != n or n < 1:
        raise DomainError("chi2_tail_bounds: n must be a positive integer")
    if not t > 0:
        raise DomainError("chi2_tail_bounds: t must be positive")
    b = math.exp(-t)
    return b, b


def chi2_deviation_thresholds(n, t):
    """Deviations ``(2 sqrt(n t) + 2 t, 2 sqrt(n t))`` paired with :func:`chi2_tail_bounds`."""
    if not t > 0:
        raise DomainError("t must be positive")
    s = 2.0 * math.sqrt(n * t)
    return s + 2.0 * t, s

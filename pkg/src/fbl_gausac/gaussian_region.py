"""Gaussian achievable-rate regions and related bounds.

The second-order MAC region is described by a Gaussian orthant condition:
a rate tuple is achievable at blocklength ``n`` if ``P[Z <= z] >= 1 - eps``
where ``Z ~ N(0, V)`` uses the dispersion matrix and
``z_S = (n C_S - sum_{s in S} log M_s + 0.5 log n + c0) / sqrt(n)``.
Orthant probabilities are estimated by Monte Carlo.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import ndtri

from . import rng as _rng
from .dispersion import (
    _as_allocation,
    _subset_sums,
    capacity,
    capacity_vector,
    cross_dispersion,
    dispersion_matrix,
    dispersion_v,
    kappa1,
)
from .errors import DomainError, MatrixError
from .estimate import EstimateWithCI, proportion
from .parallel import map_units
from .specfun import gaussian_q_inv

MVN_CHUNK = 1 << 16
PSD_TOL = 1e-10


# ---------------------------------------------------------------- sampling


def _factor(cov: np.ndarray) -> np.ndarray:
    """Matrix ``A`` with ``A A^T = cov``; Cholesky first, eigen-factor for singular input."""
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise MatrixError("covariance must be a square matrix")
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max(initial=0.0))):
        raise MatrixError("covariance must be symmetric")
    cov = 0.5 * (cov + cov.T)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    w, U = np.linalg.eigh(cov)
    scale = max(1.0, float(np.abs(w).max(initial=0.0)))
    if w.min(initial=0.0) < -PSD_TOL * scale:
        raise MatrixError(f"covariance is not positive semidefinite (min eigenvalue {w.min():.3g})")
    return U * np.sqrt(np.clip(w, 0.0, None))


def _mvn_chunk(args):
    seed, chunk, count, A = args
    g = _rng.derive_rng(seed, _rng.STREAM_MVN, chunk)
    return g.standard_normal((count, A.shape[1])) @ A.T


def _chunks(count: int, size: int = MVN_CHUNK) -> list[tuple[int, int]]:
    return [(i, min(size, count - i * size)) for i in range((count + size - 1) // size)]


def mvn_sample(mean, cov, count: int, seed: int) -> np.ndarray:
    """``count`` draws from ``N(mean, cov)`` as a ``(count, d)`` array.

    Draws are generated in fixed-size chunks, each from its own stream, so the
    output depends only on ``seed``.  A singular but PSD covariance is factored
    through its eigendecomposition, which keeps a zero covariance exactly
    degenerate.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    A = _factor(np.atleast_2d(cov))
    if A.shape[0] != mean.shape[0]:
        raise MatrixError("mean and covariance dimensions differ")
    if count <= 0:
        return np.empty((0, mean.shape[0]))
    parts = [_mvn_chunk((seed, c, m, A)) for c, m in _chunks(int(count))]
    return mean + np.concatenate(parts)


def _orthant_chunk(args):
    seed, chunk, m, A, z = args
    Z = _mvn_chunk((seed, chunk, m, A))
    return int(np.count_nonzero(np.all(Z <= z, axis=1)))


def lower_orthant_prob(cov, z, count: int, seed: int, workers: int | None = 1, confidence: float = 0.95) -> EstimateWithCI:
    """Monte Carlo estimate of ``P[Z <= z]`` (elementwise) for ``Z ~ N(0, cov)``."""
    A = _factor(np.atleast_2d(cov))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (A.shape[0],):
        raise MatrixError(f"threshold has shape {z.shape}, covariance is {A.shape}")
    units = [(seed, c, m, A, z) for c, m in _chunks(int(count))]
    hits = sum(map_units(_orthant_chunk, units, workers))
    return proportion(hits, int(count), confidence)


# ---------------------------------------------------------------- rate tuples


@dataclass(frozen=True)
class RateTuple:
    """``sum_{s in S} log M_s`` for every nonempty subset ``S``, in canonical order (nats)."""

    K: int
    values: np.ndarray = field(repr=False)

    @classmethod
    def from_log_m(cls, log_m: Sequence[float]) -> "RateTuple":
        arr = np.asarray(log_m, dtype=float)
        return cls(len(arr), _subset_sums(arr)[1:])

    @classmethod
    def symmetric(cls, K: int, log_m: float) -> "RateTuple":
        return cls.from_log_m([float(log_m)] * int(K))

    def __getitem__(self, mask: int) -> float:
        return float(self.values[mask - 1])

    def per_user(self) -> np.ndarray:
        return np.array([self.values[(1 << i) - 1] for i in range(self.K)])


class Verdict(str, enum.Enum):
    ACHIEVABLE = "achievable"
    NOT = "not"
    UNCERTAIN = "uncertain"


def _check_n_eps(n, eps):
    if not n >= 2:
        raise DomainError("blocklength must be at least 2")
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")


def region_threshold(n: float, pa, rt: RateTuple, c0: float = 0.0) -> np.ndarray:
    """Orthant corner ``(n C - rt + 0.5 log n + c0) / sqrt(n)``."""
    pa = _as_allocation(pa)
    if rt.K != pa.K:
        raise DomainError("rate tuple and power allocation have different K")
    C = capacity_vector(pa).values
    return (n * C - rt.values + 0.5 * math.log(n) + c0) / math.sqrt(n)


def rate_tuple_achievable(
    n: float,
    eps: float,
    pa,
    rt: RateTuple,
    c0: float = 0.0,
    count: int = 100_000,
    seed: int = 0,
    workers: int | None = 1,
) -> tuple[Verdict, EstimateWithCI]:
    """Test whether ``rt`` lies in the second-order achievable region.

    Returns the verdict together with the orthant-probability estimate.  The
    verdict is ``UNCERTAIN`` when ``1 - eps`` falls inside the estimate's
    confidence interval.
    """
    _check_n_eps(n, eps)
    pa = _as_allocation(pa)
    V = dispersion_matrix(pa).values
    z = region_threshold(n, pa, rt, c0)
    est = lower_orthant_prob(V, z, count, seed, workers)
    target = 1.0 - eps
    if est.contains(target):
        return Verdict.UNCERTAIN, est
    return (Verdict.ACHIEVABLE if est.point > target else Verdict.NOT), est


@dataclass(frozen=True)
class RayBoundary:
    """Largest scale ``t`` with ``t * direction`` achievable, with an order-statistic interval."""

    scale: float
    low: float
    high: float
    samples: int

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.high


def boundary_along_ray(
    n: float,
    eps: float,
    pa,
    direction: Sequence[float],
    c0: float = 0.0,
    count: int = 100_000,
    seed: int = 0,
    confidence: float = 0.95,
) -> RayBoundary:
    """Boundary of the region along ``log M = t * direction`` for ``t >= 0``.

    With common random numbers the achievable set of scales is
    ``{t : #{i : T_i >= t} >= (1 - eps) N}`` where ``T_i`` is the largest scale
    at which sample ``i`` satisfies every subset inequality.  The boundary is
    therefore an order statistic of ``T``; no iterative search is needed and
    the answer is exact for the sample.  The interval comes from the binomial
    distribution of the number of samples below the true quantile.
    """
    _check_n_eps(n, eps)
    pa = _as_allocation(pa)
    d = np.asarray(direction, dtype=float)
    if d.shape != (pa.K,) or (d < 0).any() or not (d > 0).any():
        raise DomainError("direction must be a nonnegative, nonzero per-user vector")
    V = dispersion_matrix(pa).values
    a = region_threshold(n, pa, RateTuple.symmetric(pa.K, 0.0), c0)
    b = _subset_sums(d)[1:] / math.sqrt(n)
    Z = mvn_sample(np.zeros(len(a)), V, count, seed)
    slack = a - Z
    pos = b > 0
    T = np.min(slack[:, pos] / b[pos], axis=1)
    if (~pos).any():
        T = np.where(np.all(slack[:, ~pos] >= 0, axis=1), T, -np.inf)
    T.sort()
    N = len(T)
    # scale t is achievable iff at least ceil((1-eps) N) samples have T_i >= t
    need = math.ceil((1.0 - eps) * N - 1e-9)
    idx = N - need
    zc = float(ndtri(0.5 + confidence / 2.0))
    spread = zc * math.sqrt(N * eps * (1 - eps))
    lo_i = max(int(math.floor(idx - spread)), 0)
    hi_i = min(int(math.ceil(idx + spread)), N - 1)
    return RayBoundary(float(T[idx]), float(T[lo_i]), float(T[hi_i]), N)


# ---------------------------------------------------------------- scalar formulas


def achievable_logM_symmetric(n: float, eps: float, k: int, P: float, c0: float = 0.0) -> float:
    """Per-user ``log M`` of the symmetric k-user normal approximation (nats).

    ``(n C(kP) - sqrt(n (V(kP) + V_cr(k, P))) Qinv(eps) + 0.5 log n + c0) / k``
    """
    _check_n_eps(n, eps)
    if int(k) != k or k < 1:
        raise DomainError("k must be a positive integer")
    if not P > 0:
        raise DomainError("P must be positive")
    var = dispersion_v(k * P) + cross_dispersion(k, P)
    total = n * capacity(k * P) - math.sqrt(n * var) * gaussian_q_inv(eps) + 0.5 * math.log(n) + c0
    return total / k


class N0Choice(NamedTuple):
    n0: int
    lambda0: float


def lambda0_for(n0: int, P: float, eps0: float) -> float:
    """Silence-gate half width that makes ``2 kappa1(P) exp(-n0 lambda^2 / 8) = eps0``."""
    if not 0 < eps0 < 1:
        raise DomainError("eps0 must lie in (0, 1)")
    if n0 < 1:
        raise DomainError("n0 must be positive")
    return math.sqrt(-8.0 * math.log(eps0 / (2.0 * kappa1(P))) / n0)


def min_n0(n1: int, P: float, eps0: float = 0.1) -> N0Choice:
    """Smallest first decoding time ``ceil(4 (1 + P^2) / P^2 * log n1)`` and its gate width."""
    if not n1 >= 3:
        raise DomainError("n1 must be at least 3")
    if not P > 0:
        raise DomainError("P must be positive")
    n0 = math.ceil(4.0 * (1.0 + P * P) / (P * P) * math.log(n1) - 1e-12)
    n0 = max(n0, 1)
    return N0Choice(n0, lambda0_for(n0, P, eps0))


# ---------------------------------------------------------------- distance bounds


def _inv_sqrtm(S: np.ndarray) -> np.ndarray:
    w, U = np.linalg.eigh(S)
    if w.min() <= 0:
        raise MatrixError("first covariance must be positive definite")
    return (U / np.sqrt(w)) @ U.T


def tv_gaussian_bound(mu1, cov1, mu2, cov2) -> float:
    """Upper bound on the total variation distance between two Gaussians.

    ``(2 + sqrt 6)/4 ||S1^{-1/2} S2 S1^{-1/2} - I||_F + 0.5 sqrt(dm^T S1^{-1} dm)``
    """
    mu1 = np.atleast_1d(np.asarray(mu1, dtype=float))
    mu2 = np.atleast_1d(np.asarray(mu2, dtype=float))
    S1 = np.atleast_2d(np.asarray(cov1, dtype=float))
    S2 = np.atleast_2d(np.asarray(cov2, dtype=float))
    if S1.shape != S2.shape or S1.shape != (len(mu1), len(mu1)) or mu1.shape != mu2.shape:
        raise MatrixError("dimension mismatch")
    R = _inv_sqrtm(0.5 * (S1 + S1.T))
    M = R @ S2 @ R - np.eye(len(mu1))
    dm = mu1 - mu2
    quad = float(dm @ np.linalg.solve(S1, dm))
    return (2.0 + math.sqrt(6.0)) / 4.0 * float(np.linalg.norm(M, "fro")) + 0.5 * math.sqrt(max(quad, 0.0))


def stam_bound(n: int, k: int = 1) -> float:
    """Distance between k sphere coordinates and ``N(0, I_k)``: ``2[(n/(n-k-2))^{k/2} - 1]``."""
    if int(n) != n or int(k) != k or k < 1:
        raise DomainError("n and k must be integers, k >= 1")
    if not n > k + 2:
        raise DomainError("stam_bound requires n > k + 2")
    return 2.0 * ((n / (n - k - 2.0)) ** (k / 2.0) - 1.0)

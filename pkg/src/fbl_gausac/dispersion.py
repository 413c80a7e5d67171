"""Capacity, dispersion and the subset-indexed rate quantities of the Gaussian MAC.

Nonempty subsets of the users ``{1..K}`` are identified by bitmasks
``1 .. 2^K - 1``; user ``i`` (1-based) is bit ``i - 1``.  Every vector and
matrix indexed by subsets uses increasing bitmask order, so for ``K = 2`` the
order is ``{1}, {2}, {1,2}``.

All rates are in nats.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError, SizeError

MAX_USERS = 16


def _nonneg(P, name: str) -> float:
    P = float(P)
    if math.isnan(P) or P < 0:
        raise DomainError(f"{name}: power must be nonnegative, got {P}")
    return P


def capacity(P) -> float:
    """Point-to-point capacity ``0.5 * ln(1 + P)``."""
    return 0.5 * math.log1p(_nonneg(P, "capacity"))


def dispersion_v(P) -> float:
    """Point-to-point dispersion ``P (P + 2) / (2 (1 + P)^2)``."""
    P = _nonneg(P, "dispersion_v")
    return P * (P + 2.0) / (2.0 * (1.0 + P) ** 2)


def cross_dispersion(K: int, P) -> float:
    """Cross dispersion ``K (K - 1) P^2 / (2 (1 + K P)^2)`` of the symmetric K-user code."""
    if int(K) != K or K < 1:
        raise DomainError("cross_dispersion: K must be a positive integer")
    P = _nonneg(P, "cross_dispersion")
    return K * (K - 1) * P * P / (2.0 * (1.0 + K * P) ** 2)


@dataclass(frozen=True)
class PowerAllocation:
    """Per-user power budgets ``P_1..P_K`` in linear units with unit noise variance."""

    powers: tuple[float, ...]

    def __post_init__(self):
        powers = tuple(float(p) for p in np.atleast_1d(np.asarray(self.powers, dtype=float)))
        if len(powers) < 1:
            raise DomainError("PowerAllocation needs at least one user")
        if len(powers) > MAX_USERS:
            raise SizeError(f"PowerAllocation: K = {len(powers)} exceeds the guard of {MAX_USERS}")
        if any(not (p > 0) or math.isinf(p) for p in powers):
            raise DomainError("PowerAllocation: every power must be positive and finite")
        object.__setattr__(self, "powers", powers)

    @property
    def K(self) -> int:
        return len(self.powers)

    @classmethod
    def symmetric(cls, K: int, P: float) -> "PowerAllocation":
        return cls((float(P),) * int(K))


def _as_allocation(pa) -> PowerAllocation:
    return pa if isinstance(pa, PowerAllocation) else PowerAllocation(tuple(pa))


def subset_masks(K: int) -> list[int]:
    """Nonempty subset bitmasks in the canonical order."""
    if K > MAX_USERS:
        raise SizeError(f"K = {K} exceeds the guard of {MAX_USERS}")
    return list(range(1, 1 << K))


def subset_members(mask: int) -> tuple[int, ...]:
    """1-based user indices contained in ``mask``."""
    return tuple(i + 1 for i in range(mask.bit_length()) if mask >> i & 1)


def mask_of(users: Sequence[int]) -> int:
    """Bitmask of a collection of 1-based user indices."""
    m = 0
    for u in users:
        m |= 1 << (int(u) - 1)
    if m == 0:
        raise DomainError("empty subset")
    return m


def _subset_sums(powers: np.ndarray, power: int = 1) -> np.ndarray:
    """``out[mask] = sum of powers[i]**power over users in mask`` for every mask including 0."""
    K = len(powers)
    out = np.zeros(1 << K)
    for i in range(K):
        bit = 1 << i
        out[bit : 2 * bit] = out[:bit] + powers[i] ** power
    return out


def _mask_key(mask: int) -> str:
    return str(mask)


@dataclass(frozen=True)
class CapacityVector:
    """``C(P_<S>)`` for every nonempty subset ``S``, in canonical order."""

    K: int
    values: np.ndarray = field(repr=False)

    def __getitem__(self, mask: int) -> float:
        return float(self.values[mask - 1])

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return self.values.copy()

    def to_json(self) -> str:
        return json.dumps({"K": self.K, "entries": {_mask_key(m): float(v) for m, v in zip(subset_masks(self.K), self.values)}})

    @classmethod
    def from_json(cls, text: str) -> "CapacityVector":
        data = json.loads(text)
        K = int(data["K"])
        vals = np.array([data["entries"][_mask_key(m)] for m in subset_masks(K)], dtype=float)
        return cls(K, vals)


@dataclass(frozen=True)
class DispersionMatrix:
    """Covariance of the subset-indexed information densities, in canonical subset order."""

    K: int
    values: np.ndarray = field(repr=False)

    def entry(self, mask1: int, mask2: int) -> float:
        return float(self.values[mask1 - 1, mask2 - 1])

    def as_array(self) -> np.ndarray:
        return self.values.copy()

    def to_json(self) -> str:
        masks = subset_masks(self.K)
        entries = {
            f"{a},{b}": float(self.values[i, j]) for i, a in enumerate(masks) for j, b in enumerate(masks)
        }
        return json.dumps({"K": self.K, "entries": entries})

    @classmethod
    def from_json(cls, text: str) -> "DispersionMatrix":
        data = json.loads(text)
        K = int(data["K"])
        masks = subset_masks(K)
        vals = np.array([[data["entries"][f"{a},{b}"] for b in masks] for a in masks], dtype=float)
        return cls(K, vals)


def capacity_vector(pa) -> CapacityVector:
    """Capacity of the summed power of every nonempty subset."""
    pa = _as_allocation(pa)
    sums = _subset_sums(np.asarray(pa.powers))[1:]
    return CapacityVector(pa.K, 0.5 * np.log1p(sums))


def dispersion_matrix(pa) -> DispersionMatrix:
    """K-user dispersion matrix.

    Entry ``(S1, S2)`` is::

        [P<S1> P<S2> + 2 P<S1&S2> + (P<S1&S2>)^2 - sum_{s in S1&S2} P_s^2]
        / [2 (1 + P<S1>) (1 + P<S2>)]

    where ``P<S>`` is the summed power of ``S`` (zero for the empty set).  The
    squared sum and the sum of squares are distinct terms; with this reading
    the matrix for two users coincides with the hand-derived two-user entries.
    """
    pa = _as_allocation(pa)
    p = np.asarray(pa.powers)
    s1 = _subset_sums(p)
    s2 = _subset_sums(p, 2)
    masks = np.arange(1, 1 << pa.K)
    inter = masks[:, None] & masks[None, :]
    ps = s1[masks]
    pi = s1[inter]
    num = ps[:, None] * ps[None, :] + 2.0 * pi + pi * pi - s2[inter]
    den = 2.0 * (1.0 + ps[:, None]) * (1.0 + ps[None, :])
    V = num / den
    V = 0.5 * (V + V.T)
    # singleton diagonal entries reduce to the point-to-point dispersion exactly
    for i, P in enumerate(pa.powers):
        V[(1 << i) - 1, (1 << i) - 1] = dispersion_v(P)
    return DispersionMatrix(pa.K, V)


def two_user_dispersion_matrix(P1: float, P2: float) -> np.ndarray:
    """Explicit two-user matrix in the order ``{1}, {2}, {1,2}``."""
    P1 = float(P1)
    P2 = float(P2)
    Ps = P1 + P2
    v12 = P1 * P2 / (1.0 + Ps) ** 2
    off = 0.5 * P1 * P2 / ((1.0 + P1) * (1.0 + P2))

    def joint(Pi):
        return 0.5 * Pi * (2.0 + Ps) / ((1.0 + Pi) * (1.0 + Ps))

    return np.array(
        [
            [dispersion_v(P1), off, joint(P1)],
            [off, dispersion_v(P2), joint(P2)],
            [joint(P1), joint(P2), dispersion_v(Ps) + v12],
        ]
    )


# ---------------------------------------------------------------- constants


def kappa1(P: float) -> float:
    """Single-user density ratio constant ``27 sqrt(pi/8) (1 + P) / sqrt(1 + 2P)``."""
    P = float(P)
    if not P > 0:
        raise DomainError("kappa1: power must be positive")
    return 27.0 * math.sqrt(math.pi / 8.0) * (1.0 + P) / math.sqrt(1.0 + 2.0 * P)


def kappa2(P1: float, P2: float) -> float:
    """Two-user density ratio constant ``9 (P1 + P2) / (2 pi sqrt(2 P1 P2))``."""
    P1 = float(P1)
    P2 = float(P2)
    if not (P1 > 0 and P2 > 0):
        raise DomainError("kappa2: powers must be positive")
    return 9.0 * (P1 + P2) / (2.0 * math.pi * math.sqrt(2.0) * math.sqrt(P1 * P2))


def L_function(P: float, s: float) -> float:
    """Berry-Esseen type constant ``L(P, s)`` of the single-user information density."""
    P = float(P)
    s = float(s)
    if not (P > 0 and s > 0):
        raise DomainError("L_function: arguments must be positive")
    ps = P * s
    r = math.sqrt(1.0 + 4.0 * ps)
    return 8.0 * ps**1.5 / math.sqrt(2.0 * math.pi) * math.sqrt((1.0 + 4.0 * ps - r) / (r - 1.0) ** 5)


def _K2(P1: float, P2: float) -> tuple[float, float]:
    """Maximum of ``1.5 L(u, 1 + P1 + P2)`` over the admissible interval of ``u``."""
    Ps = P1 + P2
    lo = Ps - math.sqrt(P1 * P2)
    hi = (math.sqrt(P1) + math.sqrt(P2)) ** 2
    s = 1.0 + Ps
    grid = np.linspace(lo, hi, 10_000)
    vals = np.array([L_function(u, s) for u in grid])
    j = int(np.argmax(vals))
    best_u, best = float(grid[j]), float(vals[j])
    a = float(grid[max(j - 1, 0)])
    b = float(grid[min(j + 1, len(grid) - 1)])
    if b > a:
        res = minimize_scalar(lambda u: -L_function(u, s), bounds=(a, b), method="bounded", options={"xatol": 1e-12})
        if -res.fun > best:
            best_u, best = float(res.x), float(-res.fun)
    return 1.5 * best, best_u


@dataclass(frozen=True)
class AnalysisConstants:
    kappa1: tuple[float, ...]
    kappa2: float | None
    L_values: tuple[float, ...]
    G1: float
    G2: float | None
    G12: float | None
    K2_argmax: float | None = None


def analysis_constants(pa) -> AnalysisConstants:
    """Constants of the second-order achievability analysis.

    ``kappa1`` and ``L_values`` are per user; ``L_values[i] = L(P_i, 1 + P_i)``.
    The pairwise quantities ``kappa2``, ``G2`` and ``G12`` are only defined for
    two users and are ``None`` otherwise.
    """
    pa = _as_allocation(pa)
    k1 = tuple(kappa1(p) for p in pa.powers)
    Ls = tuple(L_function(p, 1.0 + p) for p in pa.powers)
    G = tuple(3.0 * math.log(2.0) * L for L in Ls)
    if pa.K == 2:
        P1, P2 = pa.powers
        K2, u = _K2(P1, P2)
        return AnalysisConstants(k1, kappa2(P1, P2), Ls, G[0], G[1], 2.0 * math.log(2.0) * K2, u)
    return AnalysisConstants(k1, None, Ls, G[0], None, None, None)

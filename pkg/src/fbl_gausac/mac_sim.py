"""Monte Carlo simulation of the K-user Gaussian MAC random code and its RCU bound.

Every user draws its codebook uniformly from the sphere of radius
``sqrt(n P_i)``; the receiver sees ``y = sum_i x_i(m_i) + z`` with unit-variance
noise and decodes by maximum likelihood, which for this channel is minimum
Euclidean distance to the superposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from . import rng as _rng
from .errors import ConfigError, SizeError
from .estimate import EstimateWithCI, mean_estimate, proportion
from .parallel import map_units
from .specfun import sphere_coord_sf
from .sphere import sample_sphere

TUPLE_GUARD = 1 << 24
FLOAT_GUARD = 1 << 26  # doubles held per chunk of codebooks
TRIAL_CHUNK = 512
RCU_CHUNK = 64


@dataclass(frozen=True)
class MacConfig:
    """Parameters of a MAC simulation.

    ``M`` and ``powers`` are per user.  ``fixed_codebook`` reuses one realized
    code for all trials instead of drawing a fresh code per trial.
    """

    n: int
    M: tuple[int, ...]
    powers: tuple[float, ...]
    trials: int = 10_000
    seed: int = 0
    inner_samples: int = 256
    fixed_codebook: bool = False

    def __post_init__(self):
        M = tuple(int(m) for m in np.atleast_1d(self.M))
        powers = tuple(float(p) for p in np.atleast_1d(self.powers))
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "powers", powers)
        problems = []
        if int(self.n) != self.n or self.n < 1:
            problems.append("n: must be a positive integer")
        if len(M) != len(powers) or not M:
            problems.append("M/powers: need one entry per user")
        if any(m < 1 for m in M):
            problems.append("M: every message count must be at least 1")
        if any(not p > 0 for p in powers):
            problems.append("powers: every power must be positive")
        if self.trials < 1:
            problems.append("trials: must be positive")
        if self.inner_samples < 1:
            problems.append("inner_samples: must be positive")
        if problems:
            raise ConfigError(problems)
        if math.prod(M) > TUPLE_GUARD:
            raise SizeError(f"message tuple space {math.prod(M)} exceeds the enumeration guard {TUPLE_GUARD}")

    @property
    def K(self) -> int:
        return len(self.M)


@dataclass(frozen=True)
class MacTrialResult:
    transmitted: tuple[int, ...]
    decoded: tuple[int, ...]
    error: bool
    margin: float


@dataclass(frozen=True)
class MacSimResult:
    error: EstimateWithCI
    errors: int
    trials: int
    per_user_errors: tuple[int, ...] = field(default=())

    def to_dict(self) -> dict:
        return {"error": self.error.to_dict(), "errors": self.errors, "trials": self.trials,
                "per_user_errors": list(self.per_user_errors)}


# ---------------------------------------------------------------- primitives


def generate_codebooks(cfg: MacConfig, rng: np.random.Generator | None = None) -> list[np.ndarray]:
    """One ``M_i x n`` spherical codebook per user."""
    if sum(cfg.M) * cfg.n > FLOAT_GUARD:
        raise SizeError("codebooks exceed the memory guard")
    if rng is None:
        rng = _rng.derive_rng(cfg.seed, _rng.STREAM_MAC_CODEBOOK)
    return [sample_sphere(cfg.n, P, rng, m) for m, P in zip(cfg.M, cfg.powers)]


def apply_channel(codewords, rng: np.random.Generator | None, n: int | None = None, noise: bool = True) -> np.ndarray:
    """Superpose the active users' codewords and add unit-variance Gaussian noise.

    ``codewords`` has users on its second-to-last axis (shape ``(..., k, n)``)
    or is a list of length-``n`` vectors; with no users ``n`` must be given.
    """
    if isinstance(codewords, (list, tuple)):
        if len(codewords) == 0:
            if n is None:
                raise ValueError("n is required when no users are active")
            x = np.zeros(n)
        else:
            x = np.sum(np.stack([np.asarray(c, dtype=float) for c in codewords]), axis=0)
    else:
        arr = np.asarray(codewords, dtype=float)
        x = arr.sum(axis=-2) if arr.ndim >= 2 else arr
    if not noise:
        return x.copy()
    return x + rng.standard_normal(x.shape)


def _score_tensor(y: np.ndarray, books: Sequence[np.ndarray]) -> np.ndarray:
    """ML metric ``<y, sum x> - 0.5 ||sum x||^2`` for every tuple, batched.

    ``y`` has shape ``(B, n)`` and ``books[i]`` shape ``(B, M_i, n)``; the result
    has shape ``(B, M_1, ..., M_K)``.
    """
    K = len(books)
    B = y.shape[0]
    total = np.zeros((B,) + (1,) * K)
    for i, X in enumerate(books):
        lin = np.einsum("bmn,bn->bm", X, y) - 0.5 * np.einsum("bmn,bmn->bm", X, X)
        shape = [B] + [1] * K
        shape[i + 1] = X.shape[1]
        total = total + lin.reshape(shape)
    for i, j in combinations(range(K), 2):
        G = np.einsum("bmn,bln->bml", books[i], books[j])
        shape = [B] + [1] * K
        shape[i + 1] = books[i].shape[1]
        shape[j + 1] = books[j].shape[1]
        total = total - G.reshape(shape)
    return total


def decode_mac_ml_batch(books: Sequence[np.ndarray], y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched ML decoding.

    Returns ``(decoded, margin)``: decoded message indices of shape ``(B, K)``
    and the gap between the best and second-best metric.  Ties go to the
    lexicographically smallest tuple (first maximum in C order).
    """
    S = _score_tensor(y, books)
    B = S.shape[0]
    flat = S.reshape(B, -1)
    best = np.argmax(flat, axis=1)
    decoded = np.stack(np.unravel_index(best, S.shape[1:]), axis=1)
    if flat.shape[1] > 1:
        top2 = -np.partition(-flat, 1, axis=1)[:, :2]
        margin = top2[:, 0] - top2[:, 1]
    else:
        margin = np.full(B, np.inf)
    return decoded, margin


def decode_mac_ml(codebooks: Sequence[np.ndarray], y: np.ndarray) -> tuple[int, ...]:
    """ML message tuple for one received vector.

    Maximizes ``<y, sum_i x_i(m_i)> - 0.5 ||sum_i x_i(m_i)||^2`` (equivalently
    minimizes the distance from ``y`` to the superposition).  Ties are broken
    toward the lexicographically smallest tuple.
    """
    if math.prod(cb.shape[0] for cb in codebooks) > TUPLE_GUARD:
        raise SizeError("message tuple space exceeds the enumeration guard")
    books = [np.asarray(cb, dtype=float)[None] for cb in codebooks]
    decoded, _ = decode_mac_ml_batch(books, np.asarray(y, dtype=float)[None])
    return tuple(int(m) for m in decoded[0])


def mac_trial(codebooks: Sequence[np.ndarray], messages: Sequence[int], rng: np.random.Generator,
              noise: bool = True) -> MacTrialResult:
    """Transmit one message tuple through the channel and decode it."""
    x = [cb[m] for cb, m in zip(codebooks, messages)]
    y = apply_channel(x, rng, noise=noise)
    books = [np.asarray(cb)[None] for cb in codebooks]
    dec, margin = decode_mac_ml_batch(books, y[None])
    decoded = tuple(int(m) for m in dec[0])
    sent = tuple(int(m) for m in messages)
    return MacTrialResult(sent, decoded, decoded != sent, float(margin[0]))


# ---------------------------------------------------------------- simulation


def _chunk_plan(total: int, size: int) -> list[tuple[int, int]]:
    return [(c, min(size, total - c * size)) for c in range((total + size - 1) // size)]


def _mac_chunk(args):
    cfg, chunk, count, fixed = args
    g = _rng.derive_rng(cfg.seed, _rng.STREAM_MAC, chunk)
    if fixed is not None:
        books = [np.broadcast_to(cb, (count,) + cb.shape) for cb in fixed]
    else:
        books = [sample_sphere(cfg.n, P, g, (count, m)) for m, P in zip(cfg.M, cfg.powers)]
    msgs = np.stack([g.integers(0, m, size=count) for m in cfg.M], axis=1)
    idx = np.arange(count)
    x = sum(books[i][idx, msgs[:, i]] for i in range(cfg.K))
    y = x + g.standard_normal((count, cfg.n))
    decoded, _ = decode_mac_ml_batch(books, y)
    wrong = decoded != msgs
    return int(np.count_nonzero(wrong.any(axis=1))), wrong.sum(axis=0)


def _trial_chunk_size(cfg: MacConfig) -> int:
    per_trial = max(sum(cfg.M) * cfg.n, math.prod(cfg.M))
    return int(max(1, min(TRIAL_CHUNK, FLOAT_GUARD // (4 * per_trial))))


def simulate_mac(cfg: MacConfig, workers: int | None = 1) -> MacSimResult:
    """Average error probability of the random spherical code under ML decoding.

    Trials are processed in fixed-size chunks with per-chunk random streams, so
    the counts do not depend on ``workers``.
    """
    fixed = generate_codebooks(cfg) if cfg.fixed_codebook else None
    size = _trial_chunk_size(cfg)
    units = [(cfg, c, m, fixed) for c, m in _chunk_plan(cfg.trials, size)]
    results = map_units(_mac_chunk, units, workers)
    errors = sum(r[0] for r in results)
    per_user = np.sum([r[1] for r in results], axis=0)
    return MacSimResult(proportion(errors, cfg.trials), errors, cfg.trials, tuple(int(v) for v in per_user))


# ---------------------------------------------------------------- RCU bound


def single_user_tail_prob(y_prime: np.ndarray, P: float, threshold) -> np.ndarray:
    """``P[<y', X> >= threshold]`` for ``X`` uniform on the sphere of radius ``sqrt(n P)``.

    ``<y', X> = ||y'|| sqrt(P) Q`` with ``Q`` the scaled sphere coordinate, so
    the probability is a sphere-coordinate tail.  Works on batches along the
    leading axis.
    """
    y_prime = np.atleast_2d(y_prime)
    n = y_prime.shape[-1]
    norm = np.linalg.norm(y_prime, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.asarray(threshold, dtype=float) / (norm * math.sqrt(P))
    q = np.where(norm > 0, q, np.where(np.asarray(threshold) <= 0, -np.inf, np.inf))
    q = np.clip(q, -2.0 * math.sqrt(n), 2.0 * math.sqrt(n))
    return np.asarray(sphere_coord_sf(q, n))


def _subsets(K: int) -> list[tuple[int, ...]]:
    return [tuple(i for i in range(K) if mask >> i & 1) for mask in range(1, 1 << K)]


def _rcu_chunk(args):
    cfg, chunk, count = args
    g = _rng.derive_rng(cfg.seed, _rng.STREAM_RCU, chunk)
    n, K = cfg.n, cfg.K
    x = np.stack([sample_sphere(n, P, g, count) for P in cfg.powers], axis=1)  # (B, K, n)
    y = x.sum(axis=1) + g.standard_normal((count, n))
    union = np.zeros(count)
    for S in _subsets(K):
        weight = math.prod(cfg.M[s] - 1 for s in S)
        if weight == 0:
            continue
        # y' removes the users outside S, which the event conditions on
        xs = x[:, list(S)].sum(axis=1)
        yp = y - (x.sum(axis=1) - xs)
        t = np.einsum("bn,bn->b", yp, xs) - 0.5 * np.einsum("bn,bn->b", xs, xs)
        if len(S) == 1:
            P = cfg.powers[S[0]]
            p = single_user_tail_prob(yp, P, t + 0.5 * n * P)
        else:
            bar = sum(sample_sphere(n, cfg.powers[s], g, (count, cfg.inner_samples)) for s in S)
            stat = np.einsum("bjn,bn->bj", bar, yp) - 0.5 * np.einsum("bjn,bjn->bj", bar, bar)
            p = np.mean(stat >= t[:, None], axis=1)
        union += weight * p
    v = np.minimum(1.0, union)
    return float(v.sum()), float((v * v).sum())


def rcu_mc_estimate(cfg: MacConfig, workers: int | None = 1, outer_samples: int | None = None) -> EstimateWithCI:
    """Monte Carlo value of the random-coding union bound.

    The outer expectation over the transmitted codewords and the output uses
    ``outer_samples`` draws (default ``cfg.trials``).  For every nonempty user
    set ``S`` the conditional probability that an independent codeword tuple
    for ``S`` scores at least as well as the transmitted one is computed in
    closed form for single users and by ``cfg.inner_samples`` inner draws
    otherwise.  ``min(1, .)`` is applied per outer sample before averaging.
    """
    if cfg.K > 3:
        raise SizeError("rcu_mc_estimate supports at most three users")
    total = cfg.trials if outer_samples is None else int(outer_samples)
    if all(m == 1 for m in cfg.M):
        return mean_estimate(0.0, 0.0, total)
    size = RCU_CHUNK
    units = [(cfg, c, m) for c, m in _chunk_plan(total, size)]
    results = map_units(_rcu_chunk, units, workers)
    s1 = sum(r[0] for r in results)
    s2 = sum(r[1] for r in results)
    return mean_estimate(s1, s2, total)

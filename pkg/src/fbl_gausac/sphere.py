"""Spherical codewords, concatenated spherical codewords and codebook files."""

from __future__ import annotations

import math
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, ScheduleError

CODEBOOK_MAGIC = b"FBLC"
CODEBOOK_VERSION = 1
_HEADER = struct.Struct("<4sIQQd")
_EXTENDED_FROM = 4096


def _scale_rows(g: np.ndarray, radius_sq: np.ndarray | float) -> np.ndarray:
    """Rescale each row of ``g`` (last axis) to squared norm ``radius_sq``.

    Long rows accumulate the squared norm in extended precision so the result
    meets the norm to ~1e-15 relative even at n = 10^6; short rows use
    float64 pairwise summation, which is already that accurate.
    """
    if g.shape[-1] >= _EXTENDED_FROM:
        sq = np.sum(np.square(g, dtype=np.longdouble), axis=-1)
        factor = np.sqrt(np.asarray(radius_sq, dtype=np.longdouble) / sq)
        return (g * factor[..., None]).astype(float)
    sq = np.sum(g * g, axis=-1)
    return g * np.sqrt(radius_sq / sq)[..., None]


def sample_sphere(n: int, P: float, rng: np.random.Generator, size: int | tuple | None = None) -> np.ndarray:
    """Uniform draw(s) from the sphere of radius ``sqrt(n P)`` in R^n.

    Returns shape ``(n,)`` when ``size`` is None, else ``(*size, n)``.
    """
    if int(n) != n or n < 1:
        raise DomainError("sample_sphere: n must be a positive integer")
    if not P > 0:
        raise DomainError("sample_sphere: P must be positive")
    n = int(n)
    shape = () if size is None else ((size,) if np.isscalar(size) else tuple(size))
    g = rng.standard_normal(shape + (n,))
    zero = np.all(g == 0, axis=-1)
    while np.any(zero):  # probability zero, kept for completeness
        g[zero] = rng.standard_normal((int(np.count_nonzero(zero)), n))
        zero = np.all(g == 0, axis=-1)
    return _scale_rows(g, n * P)


def block_bounds(decode_times: Sequence[int]) -> list[tuple[int, int]]:
    """Half-open symbol ranges of the concatenated blocks.

    ``decode_times`` are ``n_1 < ... < n_K`` (a leading silence-check time, if
    any, must be dropped by the caller).  Block 1 is ``[0, n_1)`` and block ``j``
    is ``[n_{j-1}, n_j)``.
    """
    times = [int(t) for t in decode_times]
    if not times:
        raise ScheduleError("no decoding times")
    bounds = []
    prev = 0
    for t in times:
        if t <= prev:
            raise ScheduleError(f"block of dimension {t - prev} at time {t}; times must strictly increase from 1")
        bounds.append((prev, t))
        prev = t
    return bounds


def sample_concat_sphere(schedule_or_times, P: float | None = None, rng: np.random.Generator | None = None,
                         size: int | tuple | None = None) -> np.ndarray:
    """Codeword made of independent spherical blocks, one per decoding time.

    Accepts a schedule object (anything with ``block_times`` and ``P``) or an
    explicit sequence of block end times together with ``P``.  Every prefix
    ending at a decoding time has squared norm exactly ``n_j P``.
    """
    if hasattr(schedule_or_times, "block_times"):
        times = schedule_or_times.block_times
        P = schedule_or_times.P if P is None else P
    else:
        times = schedule_or_times
    if rng is None:
        raise DomainError("sample_concat_sphere needs a random generator")
    bounds = block_bounds(times)
    parts = [sample_sphere(b - a, P, rng, size) for a, b in bounds]
    return np.concatenate(parts, axis=-1)


def inner_product_q(x1: np.ndarray, x2: np.ndarray, P1: float | None = None, P2: float | None = None) -> float:
    """Normalized inner product ``<x1, x2> / sqrt(n P1 P2)``.

    Powers default to the empirical ``||x||^2 / n``, which is exact for
    spherical codewords.  The result lies in ``[-sqrt(n), sqrt(n)]``.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape[-1] != x2.shape[-1]:
        raise DomainError("inner_product_q: length mismatch")
    n = x1.shape[-1]
    if P1 is None:
        P1 = np.einsum("...i,...i->...", x1, x1) / n
    if P2 is None:
        P2 = np.einsum("...i,...i->...", x2, x2) / n
    q = np.einsum("...i,...i->...", x1, x2) / np.sqrt(n * np.asarray(P1) * np.asarray(P2))
    q = np.clip(q, -math.sqrt(n), math.sqrt(n))
    return float(q) if np.ndim(q) == 0 else q


# ---------------------------------------------------------------- codebook files


def write_codebook(path, codebook: np.ndarray, P: float) -> None:
    """Write an ``M x n`` codebook: header then ``M n`` little-endian doubles, row-major."""
    cb = np.ascontiguousarray(np.asarray(codebook, dtype="<f8"))
    if cb.ndim != 2:
        raise DomainError("codebook must be a 2-D array")
    M, n = cb.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CODEBOOK_MAGIC, CODEBOOK_VERSION, n, M, float(P)))
        fh.write(cb.tobytes(order="C"))


def read_codebook(path) -> tuple[np.ndarray, float]:
    """Inverse of :func:`write_codebook`; returns ``(codebook, P)``."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError("codebook file truncated")
    magic, version, n, M, P = _HEADER.unpack_from(data)
    if magic != CODEBOOK_MAGIC:
        raise ValueError("not a codebook file")
    if version != CODEBOOK_VERSION:
        raise ValueError(f"unsupported codebook version {version}")
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if body.size != n * M:
        raise ValueError("codebook file size does not match header")
    return body.reshape(M, n).astype(float), P

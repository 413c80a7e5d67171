"""Simulation of the rateless Gaussian random-access protocol.

All transmitters share one codebook of concatenated spherical codewords.  The
receiver checks the received power at the decoding times ``n_0 < ... < n_K``
in order; at time ``n_t`` it accepts the hypothesis "t users are active" when

    | ||y[:n_t]||^2 / n_t - (1 + t P) | <= lambda_t,

broadcasts ACK and, for ``t >= 1``, decodes the most likely strictly
increasing list of ``t`` messages from the prefix.  Otherwise it broadcasts
NACK and waits for the next time.  An epoch never accepted at any time is a
decoding-time error.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterator, Mapping, Sequence

import numpy as np

from . import rng as _rng
from .dispersion import kappa1, kappa2
from .errors import ConfigError, DomainError, ScheduleError, SizeError
from .estimate import EstimateWithCI, proportion
from .gaussian_region import achievable_logM_symmetric, lambda0_for, min_n0
from .parallel import map_units
from .sphere import block_bounds, sample_sphere

LIST_GUARD = 1 << 24
CHUNK_FLOATS = 1 << 22
MAX_CHUNK = 256
POWER_RTOL = 1e-9
MAX_BLOCKLENGTH = 10**9


class ErrorClass(str, enum.Enum):
    NONE = "none"
    REPETITION = "repetition"
    WRONG_TIME = "wrong_time"
    WRONG_MESSAGE = "wrong_message"


ERROR_CLASSES = (ErrorClass.REPETITION, ErrorClass.WRONG_TIME, ErrorClass.WRONG_MESSAGE)


@dataclass(frozen=True)
class RacSchedule:
    """Decoding times, gate widths and targets of a RAC code.

    ``decode_times`` and ``thresholds`` have ``K + 1`` entries indexed by the
    hypothesized number of active users ``t = 0..K``; ``eps`` likewise.
    ``kappa`` optionally supplies the output-density constants ``kappa(j, P)``
    for ``j >= 3``; without them :func:`wrong_time_bound` refuses ``k >= 3``
    unless ``allow_kappa_extrapolation`` is set.
    """

    K: int
    P: float
    M: int
    decode_times: tuple[int, ...]
    thresholds: tuple[float, ...]
    eps: tuple[float, ...] = ()
    c0: float = 0.0
    kappa: Mapping[int, float] = field(default_factory=dict)
    allow_kappa_extrapolation: bool = False

    def __post_init__(self):
        times = tuple(int(t) for t in self.decode_times)
        lam = tuple(float(x) for x in self.thresholds)
        eps = tuple(float(e) for e in self.eps)
        object.__setattr__(self, "decode_times", times)
        object.__setattr__(self, "thresholds", lam)
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "kappa", {int(j): float(v) for j, v in dict(self.kappa).items()})
        if int(self.K) != self.K or self.K < 1:
            raise ScheduleError("K must be a positive integer")
        if not self.P > 0:
            raise ScheduleError("P must be positive")
        if int(self.M) != self.M or self.M < 1:
            raise ScheduleError("M must be a positive integer")
        if len(times) != self.K + 1 or len(lam) != self.K + 1:
            raise ScheduleError("need K + 1 decoding times and thresholds (t = 0..K)")
        if eps and len(eps) != self.K + 1:
            raise ScheduleError("eps must have K + 1 entries when given")
        if times[0] < 1 or any(b <= a for a, b in zip(times, times[1:])):
            raise ScheduleError(f"decoding times must be positive and strictly increasing, got {times}")
        for t, x in enumerate(lam):
            if not 0 < x < 1 + t * self.P:
                raise ScheduleError(f"threshold lambda_{t} = {x} outside (0, {1 + t * self.P})")

    @property
    def block_times(self) -> tuple[int, ...]:
        """End points ``n_1..n_K`` of the concatenated codeword blocks."""
        return self.decode_times[1:]

    @property
    def n_max(self) -> int:
        return self.decode_times[-1]

    @property
    def log_m(self) -> float:
        return math.log(self.M)

    def satisfies_min_n0(self) -> bool:
        eps0 = self.eps[0] if self.eps else 0.1
        return self.decode_times[0] >= min_n0(max(self.decode_times[1], 3), self.P, eps0).n0

    def to_dict(self) -> dict:
        return {
            "K": self.K, "P": self.P, "M": self.M, "decode_times": list(self.decode_times),
            "thresholds": list(self.thresholds), "eps": list(self.eps), "c0": self.c0,
            "kappa": {str(k): v for k, v in self.kappa.items()},
            "allow_kappa_extrapolation": self.allow_kappa_extrapolation,
        }


# ---------------------------------------------------------------- schedule design


def _eps_vector(eps, K: int) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(eps, dtype=float))
    if arr.size == 1:
        arr = np.full(K + 1, float(arr[0]))
    if arr.size != K + 1:
        raise ScheduleError("eps must be a scalar or have K + 1 entries")
    if ((arr <= 0) | (arr >= 1)).any():
        raise ScheduleError("every eps must lie in (0, 1)")
    return tuple(float(e) for e in arr)


def _min_blocklength(log_m: float, eps: float, k: int, P: float, c0: float) -> int:
    """Smallest integer n with ``achievable_logM_symmetric(n, ...) >= log_m``."""

    def ok(n):
        return achievable_logM_symmetric(n, eps, k, P, c0) >= log_m

    hi = 2
    while not ok(hi):
        hi *= 2
        if hi > MAX_BLOCKLENGTH:
            raise ScheduleError(f"no blocklength below {MAX_BLOCKLENGTH} supports log M = {log_m:.4g} at k = {k}")
    lo = max(hi // 2, 1)
    if lo >= 2 and ok(lo):
        return lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def build_rac_schedule(
    K: int,
    P: float,
    eps=0.1,
    M: int | None = None,
    n_K: int | None = None,
    c0: float = 0.0,
    kappa: Mapping[int, float] | None = None,
    allow_kappa_extrapolation: bool = False,
) -> RacSchedule:
    """Design a RAC schedule supporting a common message count at every k.

    Give either ``M`` or the last decoding time ``n_K`` (then ``M`` is the
    largest count the normal approximation allows at ``n_K``).  Each ``n_k`` is
    the smallest integer meeting the k-user rate expansion; the times are then
    raised where needed to be strictly increasing, which keeps every rate
    inequality satisfied.  ``n_0`` is at least the logarithmic minimum and large
    enough for the silence gate width to drop below ``min(1, P)``.
    """
    if int(K) != K or K < 1:
        raise ScheduleError("K must be a positive integer")
    if not P > 0:
        raise ScheduleError("P must be positive")
    eps_v = _eps_vector(eps, K)
    if (M is None) == (n_K is None):
        raise ScheduleError("give exactly one of M and n_K")
    if M is None:
        M = int(math.floor(math.exp(achievable_logM_symmetric(int(n_K), eps_v[K], K, P, c0))))
        if M < 1:
            raise ScheduleError(f"n_K = {n_K} supports no messages at eps = {eps_v[K]}")
    M = int(M)
    if M < 1:
        raise ScheduleError("M must be positive")
    for k in range(2, K + 1):
        floor_k = k * (k - 1) / (2.0 * M)
        if eps_v[k] <= floor_k:
            raise ScheduleError(
                f"infeasible: eps_{k} = {eps_v[k]} is below the message-collision floor k(k-1)/(2M) = {floor_k:.4g}"
            )
    log_m = math.log(M)
    times = [0] + [_min_blocklength(log_m, eps_v[k], k, P, c0) for k in range(1, K + 1)]
    cap = min(1.0, P)
    while True:
        for k in range(2, K + 1):
            times[k] = max(times[k], times[k - 1] + 1)
        n0 = min_n0(max(times[1], 3), P, eps_v[0]).n0
        while lambda0_for(n0, P, eps_v[0]) >= cap:
            n0 += 1
        times[0] = n0
        if times[1] > n0:
            break
        times[1] = n0 + 1
    lam0 = lambda0_for(times[0], P, eps_v[0])
    thresholds = [lam0] + [P / 2.0] * K
    return RacSchedule(K, float(P), M, tuple(times), tuple(thresholds), eps_v, c0, dict(kappa or {}),
                       allow_kappa_extrapolation)


# ---------------------------------------------------------------- receiver


def power_typical(y_prefix, t: int, schedule: RacSchedule, noise_var: float = 1.0) -> bool:
    """Power gate at decoding time ``n_t``: is ``||y||^2 / n_t`` within ``lambda_t`` of ``noise_var + t P``?"""
    y = np.asarray(y_prefix, dtype=float)
    if not 0 <= t <= schedule.K:
        raise DomainError(f"t = {t} outside 0..{schedule.K}")
    if y.shape[-1] != schedule.decode_times[t]:
        raise DomainError(f"prefix length {y.shape[-1]} differs from n_{t} = {schedule.decode_times[t]}")
    g = float(np.dot(y, y)) / y.shape[-1]
    return abs(g - (noise_var + t * schedule.P)) <= schedule.thresholds[t]


def _check_list_space(M: int, t: int) -> None:
    if math.comb(M, t) > LIST_GUARD:
        raise SizeError(f"list space C({M}, {t}) exceeds the enumeration guard {LIST_GUARD}")


def _decode_lists(books: np.ndarray, y: np.ndarray, t: int) -> np.ndarray:
    """Batched list decoding on prefixes.

    ``books`` is ``(B, M, n)`` and ``y`` is ``(B, n)`` (already truncated to the
    decoding time).  Returns ``(B, t)`` strictly increasing message lists
    maximizing ``<y, sum x> - 0.5 ||sum x||^2``; ties go to the
    lexicographically smallest list.
    """
    B, M, _ = books.shape
    _check_list_space(M, t)
    if t > M:
        raise DomainError(f"cannot decode {t} distinct messages out of {M}")
    lin = np.einsum("bmn,bn->bm", books, y)
    nrm = np.einsum("bmn,bmn->bm", books, books)
    if t == 1:
        return np.argmax(lin - 0.5 * nrm, axis=1)[:, None]
    gram = books @ books.transpose(0, 2, 1)
    if t == 2:
        single = lin - 0.5 * nrm
        score = np.negative(gram, out=gram)
        score += single[:, :, None]
        score += single[:, None, :]
        # only strictly increasing pairs a < b are candidates
        score += np.where(np.triu(np.ones((M, M), dtype=bool), k=1), 0.0, -np.inf)
        best = np.argmax(score.reshape(B, -1), axis=1)
        return np.stack(np.unravel_index(best, (M, M)), axis=1)
    combos = np.array(list(combinations(range(M), t)), dtype=np.intp)
    pairs = list(combinations(range(t), 2))
    out = np.empty((B, t), dtype=np.intp)
    for b in range(B):
        single = lin[b] - 0.5 * nrm[b]
        score = single[combos].sum(axis=1)
        for i, j in pairs:
            score -= gram[b][combos[:, i], combos[:, j]]
        out[b] = combos[int(np.argmax(score))]
    return out


def decode_rac_list(codebook: np.ndarray, y_prefix: np.ndarray, t: int) -> tuple[int, ...]:
    """ML list of ``t`` distinct messages from a received prefix.

    Only the first ``len(y_prefix)`` symbols of each codeword are used.
    """
    y = np.asarray(y_prefix, dtype=float)
    cb = np.asarray(codebook, dtype=float)[:, : y.shape[-1]]
    if t < 1:
        raise DomainError("list length must be at least 1")
    return tuple(int(m) for m in _decode_lists(cb[None], y[None], t)[0])


# ---------------------------------------------------------------- epochs


@dataclass(frozen=True)
class TrialOutcome:
    """Result of one epoch.

    ``stop_index`` is the accepted hypothesis ``t`` (``None`` if no gate ever
    passed); ``feedback`` holds the broadcast bits up to the stop (1 = ACK).
    """

    k_active: int
    transmitted: tuple[int, ...]
    stop_index: int | None
    decoded: tuple[int, ...]
    error_class: ErrorClass
    feedback: tuple[int, ...]
    gate_values: tuple[float, ...]
    power_violation: bool = False


def _chunk_size(schedule: RacSchedule, k: int) -> int:
    per = schedule.M * schedule.n_max if k > 0 else schedule.n_max
    return int(max(1, min(MAX_CHUNK, CHUNK_FLOATS // per)))


def _gate_matrix(y: np.ndarray, schedule: RacSchedule) -> np.ndarray:
    csum = np.cumsum(y * y, axis=1)
    idx = np.asarray(schedule.decode_times) - 1
    return csum[:, idx] / np.asarray(schedule.decode_times, dtype=float)


def _stops(gates: np.ndarray, schedule: RacSchedule, noise_var: float) -> np.ndarray:
    t = np.arange(schedule.K + 1)
    centre = noise_var + t * schedule.P
    ok = np.abs(gates - centre) <= np.asarray(schedule.thresholds)
    first = np.argmax(ok, axis=1)
    return np.where(ok.any(axis=1), first, -1)


@dataclass
class _Batch:
    msgs: np.ndarray
    stops: np.ndarray
    gates: np.ndarray
    decoded: dict
    classes: np.ndarray
    power_violations: np.ndarray


def _draw_books(schedule: RacSchedule, g: np.ndarray, count: int) -> np.ndarray:
    parts = [sample_sphere(b - a, schedule.P, g, (count, schedule.M)) for a, b in block_bounds(schedule.block_times)]
    return np.concatenate(parts, axis=-1)


_CLASS_CODES = {ErrorClass.NONE: 0, ErrorClass.REPETITION: 1, ErrorClass.WRONG_TIME: 2, ErrorClass.WRONG_MESSAGE: 3}
_CODE_CLASSES = {v: k for k, v in _CLASS_CODES.items()}


def _run_batch(k: int, schedule: RacSchedule, g: np.random.Generator, count: int, fixed: np.ndarray | None,
               noise: bool, decode_all: bool) -> _Batch:
    """Run ``count`` epochs with ``k`` active users from one random stream.

    Draw order: codebooks (ensemble mode, only if k >= 1), messages, noise.
    """
    n = schedule.n_max
    books = None
    if k > 0 or decode_all:
        if fixed is not None:
            books = np.broadcast_to(fixed, (count,) + fixed.shape)
        else:
            books = _draw_books(schedule, g, count)
    msgs = g.integers(0, schedule.M, size=(count, k))
    if k > 0:
        x = books[np.arange(count)[:, None], msgs]  # (B, k, n)
        y = x.sum(axis=1)
        bt = np.asarray(schedule.block_times) - 1
        prefix_power = np.cumsum(x * x, axis=2)[:, :, bt]
        limit = np.asarray(schedule.block_times, dtype=float) * schedule.P * (1 + POWER_RTOL)
        violations = (prefix_power > limit).any(axis=(1, 2))
    else:
        y = np.zeros((count, n))
        violations = np.zeros(count, dtype=bool)
    if noise:
        y = y + g.standard_normal((count, n))
    noise_var = 1.0 if noise else 0.0
    gates = _gate_matrix(y, schedule)
    stops = _stops(gates, schedule, noise_var)

    decoded = {}
    wanted = range(1, schedule.K + 1) if decode_all else ([k] if k > 0 else [])
    for t in wanted:
        sel = np.nonzero(stops == t)[0]
        if sel.size == 0:
            continue
        nt = schedule.decode_times[t]
        lists = _decode_lists(np.ascontiguousarray(books[sel, :, :nt]), y[sel, :nt], t)
        for i, lst in zip(sel, lists):
            decoded[int(i)] = tuple(int(m) for m in lst)

    srt = np.sort(msgs, axis=1)
    rep = (srt[:, 1:] == srt[:, :-1]).any(axis=1) if k > 1 else np.zeros(count, dtype=bool)
    classes = np.zeros(count, dtype=np.int8)
    for i in range(count):
        if rep[i]:
            classes[i] = 1
        elif stops[i] != k:
            classes[i] = 2
        elif k > 0 and decoded.get(i) != tuple(int(m) for m in srt[i]):
            classes[i] = 3
    return _Batch(msgs, stops, gates, decoded, classes, violations)


def _outcomes(k: int, batch: _Batch) -> list[TrialOutcome]:
    out = []
    for i in range(len(batch.stops)):
        stop = int(batch.stops[i])
        n_bits = stop + 1 if stop >= 0 else batch.gates.shape[1]
        fb = tuple([0] * (n_bits - 1) + [1]) if stop >= 0 else tuple([0] * n_bits)
        out.append(
            TrialOutcome(
                k_active=k,
                transmitted=tuple(int(m) for m in batch.msgs[i]),
                stop_index=stop if stop >= 0 else None,
                decoded=batch.decoded.get(i, ()),
                error_class=_CODE_CLASSES[int(batch.classes[i])],
                feedback=fb,
                gate_values=tuple(float(v) for v in batch.gates[i, :n_bits]),
                power_violation=bool(batch.power_violations[i]),
            )
        )
    return out


def _check_k(k: int, schedule: RacSchedule) -> None:
    if int(k) != k or not 0 <= k <= schedule.K:
        raise DomainError(f"k_active must be in 0..{schedule.K}")
    for t in range(1, schedule.K + 1):
        _check_list_space(schedule.M, t)


def fixed_codebook(schedule: RacSchedule, seed: int) -> np.ndarray:
    """The shared ``M x n_K`` codebook used in fixed-codebook mode."""
    g = _rng.derive_rng(seed, _rng.STREAM_RAC_CODEBOOK)
    return _draw_books(schedule, g, 1)[0]


def run_epoch(k_active: int, schedule: RacSchedule, rng: np.random.Generator, mode: str = "ensemble",
              codebook: np.ndarray | None = None, noise: bool = True) -> TrialOutcome:
    """Run one epoch with ``k_active`` transmitters.

    In ensemble mode a fresh shared codebook is drawn from ``rng``; in fixed
    mode ``codebook`` is used.  ``noise=False`` is a test hook that removes the
    channel noise and recentres the gates on ``t P``.
    """
    _check_k(k_active, schedule)
    fixed = _mode_codebook(mode, codebook)
    batch = _run_batch(int(k_active), schedule, rng, 1, fixed, noise, decode_all=True)
    return _outcomes(int(k_active), batch)[0]


def _mode_codebook(mode: str, codebook):
    if mode == "ensemble":
        return None
    if mode == "fixed":
        if codebook is None:
            raise ConfigError("mode: fixed-codebook mode needs a codebook")
        return np.asarray(codebook, dtype=float)
    raise ConfigError(f"mode: unknown mode {mode!r}")


def iter_epochs(k_active: int, schedule: RacSchedule, count: int, seed: int, mode: str = "ensemble",
                noise: bool = True) -> Iterator[TrialOutcome]:
    """Epoch outcomes in order, using the same streams as :func:`simulate_rac`."""
    _check_k(k_active, schedule)
    fixed = fixed_codebook(schedule, seed) if mode == "fixed" else _mode_codebook(mode, None)
    size = _chunk_size(schedule, k_active)
    for c in range((count + size - 1) // size):
        m = min(size, count - c * size)
        g = _rng.derive_rng(seed, _rng.STREAM_RAC, k_active, c)
        yield from _outcomes(k_active, _run_batch(k_active, schedule, g, m, fixed, noise, decode_all=True))


# ---------------------------------------------------------------- aggregation


@dataclass
class ErrorBreakdown:
    """Per-k error counts by class.

    ``counts[k]`` maps each :class:`ErrorClass` to its count; ``trials[k]`` is
    the number of epochs run with k active users.
    """

    K: int
    counts: dict = field(default_factory=dict)
    trials: dict = field(default_factory=dict)
    power_violations: dict = field(default_factory=dict)
    stop_counts: dict = field(default_factory=dict)

    def add(self, k: int, counts: Mapping, trials: int, violations: int, stops: Mapping) -> None:
        c = self.counts.setdefault(k, Counter())
        c.update({ErrorClass(key): int(v) for key, v in counts.items()})
        self.trials[k] = self.trials.get(k, 0) + int(trials)
        self.power_violations[k] = self.power_violations.get(k, 0) + int(violations)
        s = self.stop_counts.setdefault(k, Counter())
        s.update({int(key): int(v) for key, v in stops.items()})

    def merge(self, other: "ErrorBreakdown") -> "ErrorBreakdown":
        out = ErrorBreakdown(max(self.K, other.K))
        for src in (self, other):
            for k in src.trials:
                out.add(k, src.counts.get(k, {}), src.trials[k], src.power_violations.get(k, 0),
                        src.stop_counts.get(k, {}))
        return out

    def errors(self, k: int) -> int:
        c = self.counts.get(k, {})
        return sum(int(c.get(cls, 0)) for cls in ERROR_CLASSES)

    def rate(self, k: int, cls: ErrorClass | str | None = None, confidence: float = 0.95) -> EstimateWithCI:
        """Frequency of class ``cls`` (or of any error when ``None``) among epochs with k users."""
        n = self.trials[k]
        if cls is None:
            return proportion(self.errors(k), n, confidence)
        return proportion(int(self.counts.get(k, {}).get(ErrorClass(cls), 0)), n, confidence)

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "per_k": {
                str(k): {
                    "trials": self.trials[k],
                    "counts": {cls.value: int(self.counts.get(k, {}).get(cls, 0)) for cls in ErrorClass},
                    "power_violations": self.power_violations.get(k, 0),
                    "stops": {str(t): v for t, v in sorted(self.stop_counts.get(k, {}).items())},
                }
                for k in sorted(self.trials)
            },
        }


def _rac_chunk(args):
    schedule, k, chunk, count, seed, fixed, noise, want_trace = args
    g = _rng.derive_rng(seed, _rng.STREAM_RAC, k, chunk)
    batch = _run_batch(k, schedule, g, count, fixed, noise, decode_all=False)
    counts = Counter(_CODE_CLASSES[int(c)].value for c in batch.classes)
    stops = Counter(int(s) for s in batch.stops)
    trace = None
    if want_trace:
        trace = [
            {"k": k, "epoch": chunk * MAX_CHUNK + i, "stop": int(batch.stops[i]),
             "gates": [round(float(v), 12) for v in batch.gates[i]],
             "class": _CODE_CLASSES[int(batch.classes[i])].value}
            for i in range(count)
        ]
    return k, dict(counts), count, int(batch.power_violations.sum()), dict(stops), trace


def simulate_rac(schedule: RacSchedule, trials, seed: int = 0, mode: str = "ensemble", workers: int | None = 1,
                 ks: Sequence[int] | None = None, noise: bool = True, trace_path=None) -> ErrorBreakdown:
    """Run the protocol for every active-user count and tally errors by class.

    ``trials`` is an epoch count per k or a mapping ``k -> count``.  Epochs are
    grouped into fixed-size chunks whose streams depend only on
    ``(seed, k, chunk)``, so counts are identical for any ``workers``.  With
    ``trace_path`` every epoch is written as one JSON line.
    """
    ks = list(range(schedule.K + 1)) if ks is None else [int(k) for k in ks]
    per_k = dict(trials) if isinstance(trials, Mapping) else {k: int(trials) for k in ks}
    fixed = fixed_codebook(schedule, seed) if mode == "fixed" else _mode_codebook(mode, None)
    units = []
    for k in ks:
        _check_k(k, schedule)
        size = _chunk_size(schedule, k)
        total = per_k[k]
        for c in range((total + size - 1) // size):
            units.append((schedule, k, c, min(size, total - c * size), seed, fixed, noise, trace_path is not None))
    results = map_units(_rac_chunk, units, workers)
    out = ErrorBreakdown(schedule.K)
    lines = []
    for k, counts, count, viol, stops, trace in results:
        out.add(k, counts, count, viol, stops)
        if trace:
            lines.extend(trace)
    if trace_path is not None:
        with open(trace_path, "w", encoding="utf-8") as fh:
            for rec in lines:
                fh.write(json.dumps(rec) + "\n")
    return out


# ---------------------------------------------------------------- bounds


def kappa_constant(j: int, schedule: RacSchedule) -> float:
    """Output-density constant ``kappa(j, P)`` for ``j`` equal-power users."""
    if j in schedule.kappa:
        return schedule.kappa[j]
    if j == 1:
        return kappa1(schedule.P)
    if j == 2:
        return kappa2(schedule.P, schedule.P)
    if schedule.allow_kappa_extrapolation:
        warnings.warn(
            f"kappa({j}, P) has no closed form; using kappa(2, P) as a non-rigorous placeholder",
            stacklevel=3,
        )
        return kappa2(schedule.P, schedule.P)
    raise ConfigError(f"kappa.{j}: kappa({j}, P) must be supplied (or extrapolation explicitly allowed)")


def wrong_time_bound(schedule: RacSchedule, k: int) -> float:
    """Union bound on the probability of accepting the wrong decoding time with k active users.

    For ``k = 0`` it is the silence-gate bound ``2 kappa(1, P) exp(-n_0 lambda_0^2 / 8)``.
    For ``k >= 1``::

        2 kappa(1,P) exp(-n_0 ((k - lambda_0/P) P)^2 / (8 (1 + kP)^2))
        + 2 sum_{t=1..k} (prod_{j<=t} kappa(j,P)) exp(-n_t ((k - t - 1/2) P)^2 / (8 (1 + kP)^2))

    The value may exceed 1 at small blocklengths.
    """
    P = schedule.P
    n = schedule.decode_times
    lam0 = schedule.thresholds[0]
    k1 = kappa_constant(1, schedule)
    if k == 0:
        return 2.0 * k1 * math.exp(-n[0] * lam0 * lam0 / 8.0)
    if not 1 <= k <= schedule.K:
        raise DomainError(f"k must be in 0..{schedule.K}")
    if not lam0 < k * P:
        raise DomainError(f"wrong_time_bound needs lambda_0 < kP ({lam0} >= {k * P})")
    den = 8.0 * (1.0 + k * P) ** 2
    total = 2.0 * k1 * math.exp(-n[0] * ((k - lam0 / P) * P) ** 2 / den)
    prod = 1.0
    for t in range(1, k + 1):
        prod *= kappa_constant(t, schedule)
        total += 2.0 * prod * math.exp(-n[t] * ((k - t - 0.5) * P) ** 2 / den)
    return total

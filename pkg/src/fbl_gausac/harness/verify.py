"""Self-checks run by the ``verify`` mode.

Each check compares a library quantity with an independent computation
(sampling, quadrature or brute-force likelihood) and reports pass or fail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np
from scipy import integrate, stats

from .. import rng as _rng
from ..gaussian_region import stam_bound, tv_gaussian_bound
from ..mac_sim import decode_mac_ml
from ..rac_sim import decode_rac_list
from ..specfun import chi2_tail_bounds, chi2_deviation_thresholds, sphere_coord_pdf
from ..sphere import inner_product_q, sample_sphere


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    samples: int
    detail: str = ""


def check_chi2_tails(seed: int, samples: int = 200_000) -> list[CheckResult]:
    """Empirical chi-squared deviation frequencies against the exponential tail bounds."""
    out = []
    for n, t in product((50, 200), (0.5, 1.0, 2.0)):
        g = _rng.derive_rng(seed, _rng.STREAM_VERIFY, 1, n, int(t * 10))
        x = g.chisquare(n, size=samples) - n
        up_dev, lo_dev = chi2_deviation_thresholds(n, t)
        up_b, lo_b = chi2_tail_bounds(n, t)
        for side, freq, bound in (("upper", np.mean(x >= up_dev), up_b), ("lower", np.mean(x <= -lo_dev), lo_b)):
            sigma = math.sqrt(max(freq * (1 - freq), 1e-300) / samples)
            out.append(CheckResult(f"chi2_{side}_n{n}_t{t}", bool(freq <= bound + 3 * sigma), float(freq), samples,
                                   f"bound {bound:.6g}"))
    return out


def gaussian_tv_quad(m1: float, s1: float, m2: float, s2: float) -> float:
    """Total variation between two 1-D Gaussians by adaptive quadrature."""
    lo = min(m1 - 12 * s1, m2 - 12 * s2)
    hi = max(m1 + 12 * s1, m2 + 12 * s2)
    f = lambda x: abs(stats.norm.pdf(x, m1, s1) - stats.norm.pdf(x, m2, s2))
    pts = sorted({m1, m2, m1 + s1, m2 + s2, m1 - s1, m2 - s2})
    val, _ = integrate.quad(f, lo, hi, points=pts, limit=400, epsabs=1e-12)
    return 0.5 * val


def sphere_tv_quad(n: int) -> float:
    """Total variation between the scaled sphere coordinate and N(0, 1)."""
    r = math.sqrt(n)
    f = lambda q: abs(sphere_coord_pdf(q, n) - stats.norm.pdf(q))
    inside, _ = integrate.quad(f, -r, r, limit=400, epsabs=1e-13)
    outside = 2.0 * stats.norm.sf(r)
    return 0.5 * (inside + outside)


def check_tv_bounds(seed: int, pairs: int = 100) -> list[CheckResult]:
    g = _rng.derive_rng(seed, _rng.STREAM_VERIFY, 2)
    violations = 0
    worst = math.inf
    for _ in range(pairs):
        m1, m2 = g.normal(0, 1, 2)
        s1, s2 = np.exp(g.uniform(-1, 1, 2))
        bound = tv_gaussian_bound([m1], [[s1 * s1]], [m2], [[s2 * s2]])
        tv = gaussian_tv_quad(m1, s1, m2, s2)
        worst = min(worst, bound - tv)
        violations += bound < tv
    out = [CheckResult("tv_gaussian_bound", violations == 0, float(worst), pairs, f"{violations} violations")]
    for n in (10, 50, 200):
        tv = sphere_tv_quad(n)
        b = stam_bound(n, 1)
        out.append(CheckResult(f"stam_bound_n{n}", bool(tv <= b <= 8.0 / n), float(b - tv), 1,
                               f"tv {tv:.3g} bound {b:.3g} 8/n {8 / n:.3g}"))
    return out


def check_inner_products(seed: int, samples: int = 100_000, n: int = 128, users: int = 3) -> list[CheckResult]:
    """Pairwise normalized inner products of independent spherical codewords are close to i.i.d. N(0, 1)."""
    g = _rng.derive_rng(seed, _rng.STREAM_VERIFY, 3)
    x = sample_sphere(n, 1.0, g, (samples, users))
    pairs = list(combinations(range(users), 2))
    Q = np.stack([inner_product_q(x[:, i], x[:, j], 1.0, 1.0) for i, j in pairs], axis=1)
    out = []
    for c, (i, j) in enumerate(pairs):
        m, v = float(Q[:, c].mean()), float(Q[:, c].var())
        out.append(CheckResult(f"inner_q_mean_{i}{j}", abs(m) < 0.01 + 3 / math.sqrt(samples), m, samples))
        out.append(CheckResult(f"inner_q_var_{i}{j}", abs(v - 1) < 0.05, v, samples))
    corr = np.corrcoef(Q, rowvar=False)
    off = float(np.max(np.abs(corr[np.triu_indices(len(pairs), 1)]))) if len(pairs) > 1 else 0.0
    out.append(CheckResult("inner_q_pair_correlation", off < 0.02, off, samples))
    return out


def _mac_loglik_oracle(books, y) -> tuple[int, ...]:
    best, arg = -math.inf, None
    for tup in product(*[range(len(b)) for b in books]):
        mean = sum(b[m] for b, m in zip(books, tup))
        ll = float(stats.norm.logpdf(y, loc=mean).sum())
        if ll > best:
            best, arg = ll, tup
    return arg


def _rac_loglik_oracle(book, y, t) -> tuple[int, ...]:
    n = len(y)
    best, arg = -math.inf, None
    for lst in combinations(range(len(book)), t):
        mean = book[list(lst), :n].sum(axis=0)
        ll = float(stats.norm.logpdf(y, loc=mean).sum())
        if ll > best:
            best, arg = ll, lst
    return arg


def check_decoders(seed: int, instances: int = 1000) -> list[CheckResult]:
    """ML decoders against brute-force Gaussian log-likelihood maximization."""
    g = _rng.derive_rng(seed, _rng.STREAM_VERIFY, 4)
    mac_bad = 0
    for _ in range(instances):
        books = [sample_sphere(8, 1.0, g, 4) for _ in range(2)]
        msgs = g.integers(0, 4, 2)
        y = books[0][msgs[0]] + books[1][msgs[1]] + g.standard_normal(8)
        mac_bad += decode_mac_ml(books, y) != _mac_loglik_oracle(books, y)
    rac_bad = 0
    for _ in range(instances):
        book = sample_sphere(16, 1.0, g, 8)
        msgs = g.choice(8, 2, replace=False)
        y = book[msgs].sum(axis=0) + g.standard_normal(16)
        rac_bad += decode_rac_list(book, y, 2) != _rac_loglik_oracle(book, y, 2)
    return [
        CheckResult("mac_decoder_oracle", mac_bad == 0, float(mac_bad), instances, "disagreements"),
        CheckResult("rac_decoder_oracle", rac_bad == 0, float(rac_bad), instances, "disagreements"),
    ]


def run_all(seed: int, samples: int = 100_000) -> list[CheckResult]:
    return (
        check_chi2_tails(seed, samples)
        + check_tv_bounds(seed)
        + check_inner_products(seed, samples)
        + check_decoders(seed)
    )

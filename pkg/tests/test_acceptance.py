"""Acceptance criteria, each at its stated size and tolerance.

Every test records one PASS/FAIL line; the lines are repeated in the terminal
summary.  Simulation results at one worker are cached per module so the
determinism criterion can replay them with two workers.
"""

import itertools
import math
import time

import numpy as np
import pytest
from scipy import integrate, stats

from fbl_gausac.dispersion import PowerAllocation, dispersion_matrix, two_user_dispersion_matrix
from fbl_gausac.gaussian_region import (
    RateTuple,
    achievable_logM_symmetric,
    boundary_along_ray,
    lower_orthant_prob,
    region_threshold,
    stam_bound,
    tv_gaussian_bound,
)
from fbl_gausac.mac_sim import MacConfig, decode_mac_ml, rcu_mc_estimate, simulate_mac
from fbl_gausac.rac_sim import ErrorClass, build_rac_schedule, decode_rac_list, simulate_rac, wrong_time_bound
from fbl_gausac.rng import derive_rng
from fbl_gausac.specfun import chi2_deviation_thresholds, chi2_tail_bounds, sphere_coord_cdf, sphere_coord_pdf
from fbl_gausac.sphere import inner_product_q, sample_concat_sphere, sample_sphere

SEED = 20240611


# ---------------------------------------------------------------- shared work


def _c2_points():
    g = derive_rng(SEED, 2)
    pts = []
    for k in (1, 2, 3):
        for _ in range(10):
            n = int(g.integers(5000, 50_001))
            eps = float(g.uniform(0.01, 0.3))
            P = float(g.uniform(1.0, 10.0))
            pts.append((k, n, eps, P))
    return pts


def _c2_run(workers):
    out = []
    for i, (k, n, eps, P) in enumerate(_c2_points()):
        pa = PowerAllocation.symmetric(k, P)
        logm = achievable_logM_symmetric(n, eps, k, P)
        z = region_threshold(n, pa, RateTuple.symmetric(k, logm))
        est = lower_orthant_prob(dispersion_matrix(pa).values, z, 1_000_000, SEED + i, workers, confidence=0.999)
        out.append((k, n, eps, P, logm, est))
    return out


def _c4_configs():
    g = derive_rng(SEED, 4)
    return [MacConfig(64, tuple(int(m) for m in g.choice([2, 4], 2)), (1.0, 1.0), trials=10_000,
                      seed=SEED + i, inner_samples=256) for i in range(10)]


def _c4_run(workers):
    return [(cfg, simulate_mac(cfg, workers), rcu_mc_estimate(cfg, workers)) for cfg in _c4_configs()]


C7_SCHEDULE = dict(K=2, P=1.0, eps=0.1, M=2**8)


def _c7_run(workers):
    s = build_rac_schedule(**C7_SCHEDULE)
    return s, simulate_rac(s, 100_000, seed=SEED, workers=workers)


@pytest.fixture(scope="module")
def c2_results():
    t = time.perf_counter()
    res = _c2_run(1)
    return res, time.perf_counter() - t


@pytest.fixture(scope="module")
def c4_results():
    t = time.perf_counter()
    res = _c4_run(1)
    return res, time.perf_counter() - t


@pytest.fixture(scope="module")
def c7_results():
    t = time.perf_counter()
    res = _c7_run(1)
    return res, time.perf_counter() - t


# ---------------------------------------------------------------- criteria


def test_criterion_1_dispersion_consistency(report):
    t = time.perf_counter()
    g = derive_rng(SEED, 1)
    worst = 0.0
    for _ in range(50):
        P1, P2 = g.uniform(0.1, 10.0, 2)
        worst = max(worst, float(np.max(np.abs(dispersion_matrix([P1, P2]).values - two_user_dispersion_matrix(P1, P2)))))
    dt = time.perf_counter() - t
    report(1, worst <= 1e-12 and dt < 1.0, f"50 pairs, max entry difference {worst:.2e} (tol 1e-12), {dt:.3f}s")


def test_criterion_2_symmetric_formula(report, c2_results):
    res, dt = c2_results
    misses = []
    for k, n, eps, P, logm, est in res:
        if not est.contains(1 - eps):
            misses.append(f"k={k} n={n} eps={eps:.3f} P={P:.2f} p={est.point:.5f}+-{est.half_width:.5f}")
    # the ray boundary must bracket the formula as well; one spot check per k
    for k, n, eps, P, logm, _ in res[::10]:
        b = boundary_along_ray(n, eps, PowerAllocation.symmetric(k, P), [1.0] * k, count=1_000_000, seed=SEED,
                               confidence=0.999)
        if not b.contains(logm):
            misses.append(f"ray k={k}: formula {logm:.3f} outside [{b.low:.3f}, {b.high:.3f}]")
    ok = not misses and dt < 120
    report(2, ok, f"30 (k, n, eps, P) points, 10^6 samples, 99.9% CI; misses={misses or 'none'}; {dt:.1f}s")


def test_criterion_3_decoder_oracles(report):
    t = time.perf_counter()
    g = derive_rng(SEED, 3)
    mac_bad = 0
    for _ in range(1000):
        books = [sample_sphere(8, 1.0, g, 4), sample_sphere(8, 1.0, g, 4)]
        m = g.integers(0, 4, 2)
        y = books[0][m[0]] + books[1][m[1]] + g.standard_normal(8)
        best, arg = -np.inf, None
        for tup in itertools.product(range(4), range(4)):
            ll = stats.multivariate_normal.logpdf(y, mean=books[0][tup[0]] + books[1][tup[1]], cov=np.eye(8))
            if ll > best:
                best, arg = ll, tup
        mac_bad += decode_mac_ml(books, y) != arg
    rac_bad = 0
    for _ in range(1000):
        cb = sample_concat_sphere([16], 1.0, g, 8)
        a, b = g.choice(8, 2, replace=False)
        y = cb[a] + cb[b] + g.standard_normal(16)
        best, arg = -np.inf, None
        for lst in itertools.combinations(range(8), 2):
            ll = stats.multivariate_normal.logpdf(y, mean=cb[list(lst)].sum(axis=0), cov=np.eye(16))
            if ll > best:
                best, arg = ll, lst
        rac_bad += decode_rac_list(cb, y, 2) != arg
    dt = time.perf_counter() - t
    report(3, mac_bad == 0 and rac_bad == 0 and dt < 60,
           f"disagreements MAC {mac_bad}/1000, RAC list {rac_bad}/1000, {dt:.1f}s")


def test_criterion_4_rcu_dominance(report, c4_results):
    res, dt = c4_results
    worst = -np.inf
    details = []
    for cfg, sim, rcu in res:
        slack = rcu.point + 3 * math.hypot(sim.error.half_width, rcu.half_width) - sim.error.point
        worst = max(worst, -slack)
        details.append(f"M={cfg.M}: sim {sim.error.point:.2e} rcu {rcu.point:.2e}")
    report(4, worst <= 0 and dt < 300, f"10 configs at n=64, 10^4 trials; {'; '.join(details)}; {dt:.1f}s")


def test_criterion_5_distributions(report):
    t = time.perf_counter()
    problems = []
    for n in (16, 64, 256):
        q = sample_sphere(n, 1.0, derive_rng(SEED, 5, n), 100_000)[:, 0]
        p = stats.kstest(q, lambda v: sphere_coord_cdf(v, n)).pvalue
        if not p > 0.01:
            problems.append(f"KS n={n} p={p:.4f}")
    x1 = sample_sphere(64, 1.0, derive_rng(SEED, 5, 1), 100_000)
    x2 = sample_sphere(64, 1.0, derive_rng(SEED, 5, 2), 100_000)
    Q = inner_product_q(x1, x2, 1.0, 1.0)
    if not (abs(Q.mean()) <= 0.01 and abs(Q.var() - 1) <= 0.05):
        problems.append(f"Q mean {Q.mean():.4f} var {Q.var():.4f}")
    samples = 1_000_000
    for n, tt in itertools.product((50, 200), (0.5, 1.0, 2.0)):
        x = derive_rng(SEED, 5, n, int(10 * tt)).chisquare(n, samples) - n
        up, lo = chi2_deviation_thresholds(n, tt)
        bu, bl = chi2_tail_bounds(n, tt)
        for f, bound in ((np.mean(x >= up), bu), (np.mean(x <= -lo), bl)):
            if f > bound + 3 * math.sqrt(f * (1 - f) / samples):
                problems.append(f"chi2 n={n} t={tt} freq {f:.4f} > {bound:.4f}")
    dt = time.perf_counter() - t
    report(5, not problems and dt < 120, f"KS/moments/chi-squared tails; problems={problems or 'none'}; {dt:.1f}s")


def _tv(p, q, lo, hi):
    return 0.5 * integrate.quad(lambda v: abs(p(v) - q(v)), lo, hi, limit=400, points=[0.0])[0]


def test_criterion_6_tv_bounds(report):
    t = time.perf_counter()
    g = derive_rng(SEED, 6)
    violations = 0
    for _ in range(100):
        m1, m2 = g.normal(0, 1, 2)
        s1, s2 = g.uniform(0.3, 3.0, 2)
        lo, hi = min(m1, m2) - 15 * max(s1, s2), max(m1, m2) + 15 * max(s1, s2)
        tv = _tv(stats.norm(m1, s1).pdf, stats.norm(m2, s2).pdf, lo, hi)
        violations += tv_gaussian_bound([m1], [[s1 * s1]], [m2], [[s2 * s2]]) < tv
    stam = []
    for n in (10, 50, 200):
        r = math.sqrt(n)
        tv = _tv(lambda v: sphere_coord_pdf(v, n), stats.norm.pdf, -r - 30, r + 30)
        b = stam_bound(n, 1)
        stam.append(f"n={n}: tv {tv:.5f} <= {b:.5f} <= {8 / n:.5f}")
        violations += not (tv <= b <= 8 / n)
    dt = time.perf_counter() - t
    report(6, violations == 0 and dt < 60, f"violations {violations}; {'; '.join(stam)}; {dt:.1f}s")


def test_criterion_7_rac_protocol(report, c7_results):
    (s, b), dt = c7_results
    problems = []
    lines = []
    for k in range(3):
        N = b.trials[k]
        if b.power_violations[k] != 0:
            problems.append(f"k={k}: {b.power_violations[k]} power violations")
        rep = b.rate(k, ErrorClass.REPETITION).point
        p0 = k * (k - 1) / (2 * s.M)
        if abs(rep - p0) > 3 * math.sqrt(rep * (1 - rep) / N):
            problems.append(f"k={k}: repetition {rep:.5f} vs {p0:.5f}")
        wt = b.rate(k, ErrorClass.WRONG_TIME).point
        bound = wrong_time_bound(s, k)
        if wt > bound + 3 * math.sqrt(wt * (1 - wt) / N):
            problems.append(f"k={k}: wrong-time {wt:.5f} > bound {bound:.4g}")
        lines.append(f"k={k} rep {rep:.5f} wrong-time {wt:.4f} (bound {bound:.3g})")
    fa = b.rate(0).point
    eps0 = s.eps[0]
    if fa > eps0 + 3 * math.sqrt(fa * (1 - fa) / b.trials[0]):
        problems.append(f"false alarm {fa:.4f} > {eps0}")
    ok = not problems and dt < 600
    report(7, ok, f"times {s.decode_times}, 10^5 epochs per k; {'; '.join(lines)}; false alarm {fa:.5f}; "
                  f"problems={problems or 'none'}; {dt:.1f}s")


def test_criterion_8_determinism(report, c2_results, c4_results, c7_results):
    diffs = []
    for a, b in zip(c2_results[0], _c2_run(2)):
        if a[-1].successes != b[-1].successes:
            diffs.append(f"orthant k={a[0]} n={a[1]}")
    for (cfg, sim, rcu), (_, sim2, rcu2) in zip(c4_results[0], _c4_run(2)):
        if (sim.errors, sim.per_user_errors, rcu.point) != (sim2.errors, sim2.per_user_errors, rcu2.point):
            diffs.append(f"MAC M={cfg.M}")
    _, b1 = c7_results[0]
    _, b2 = _c7_run(2)
    if b1.to_dict() != b2.to_dict():
        diffs.append("RAC breakdown")
    report(8, not diffs, f"criteria 2, 4 and 7 replayed with 2 workers; differences={diffs or 'none'}")

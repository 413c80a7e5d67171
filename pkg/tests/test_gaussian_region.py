import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from fbl_gausac.dispersion import PowerAllocation, dispersion_matrix
from fbl_gausac.errors import DomainError, MatrixError
from fbl_gausac.gaussian_region import (
    RateTuple,
    Verdict,
    achievable_logM_symmetric,
    boundary_along_ray,
    lambda0_for,
    lower_orthant_prob,
    min_n0,
    mvn_sample,
    rate_tuple_achievable,
    stam_bound,
    tv_gaussian_bound,
)
from fbl_gausac.specfun import sphere_coord_pdf


def quad_tv_1d(p, q, lo=-40, hi=40):
    val, _ = integrate.quad(lambda x: abs(p(x) - q(x)), lo, hi, limit=400, points=[0.0])
    return 0.5 * val


class TestMvnSample:
    def test_zero_covariance_is_degenerate(self):
        X = mvn_sample([1.0, -2.0, 3.5], np.zeros((3, 3)), 1000, seed=4)
        assert np.array_equal(X, np.tile([1.0, -2.0, 3.5], (1000, 1)))

    def test_sample_covariance(self):
        V = dispersion_matrix([1.0, 1.0]).values
        X = mvn_sample(np.zeros(3), V, 1_000_000, seed=11)
        assert np.max(np.abs(np.cov(X, rowvar=False) - V)) < 0.01
        assert np.max(np.abs(X.mean(axis=0))) < 0.01

    def test_determinism(self):
        V = dispersion_matrix([1.0, 2.0]).values
        a = mvn_sample([0, 0, 0], V, 70_000, seed=99)
        b = mvn_sample([0, 0, 0], V, 70_000, seed=99)
        assert a.tobytes() == b.tobytes()
        c = mvn_sample([0, 0, 0], V, 70_000, seed=100)
        assert not np.array_equal(a, c)

    def test_prefix_stable_across_counts(self):
        # chunked streams: a shorter run is a prefix of a longer one
        a = mvn_sample([0.0], [[1.0]], 1000, seed=5)
        b = mvn_sample([0.0], [[1.0]], 200_000, seed=5)
        assert np.array_equal(a, b[:1000])

    def test_singular_psd_accepted(self):
        cov = np.array([[1.0, 1.0], [1.0, 1.0]])
        X = mvn_sample([0.0, 0.0], cov, 1000, seed=1)
        assert np.allclose(X[:, 0], X[:, 1], atol=1e-12)

    def test_not_psd(self):
        with pytest.raises(MatrixError):
            mvn_sample([0, 0], [[1.0, 2.0], [2.0, 1.0]], 10, seed=0)

    def test_not_symmetric(self):
        with pytest.raises(MatrixError):
            mvn_sample([0, 0], [[1.0, 0.5], [0.0, 1.0]], 10, seed=0)


class TestOrthant:
    def test_infinite_threshold(self):
        est = lower_orthant_prob(np.eye(3), [np.inf] * 3, 10_000, seed=0)
        assert est.point == 1.0

    def test_symmetry(self):
        est = lower_orthant_prob([[1.0]], [0.0], 200_000, seed=3)
        assert est.contains(0.5)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_product_of_marginals(self, seed):
        sig = np.array([0.5, 1.0, 2.0])
        z = np.array([0.3, -0.2, 1.5])
        ref = float(np.prod(stats.norm.cdf(z / sig)))
        est = lower_orthant_prob(np.diag(sig**2), z, 200_000, seed=seed, confidence=0.999)
        assert est.contains(ref)

    def test_bivariate_against_scipy(self):
        cov = [[1.0, 0.6], [0.6, 2.0]]
        ref = stats.multivariate_normal(mean=[0, 0], cov=cov).cdf([0.4, 0.1])
        est = lower_orthant_prob(cov, [0.4, 0.1], 400_000, seed=8, confidence=0.999)
        assert est.contains(ref)

    def test_dimension_mismatch(self):
        with pytest.raises(MatrixError):
            lower_orthant_prob(np.eye(2), [0.0, 0.0, 0.0], 10, seed=0)

    @given(st.integers(0, 2), st.floats(0.0, 1.0))
    @settings(max_examples=25, deadline=None)
    def test_monotone_common_random_numbers(self, coord, delta):
        V = dispersion_matrix([1.0, 1.5]).values
        z = np.array([0.1, -0.3, 0.4])
        z2 = z.copy()
        z2[coord] += delta
        a = lower_orthant_prob(V, z, 20_000, seed=17)
        b = lower_orthant_prob(V, z2, 20_000, seed=17)
        assert b.point >= a.point


class TestRateTuple:
    @given(st.lists(st.floats(0, 100), min_size=1, max_size=5))
    def test_additive_over_disjoint_subsets(self, logm):
        rt = RateTuple.from_log_m(logm)
        K = len(logm)
        full = (1 << K) - 1
        for a in range(1, full + 1):
            b = full & ~a
            if b:
                assert abs(rt[a] + rt[b] - rt[full]) <= 1e-12 * max(1.0, rt[full])

    def test_per_user(self):
        assert np.array_equal(RateTuple.from_log_m([1.0, 2.0, 3.0]).per_user(), [1.0, 2.0, 3.0])


class TestSymmetricFormula:
    def test_half_eps(self):
        n, k, P = 300, 2, 1.5
        ref = (n * 0.5 * math.log1p(k * P) + 0.5 * math.log(n) + 0.7) / k
        assert achievable_logM_symmetric(n, 0.5, k, P, c0=0.7) == pytest.approx(ref, abs=1e-12)

    def test_single_user_is_point_to_point(self):
        n, eps, P = 1000, 1e-3, 3.0
        V = P * (P + 2) / (2 * (1 + P) ** 2)
        ref = n * 0.5 * math.log1p(P) - math.sqrt(n * V) * stats.norm.isf(eps) + 0.5 * math.log(n)
        assert achievable_logM_symmetric(n, eps, 1, P) == pytest.approx(ref, rel=1e-12)

    def test_regression_pin_n512(self):
        mp.mp.dps = 30
        n, k, P, eps = mp.mpf(512), 2, mp.mpf(1), mp.mpf("0.1")
        C = mp.log(1 + k * P) / 2
        V = k * P * (k * P + 2) / (2 * (1 + k * P) ** 2) + k * (k - 1) * P**2 / (2 * (1 + k * P) ** 2)
        qinv = -mp.sqrt(2) * mp.erfinv(2 * eps - 1)
        ref = (n * C - mp.sqrt(n * V) * qinv + mp.log(n) / 2) / k
        got = achievable_logM_symmetric(512, 0.1, 2, 1.0)
        assert abs(got - float(ref)) <= 1e-9
        assert abs(got - 131.374962410) <= 1e-9

    def test_domain(self):
        with pytest.raises(DomainError):
            achievable_logM_symmetric(1, 0.1, 1, 1.0)
        with pytest.raises(DomainError):
            achievable_logM_symmetric(100, 1.0, 1, 1.0)
        with pytest.raises(DomainError):
            achievable_logM_symmetric(100, 0.1, 0, 1.0)

    @given(st.integers(10, 10**6), st.floats(1e-4, 0.5), st.floats(1e-4, 0.5), st.integers(1, 4), st.floats(0.1, 10))
    def test_monotone_in_eps(self, n, e1, e2, k, P):
        lo, hi = min(e1, e2), max(e1, e2)
        assert achievable_logM_symmetric(n, lo, k, P) <= achievable_logM_symmetric(n, hi, k, P)


class TestMembership:
    def test_zero_rate_achievable(self):
        v, _ = rate_tuple_achievable(100, 0.1, [1.0, 1.0], RateTuple.symmetric(2, 0.0), count=50_000)
        assert v is Verdict.ACHIEVABLE

    @pytest.mark.parametrize("k,n,eps,P", [(1, 2000, 0.1, 1.0), (2, 5000, 0.05, 2.0), (3, 8000, 0.2, 1.0)])
    def test_boundary_shifts(self, k, n, eps, P):
        b = achievable_logM_symmetric(n, eps, k, P)
        pa = PowerAllocation.symmetric(k, P)
        inside, _ = rate_tuple_achievable(n, eps, pa, RateTuple.symmetric(k, b - 0.1 * math.sqrt(n)), count=100_000)
        outside, _ = rate_tuple_achievable(n, eps, pa, RateTuple.symmetric(k, b + 0.1 * math.sqrt(n)), count=100_000)
        assert inside is Verdict.ACHIEVABLE
        assert outside is Verdict.NOT

    def test_shrinking_a_coordinate_keeps_achievable(self):
        pa = [1.0, 2.0]
        rt = RateTuple.from_log_m([300.0, 420.0])
        v, est = rate_tuple_achievable(2000, 0.1, pa, rt, count=50_000, seed=2)
        assert v is Verdict.ACHIEVABLE
        for lm in ([250.0, 420.0], [300.0, 100.0]):
            v2, est2 = rate_tuple_achievable(2000, 0.1, pa, RateTuple.from_log_m(lm), count=50_000, seed=2)
            assert v2 is Verdict.ACHIEVABLE and est2.point >= est.point

    def test_uncertain_when_target_in_interval(self):
        n, eps = 4000, 0.1
        b = boundary_along_ray(n, eps, [1.0, 1.0], [1.0, 1.0], count=20_000, seed=6)
        v, est = rate_tuple_achievable(n, eps, [1.0, 1.0], RateTuple.symmetric(2, b.scale), count=20_000, seed=6)
        assert v is Verdict.UNCERTAIN and est.contains(1 - eps)

    def test_ray_boundary_matches_orthant_at_same_seed(self):
        n, eps, pa = 3000, 0.1, [1.0, 3.0]
        b = boundary_along_ray(n, eps, pa, [1.0, 2.0], count=50_000, seed=21)
        just_in = lower_orthant_prob(dispersion_matrix(pa).values,
                                     _z(n, pa, [b.scale - 1e-9, 2 * b.scale - 2e-9]), 50_000, seed=21)
        just_out = lower_orthant_prob(dispersion_matrix(pa).values,
                                      _z(n, pa, [b.scale * (1 + 1e-9) + 1e-9, 2 * b.scale * (1 + 1e-9) + 2e-9]),
                                      50_000, seed=21)
        assert just_in.point >= 1 - eps > just_out.point
        assert b.low <= b.scale <= b.high

    def test_ray_direction_checked(self):
        with pytest.raises(DomainError):
            boundary_along_ray(100, 0.1, [1.0, 1.0], [0.0, 0.0])


def _z(n, pa, logm):
    from fbl_gausac.gaussian_region import region_threshold

    return region_threshold(n, PowerAllocation(tuple(pa)), RateTuple.from_log_m(logm))


class TestMinN0:
    def test_value(self):
        c = min_n0(math.e**10, 1.0)
        assert c.n0 == 80
        assert c.lambda0 == pytest.approx(lambda0_for(80, 1.0, 0.1))

    @given(st.integers(3, 10**6), st.floats(0.1, 10))
    def test_logarithmic_growth(self, n1, P):
        assert min_n0(n1 * n1, P).n0 <= 2 * min_n0(n1, P).n0 + 1

    def test_decreasing_in_power(self):
        grid = np.linspace(0.05, 5, 200)
        vals = [min_n0(10_000, P).n0 for P in grid]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_lambda_meets_target(self):
        from fbl_gausac.dispersion import kappa1

        lam = lambda0_for(200, 2.0, 0.05)
        assert 2 * kappa1(2.0) * math.exp(-200 * lam**2 / 8) == pytest.approx(0.05, rel=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            min_n0(2, 1.0)


class TestTvBounds:
    def test_identical(self):
        assert tv_gaussian_bound([0, 1], np.eye(2), [0, 1], np.eye(2)) == 0.0

    def test_mean_shift(self):
        assert tv_gaussian_bound([0.0], [[1.0]], [0.2], [[1.0]]) == pytest.approx(0.1, abs=1e-15)

    def test_variance_change(self):
        bound = tv_gaussian_bound([0.0], [[1.0]], [0.0], [[1.1]])
        assert bound == pytest.approx((2 + math.sqrt(6)) / 4 * 0.1, abs=1e-12)
        tv = quad_tv_1d(stats.norm(0, 1).pdf, stats.norm(0, math.sqrt(1.1)).pdf)
        # closed form for equal means: densities cross at +-x
        x = math.sqrt(math.log(1.1) / (1 - 1 / 1.1))
        exact = 2 * (stats.norm.cdf(x) - stats.norm.cdf(x / math.sqrt(1.1)))
        assert tv == pytest.approx(exact, abs=1e-9)
        assert bound >= tv

    def test_singular_first_covariance(self):
        with pytest.raises(MatrixError):
            tv_gaussian_bound([0, 0], np.zeros((2, 2)), [0, 0], np.eye(2))

    def test_random_pairs_never_violated(self):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            m1, m2 = rng.normal(0, 1, 2)
            s1, s2 = rng.uniform(0.3, 3, 2)
            tv = quad_tv_1d(stats.norm(m1, s1).pdf, stats.norm(m2, s2).pdf)
            assert tv_gaussian_bound([m1], [[s1 * s1]], [m2], [[s2 * s2]]) >= tv

    def test_stam_value(self):
        assert stam_bound(100, 1) == pytest.approx(2 * (math.sqrt(100 / 97) - 1), abs=1e-15)
        assert abs(stam_bound(100, 1) - 0.03069) < 1e-5
        assert stam_bound(100, 1) <= 8 / 100

    @pytest.mark.parametrize("n", [10, 50, 200])
    def test_stam_dominates_sphere_law(self, n):
        r = math.sqrt(n)
        tv = quad_tv_1d(lambda x: sphere_coord_pdf(x, n), stats.norm.pdf, -r - 30, r + 30)
        assert stam_bound(n, 1) >= tv
        assert stam_bound(n, 1) <= 8 / n

    def test_stam_vanishes(self):
        assert stam_bound(10**9, 2) < 1e-8

    def test_stam_domain(self):
        with pytest.raises(DomainError):
            stam_bound(3, 1)

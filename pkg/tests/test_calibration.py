import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ustatgof import calibration as cal
from ustatgof.distributions import (
    CountVector,
    ProbVector,
    identity_weight,
    make_weight,
    mixture_weight,
    piecewise_uniform,
    power_law,
    sample_count_matrix,
    uniform,
)
from ustatgof.errors import (
    CapabilityError,
    DomainError,
    InsufficientReplicatesError,
    InsufficientSampleError,
    ZeroVarianceError,
)
from ustatgof.statistics import (
    batch_statistics,
    resolve_statistic,
    u_statistic,
    variance_u,
)

from conftest import WEIGHT_SPECS, dense_sigma, random_simplex


def poisson_sf_oracle(c, lam):
    """1 - sum_{k<=c} e^-lam lam^k / k!, summed in log space."""
    cdf = math.fsum(math.exp(-lam + k * math.log(lam) - math.lgamma(k + 1)) for k in range(c + 1))
    return 1.0 - cdf


class TestSpecialFunctions:
    # standard normal table values (Abramowitz & Stegun, Table 26.1 / 26.5)
    @pytest.mark.parametrize("alpha, z", [
        (0.05, 1.6448536269514722),
        (0.025, 1.959963984540054),
        (0.01, 2.3263478740408408),
        (0.001, 3.090232306167813),
        (0.5, 0.0),
    ])
    def test_upper_quantile_table(self, alpha, z):
        assert cal.normal_upper_quantile(alpha) == pytest.approx(z, abs=1e-10)

    @pytest.mark.parametrize("x, phi", [
        (0.0, 0.5),
        (1.0, 0.8413447460685429),
        (1.96, 0.9750021048517795),
        (-2.0, 0.022750131948179195),
        (3.0, 0.9986501019683699),
    ])
    def test_cdf_table(self, x, phi):
        assert cal.normal_cdf(x) == pytest.approx(phi, abs=1e-10)

    @given(st.floats(1e-6, 1 - 1e-6))
    def test_quantile_inverts_cdf(self, alpha):
        assert 1.0 - cal.normal_cdf(cal.normal_upper_quantile(alpha)) == pytest.approx(alpha, abs=1e-10)

    @pytest.mark.parametrize("c", [0, 1, 2, 3, 7, 20])
    @pytest.mark.parametrize("lam", [0.1, 1.0, 1.99, 5.0, 12.5])
    def test_poisson_sf_matches_pmf_sum(self, c, lam):
        assert cal.poisson_sf(c, lam) == pytest.approx(poisson_sf_oracle(c, lam), abs=1e-12)

    def test_poisson_sf_edges(self):
        assert cal.poisson_sf(-1, 2.0) == 1.0
        assert cal.poisson_sf(3, 0.0) == 0.0


class TestPoissonRegime:
    def test_reference_uniform(self):
        pi = uniform(10000)
        eta = cal.poisson_reference(pi, pi, 200)
        assert eta == pytest.approx((1.99, 1.99, 1.99), rel=1e-12)

    @pytest.mark.parametrize("omega1", [0.2, 0.5, 0.8])
    def test_reference_piecewise(self, omega1):
        d = 1000
        pi, pi0 = piecewise_uniform(d, omega1), uniform(d)
        eta1, eta0, eta2 = cal.poisson_reference(pi, pi0, 100)
        omega2 = 2 - omega1
        assert eta1 == pytest.approx(eta0 * (omega1 ** 2 + omega2 ** 2) / 2, rel=1e-12)
        assert eta2 == pytest.approx(eta0, rel=1e-12)

    def test_reference_needs_two(self):
        with pytest.raises(InsufficientSampleError):
            cal.poisson_reference(uniform(3), uniform(3), 1)

    def test_critical_value_example(self):
        assert cal.poisson_critical_value(1.0, 0.05) == 3
        assert cal.poisson_sf(3, 1.0) == pytest.approx(0.018988156876153808, abs=1e-12)
        assert cal.poisson_sf(2, 1.0) > 0.05

    @given(st.floats(0.01, 50), st.floats(0.001, 0.999))
    def test_critical_value_is_smallest(self, eta, alpha):
        c = cal.poisson_critical_value(eta, alpha)
        assert cal.poisson_sf(c, eta) <= alpha
        assert c == 0 or cal.poisson_sf(c - 1, eta) > alpha

    def test_critical_value_zero_for_large_alpha(self):
        eta = 0.5
        assert cal.poisson_critical_value(eta, 1 - math.exp(-eta) + 1e-9) == 0

    def test_critical_value_monotone(self):
        etas = np.linspace(0.05, 30, 200)
        cs = [cal.poisson_critical_value(float(e), 0.05) for e in etas]
        assert all(a <= b for a, b in zip(cs, cs[1:]))
        alphas = np.linspace(0.001, 0.5, 100)
        cs = [cal.poisson_critical_value(4.0, float(a)) for a in alphas]
        assert all(a >= b for a, b in zip(cs, cs[1:]))

    def test_critical_value_rejects_bad_eta(self):
        with pytest.raises(DomainError):
            cal.poisson_critical_value(0.0, 0.05)

    def test_test_statistic_is_collision_count(self, rng):
        d, n = 50, 30
        pi0 = uniform(d)
        for counts in sample_count_matrix(pi0, n, 3, 0, 0, 20):
            cv = CountVector(counts)
            res = cal.poisson_test(cv, pi0, 0.05)
            u = u_statistic(cv, pi0, identity_weight(d))
            assert res.statistic == round(math.comb(n, 2) * (u + 1 / d))
            assert abs(math.comb(n, 2) * (u + 1 / d) - res.statistic) <= 1e-9
            assert res.critical_value == cal.poisson_critical_value(math.comb(n, 2) / d, 0.05)
            if res.reject:
                assert res.p_value <= 0.05

    def test_no_collisions(self):
        cv = CountVector([1] * 10 + [0] * 90)
        res = cal.poisson_test(cv, uniform(100), 0.05)
        assert (res.statistic, res.p_value, res.reject) == (0.0, 1.0, False)

    def test_empirical_size(self):
        d, n, reps, alpha = 10000, 200, 5000, 0.05
        pi0 = uniform(d)
        st_ = resolve_statistic("collision", pi0)
        w = batch_statistics(sample_count_matrix(pi0, n, 11, 0, 0, reps), pi0, [st_])["collision"]
        c = cal.poisson_critical_value(cal.poisson_reference(pi0, pi0, n)[1], alpha)
        rate = float(np.mean(w > c))
        assert rate <= alpha + 3 * math.sqrt(alpha * (1 - alpha) / reps)

    def test_power_limits(self):
        assert cal.poisson_power(1e-9, 3) < 1e-30
        powers = [cal.poisson_power(e, 5) for e in np.linspace(0.1, 20, 100)]
        assert all(a < b for a, b in zip(powers, powers[1:]))

    def test_power_piecewise_setting(self):
        eta0 = cal.poisson_reference(uniform(10000), uniform(10000), 200)[1]
        c = cal.poisson_critical_value(eta0, 0.05)
        assert cal.poisson_power(1.25 * eta0, c) > cal.poisson_power(eta0, c)

    def test_tv_bound_value(self):
        # 2 * 200^3 * ((1 - e^-1.99) / 1.99) * 2 / 10000^2, evaluated directly
        expected = 2 * 200 ** 3 * (1 - math.exp(-1.99)) / 1.99 * 2e-8
        assert cal.tv_bound(uniform(10000), 200) == pytest.approx(expected, rel=1e-12)
        assert cal.tv_bound(uniform(10000), 200) == pytest.approx(0.13882284615951376, rel=1e-12)

    def test_tv_bound_doubling_d(self):
        # n^3/d^2 homogeneity up to the (1 - e^-eta)/eta factor, which changes with eta
        n, d = 200, 5000
        g = lambda eta: -math.expm1(-eta) / eta
        eta = math.comb(n, 2) / d
        ratio = cal.tv_bound(uniform(d), n) / cal.tv_bound(uniform(2 * d), n)
        assert ratio == pytest.approx(4 * g(eta) / g(eta / 2), rel=1e-12)

    def test_tv_bound_permutation_invariant(self, rng):
        pi = random_simplex(rng, 40)
        perm = rng.permutation(40)
        b = cal.tv_bound(pi, 30)
        assert b >= 0
        assert cal.tv_bound(ProbVector(pi.values[perm]), 30) == pytest.approx(b, rel=1e-12)


class TestGaussianRegime:
    def test_zero_statistic(self):
        # uniform d=2, Y=(3,1): sum Y(Y-1) = 6 = n(n-1)/d, so U_I = 0
        pi0 = uniform(2)
        res = cal.gaussian_test(CountVector([3, 1]), pi0, identity_weight(2), 0.05)
        assert res.statistic == pytest.approx(0.0, abs=1e-12)
        assert res.p_value == pytest.approx(0.5, abs=1e-12)
        assert res.reject is False

    def test_uniform_identity_denominator(self):
        d = 50
        assert cal.null_trace(uniform(d), identity_weight(d)) == pytest.approx((1 / d) * (1 - 1 / d), rel=1e-12)

    def test_degenerate_null(self):
        pi0 = ProbVector([1.0, 0.0, 0.0])
        with pytest.raises(ZeroVarianceError):
            cal.gaussian_test(CountVector([5, 0, 0]), pi0, identity_weight(3), 0.05)

    def test_power_at_null(self, rng):
        for kind, param in WEIGHT_SPECS:
            pi0 = random_simplex(rng, 15)
            w = make_weight(kind, pi0, param)
            assert cal.gaussian_power(pi0, pi0, w, 37, 0.05) == pytest.approx(0.05, abs=1e-10)

    def test_power_monotone_in_n(self):
        pi0, pi = power_law(200, 1), power_law(200, 1.5)
        for w in (identity_weight(200), mixture_weight(pi0)):
            powers = [cal.gaussian_power(pi0, pi, w, n) for n in range(2, 400, 7)]
            assert all(a <= b + 1e-15 for a, b in zip(powers, powers[1:]))

    def test_forms_agree_in_their_regimes(self):
        pi0, pi = power_law(100, 1), power_law(100, 2)
        w = mixture_weight(pi0)
        full = cal.gaussian_power(pi0, pi, w, 5000)
        strong = cal.gaussian_power(pi0, pi, w, 5000, form="strong_signal")
        assert full == pytest.approx(strong, abs=1e-3)
        pi_near = ProbVector.from_values(pi0.values * (1 + 0.01 * np.sin(np.arange(100))))
        full = cal.gaussian_power(pi0, pi_near, w, 50)
        weak = cal.gaussian_power(pi0, pi_near, w, 50, form="weak_signal")
        assert full == pytest.approx(weak, abs=1e-2)

    def test_strong_signal_at_null(self):
        pi0 = uniform(10)
        with pytest.raises(DomainError):
            cal.gaussian_power(pi0, pi0, identity_weight(10), 20, form="strong_signal")

    def test_unknown_form(self):
        with pytest.raises(DomainError):
            cal.gaussian_power(uniform(3), uniform(3), identity_weight(3), 5, form="bogus")


class TestMinimax:
    def test_matches_variance_u(self, rng):
        for kind, param in WEIGHT_SPECS:
            pi0 = random_simplex(rng, 25)
            w = make_weight(kind, pi0, param)
            t = cal.minimax_critical_value(pi0, w, 60, 0.05)
            assert t == pytest.approx(math.sqrt(variance_u(pi0, pi0, w, 60) / 0.05), rel=1e-12)

    def test_scaling(self):
        pi0 = power_law(300, 1)
        w = mixture_weight(pi0)
        for n in (5, 50, 500):
            t = cal.minimax_critical_value(pi0, w, n, 0.05)
            t4 = math.sqrt(cal.null_trace(pi0, w) / (0.05 * 4 * math.comb(n, 2)))
            assert t4 == pytest.approx(t / 2, rel=1e-12)
            assert t * math.sqrt(math.comb(n, 2)) == pytest.approx(
                cal.minimax_critical_value(pi0, w, 7, 0.05) * math.sqrt(21), rel=1e-12)

    def test_uniform_mixture_dense_oracle(self):
        d, n, alpha = 30, 40, 0.05
        pi0 = uniform(d)
        w = mixture_weight(pi0)
        np.testing.assert_allclose(w.a, d, rtol=1e-12)
        m = np.diag(w.a) @ dense_sigma(pi0)
        dense = float(np.trace(m @ m))
        assert dense == pytest.approx(d ** 2 * (1 / d) * (1 - 1 / d), rel=1e-12)
        t = cal.minimax_critical_value(pi0, w, n, alpha)
        assert t == pytest.approx(math.sqrt(dense / (alpha * math.comb(n, 2))), rel=1e-12)

    def test_no_p_value(self):
        d = 5
        res = cal.minimax_test(CountVector([3, 0, 0, 0, 0]), uniform(d), mixture_weight(uniform(d)))
        assert res.p_value is None
        assert "p_value" not in res.to_dict()
        assert res.reject == (res.statistic > res.critical_value)

    def test_planner_values(self):
        eps_sq, rate = cal.separation_planner(10000, 1000, 0.05, 0.05, 1.0)
        assert eps_sq == pytest.approx(0.1 * (1 / math.sqrt(0.05) + 20), rel=1e-12)
        assert eps_sq == pytest.approx(2.4472135954999583, rel=1e-12)
        assert rate == pytest.approx(0.31622776601683794, rel=1e-12)
        assert cal.separation_planner(10000, 2000)[0] == pytest.approx(eps_sq / 2, rel=1e-12)

    @pytest.mark.parametrize("args", [(0, 10), (10, 0), (10, 10, 0.05, 0.0), (10, 10, 0.05, 1.5),
                                      (10, 10, 0.05, 0.05, -1.0)])
    def test_planner_domain(self, args):
        with pytest.raises(DomainError):
            cal.separation_planner(*args)


def literal_kernel_moments(pi, pi0, a):
    """E[h^4] and E[h(X,Y)^2 h(X,Z)^2] by explicit loops over bin pairs."""
    d = pi.d
    p, q = pi.values, pi0.values
    s = math.fsum(a * q * q)
    h = [[(a[j] if j == k else 0.0) - a[j] * q[j] - a[k] * q[k] + s for k in range(d)] for j in range(d)]
    e4 = math.fsum(p[j] * p[k] * h[j][k] ** 4 for j in range(d) for k in range(d))
    cross = math.fsum(p[j] * math.fsum(p[k] * h[j][k] ** 2 for k in range(d)) ** 2 for j in range(d))
    return e4, cross


class TestDiagnostics:
    @pytest.mark.parametrize("d", [10, 57, 200])
    def test_uniform_values(self, d):
        n = 30
        pi = uniform(d)
        diag = cal.regime_diagnostics(pi, pi, identity_weight(d), n)
        assert diag.thm2_trace_ratio == pytest.approx(1 / d + 1 / (d * (d - 1)), rel=1e-9)
        e4 = (1 / d) * (1 - 1 / d) * (1 / d ** 3 + (1 - 1 / d) ** 3)
        assert diag.kernel_fourth_moment == pytest.approx(e4, rel=1e-9)
        assert diag.kernel_cross_moment == pytest.approx((1 / d ** 2) * (1 - 1 / d) ** 2, rel=1e-9)
        assert diag.p1 == pytest.approx(2 * n ** 3 / d ** 2, rel=1e-12)
        assert diag.p3 == pytest.approx(0.0, abs=1e-9)
        assert diag.snr == 0.0
        assert diag.suggested_regime in ("poisson", "gaussian_null")

    def test_moments_match_literal_oracle(self, rng):
        for kind, param in WEIGHT_SPECS:
            d = int(rng.integers(2, 101))
            pi, pi0 = random_simplex(rng, d), random_simplex(rng, d)
            w = make_weight(kind, pi0, param)
            diag = cal.regime_diagnostics(pi, pi0, w, 25)
            e4, cross = literal_kernel_moments(pi, pi0, w.a)
            assert diag.kernel_fourth_moment == pytest.approx(e4, rel=1e-9)
            assert diag.kernel_cross_moment == pytest.approx(cross, rel=1e-9)
            for v in (diag.thm2_trace_ratio, diag.thm2_moment_ratio, diag.snr, diag.remark2_gap, diag.p1):
                assert v >= 0

    def test_p_conditions_literal(self, rng):
        pi, pi0 = random_simplex(rng, 12), random_simplex(rng, 12)
        n = 17
        diag = cal.regime_diagnostics(pi, pi0, identity_weight(12), n)
        p, q = pi.values.tolist(), pi0.values.tolist()
        p1 = n ** 3 * (sum(x ** 3 for x in p) + sum(x * x for x in p) ** 2)
        p3 = n ** 3 * (sum(x * y * y for x, y in zip(p, q)) - sum(x * y for x, y in zip(p, q)) ** 2)
        assert diag.p1 == pytest.approx(p1, rel=1e-12)
        assert diag.p3 == pytest.approx(p3, rel=1e-9, abs=1e-15)

    def test_regimes(self):
        d = 1000
        pi0 = power_law(d, 1)
        w = identity_weight(d)
        assert cal.regime_diagnostics(pi0, pi0, w, 10).suggested_regime == "poisson"
        assert cal.regime_diagnostics(pi0, pi0, w, 500).suggested_regime == "gaussian_null"
        assert cal.regime_diagnostics(power_law(d, 3), pi0, w, 5000).suggested_regime == "gaussian_strong_signal"
        near = ProbVector.from_values(pi0.values * (1 + 0.01 * np.cos(np.arange(d))))
        assert cal.regime_diagnostics(near, pi0, w, 500).suggested_regime == "gaussian_weak_signal"
        loose = cal.RegimeThresholds(p1_max=1e9, eta0_max=1e9)
        assert cal.regime_diagnostics(pi0, pi0, w, 500, thresholds=loose).suggested_regime == "poisson"

    def test_capability_cap(self):
        d = cal.DENSE_TRACE_CAP + 1
        pi = uniform(d)
        with pytest.raises(CapabilityError) as info:
            cal.regime_diagnostics(pi, pi, identity_weight(d), 100)
        partial = info.value.partial
        assert partial.thm2_trace_ratio is None
        assert partial.p1 == pytest.approx(2 * 100 ** 3 / d ** 2, rel=1e-12)
        diag = cal.regime_diagnostics(pi, pi, identity_weight(d), 100, strict=False)
        assert diag.warnings and diag.warnings[0]["code"] == CapabilityError.code


class TestMonteCarloCalibration:
    def test_deterministic(self):
        pi0 = power_law(50, 1)
        cv = CountVector(sample_count_matrix(power_law(50, 2), 80, 5, 9, 0, 1)[0])
        a = cal.empirical_quantile_calibrated_test(cv, pi0, "u_mix", 0.05, 300, seed=4)
        b = cal.empirical_quantile_calibrated_test(cv, pi0, "u_mix", 0.05, 300, seed=4, workers=3)
        assert a == b

    def test_below_null_minimum(self):
        d = 20
        pi0 = uniform(d)
        cv = CountVector([1] * 20)  # no collisions
        res = cal.empirical_quantile_calibrated_test(cv, pi0, "collision", 0.05, 200, seed=1)
        assert res.statistic == 0.0
        res = cal.empirical_quantile_calibrated_test(cv, pi0, "u_identity", 0.05, 200, seed=1)
        # one observation per bin is the smallest U_I any sample can have
        assert res.p_value == 1.0
        assert res.reject is False

    def test_too_few_replicates(self):
        with pytest.raises(InsufficientReplicatesError):
            cal.empirical_quantile_calibrated_test(CountVector([1, 2]), uniform(2), "u_mix", 0.05, 99)

    def test_size_over_outer_replicates(self):
        d, n, outer, reps, alpha = 40, 60, 300, 100, 0.05
        pi0 = power_law(d, 1)
        data = sample_count_matrix(pi0, n, 77, 1, 0, outer)
        rejects = [cal.empirical_quantile_calibrated_test(CountVector(c), pi0, "u_mix", alpha, reps,
                                                          seed=1000 + i).reject
                   for i, c in enumerate(data)]
        rate = float(np.mean(rejects))
        assert abs(rate - alpha) <= 3 * math.sqrt(alpha * (1 - alpha) / outer)


class TestTestResult:
    def test_reject_must_match(self):
        with pytest.raises(ValueError):
            cal.TestResult(statistic=1.0, calibration="gaussian", critical_value=2.0, p_value=0.5,
                           reject=True, alpha=0.05, n=3, d=2)

    def test_strict_inequality(self):
        r = cal.TestResult(statistic=2.0, calibration="gaussian", critical_value=2.0, p_value=0.05,
                           reject=False, alpha=0.05, n=3, d=2)
        assert not r.reject

    def test_unknown_calibration(self):
        with pytest.raises(ValueError):
            cal.TestResult(statistic=1.0, calibration="bogus", critical_value=2.0, p_value=None,
                           reject=False, alpha=0.05, n=3, d=2)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_gaussian_reject_iff_small_p(self, seed):
        pi0 = power_law(30, 1)
        cv = CountVector(sample_count_matrix(power_law(30, 1.5), 60, seed, 0, 0, 1)[0])
        res = cal.gaussian_test(cv, pi0, mixture_weight(pi0))
        assert res.reject == (res.p_value < res.alpha) or math.isclose(res.p_value, res.alpha)

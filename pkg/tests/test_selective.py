import math

import numpy as np
import pytest
from scipy.stats import truncnorm as scipy_truncnorm

from relfit.selective import (
    DegenerateTruncationError,
    TruncatedNormal,
    TruncationInterval,
    contrast,
    polyhedral_truncation,
    selection_event,
    selective_pvalue,
    selective_threshold,
    truncnorm_cdf,
    truncnorm_quantile,
)

INF = math.inf


class TestTruncnormCdf:
    def test_untruncated_median(self):
        tn = TruncatedNormal(0.0, 1.0)
        assert truncnorm_cdf(tn, 0.0) == pytest.approx(0.5, abs=1e-15)

    def test_lower_endpoint(self):
        tn = TruncatedNormal(0.0, 1.0, lower=0.0)
        assert truncnorm_cdf(tn, 0.0) == 0.0

    def test_half_normal_quantile_value(self):
        # (0.975 - 0.5) / 0.5 = 0.95 at the standard normal 97.5% point
        tn = TruncatedNormal(0.0, 1.0, lower=0.0)
        x975 = 1.959963984540054
        assert truncnorm_cdf(tn, x975) == pytest.approx(0.95, abs=1e-9)

    def test_clamps_outside_interval(self):
        tn = TruncatedNormal(0.0, 1.0, lower=-1.0, upper=1.0)
        assert truncnorm_cdf(tn, -5.0) == 0.0
        assert truncnorm_cdf(tn, 5.0) == 1.0

    def test_matches_scipy_on_moderate_intervals(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            mu = rng.normal()
            sigma = rng.uniform(0.5, 3.0)
            a, b = np.sort(rng.uniform(-4, 4, size=2))
            if b - a < 0.1:
                b = a + 0.1
            tn = TruncatedNormal(mu, sigma, lower=mu + a * sigma, upper=mu + b * sigma)
            x = mu + rng.uniform(a, b) * sigma
            want = scipy_truncnorm.cdf(x, a, b, loc=mu, scale=sigma)
            assert truncnorm_cdf(tn, x) == pytest.approx(want, abs=1e-10)

    def test_monotone_in_x(self):
        tn = TruncatedNormal(1.0, 2.0, lower=0.0, upper=5.0)
        xs = np.linspace(0.0, 5.0, 50)
        vals = [truncnorm_cdf(tn, x) for x in xs]
        assert all(v2 >= v1 for v1, v2 in zip(vals, vals[1:]))

    def test_degenerate_interval_raises(self):
        # far enough out that even the log of the tail mass overflows
        tn = TruncatedNormal(0.0, 1.0, lower=1e200, upper=2e200)
        with pytest.raises(DegenerateTruncationError):
            truncnorm_cdf(tn, 1.5e200)
        with pytest.raises(DegenerateTruncationError):
            truncnorm_quantile(tn, 0.5)


class TestTruncnormQuantile:
    def test_one_sided_case1_closed_form(self):
        # interval (0, inf): (1 - alpha)-quantile is sigma * Phi^{-1}(1 - alpha/2)
        for sigma in (0.5, 1.0, 3.0):
            for alpha in (0.01, 0.05, 0.2):
                tn = TruncatedNormal(0.0, sigma, lower=0.0)
                want = sigma * scipy_truncnorm.ppf(1 - alpha, 0, INF)
                got = truncnorm_quantile(tn, 1 - alpha)
                assert got == pytest.approx(want, abs=1e-10 * sigma)

    def test_case1_paper_value(self):
        tn = TruncatedNormal(0.0, 1.0, lower=0.0)
        # sigma * Phi^{-1}(1 - alpha/2) at alpha = 0.05
        assert truncnorm_quantile(tn, 0.95) == pytest.approx(1.959963984540054, abs=1e-10)

    def test_case2_paper_value(self):
        # interval (-inf, 0): sigma * Phi^{-1}(1/2 - alpha/2), a negative number
        tn = TruncatedNormal(0.0, 1.0, upper=0.0)
        got = truncnorm_quantile(tn, 0.95)
        assert got == pytest.approx(-0.06270677794321385, abs=1e-10)
        assert got < 0.0

    def test_untruncated_matches_normal_quantile(self):
        tn = TruncatedNormal(0.0, 1.0)
        assert truncnorm_quantile(tn, 0.975) == pytest.approx(1.959964, abs=1e-6)

    def test_matches_scipy_ppf(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            mu = rng.normal()
            sigma = rng.uniform(0.5, 2.0)
            a, b = np.sort(rng.uniform(-3, 3, size=2))
            if b - a < 0.2:
                b = a + 0.2
            q = rng.uniform(0.01, 0.99)
            tn = TruncatedNormal(mu, sigma, lower=mu + a * sigma, upper=mu + b * sigma)
            want = scipy_truncnorm.ppf(q, a, b, loc=mu, scale=sigma)
            assert truncnorm_quantile(tn, q) == pytest.approx(want, abs=1e-8)

    def test_monotone_in_q(self):
        tn = TruncatedNormal(0.0, 1.0, lower=-2.0, upper=0.5)
        qs = np.linspace(0.01, 0.99, 40)
        vals = [truncnorm_quantile(tn, q) for q in qs]
        assert all(v2 >= v1 for v1, v2 in zip(vals, vals[1:]))

    def test_rejects_out_of_range_q(self):
        tn = TruncatedNormal(0.0, 1.0)
        for q in (0.0, 1.0, -0.2, 1.7):
            with pytest.raises(ValueError):
                truncnorm_quantile(tn, q)

    @pytest.mark.parametrize(
        "lower,upper",
        [
            (-INF, INF),
            (0.0, INF),
            (-INF, 0.0),
            (5.0, INF),
            (10.0, INF),
            (-INF, -10.0),
            (-1.0, 1.0),
            (9.0, 10.0),
            (-10.0, -9.0),
            (-0.1, 0.1),
            (2.0, 2.5),
        ],
    )
    def test_round_trip(self, lower, upper):
        tn = TruncatedNormal(0.0, 1.0, lower=lower, upper=upper)
        for q in (1e-6, 1e-3, 0.1, 0.5, 0.9, 1 - 1e-3, 1 - 1e-6):
            x = truncnorm_quantile(tn, q)
            assert truncnorm_cdf(tn, x) == pytest.approx(q, abs=1e-9)

    def test_round_trip_with_scale_and_shift(self):
        tn = TruncatedNormal(mu=2.0, sigma=3.0, lower=2.0, upper=INF)
        for q in (1e-5, 0.3, 0.95, 1 - 1e-5):
            x = truncnorm_quantile(tn, q)
            assert truncnorm_cdf(tn, x) == pytest.approx(q, abs=1e-9)


class TestSelectionGeometry:
    def test_selection_event_rows(self):
        ev = selection_event(1, 3)
        assert ev.selected == 1
        np.testing.assert_array_equal(ev.b, 0.0)
        np.testing.assert_array_equal(ev.A, [[-1.0, 1.0, 0.0], [0.0, 1.0, -1.0]])

    def test_contrast_layout(self):
        c = contrast(2, 0, 4)
        np.testing.assert_array_equal(c.eta, [-1.0, 0.0, 1.0, 0.0])
        with pytest.raises(ValueError):
            contrast(1, 1, 3)

    def test_two_model_case1(self):
        # fixed contrast (z_2 - z_1) with model 1 selected: interval (0, inf)
        z = np.array([0.2, 0.9])
        sigma = np.array([[1.0, 0.3], [0.3, 2.0]])
        ev = selection_event(0, 2)
        eta = contrast(1, 0, 2).eta  # [-1, +1]
        interval = polyhedral_truncation(ev.A, ev.b, z, sigma, eta)
        assert interval.lower == pytest.approx(0.0, abs=1e-12)
        assert interval.upper == INF

    def test_two_model_case2(self):
        # same fixed contrast with model 2 selected: the statistic is
        # conditioned negative and the interval flips to (-inf, 0)
        z = np.array([1.4, 0.1])
        sigma = np.array([[0.8, -0.1], [-0.1, 1.1]])
        ev = selection_event(1, 2)
        eta = contrast(1, 0, 2).eta  # [-1, +1], held fixed across selections
        interval = polyhedral_truncation(ev.A, ev.b, z, sigma, eta)
        assert interval.lower == -INF
        assert interval.upper == pytest.approx(0.0, abs=1e-12)

    def test_brackets_observed_statistic(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            l = rng.integers(2, 6)
            z = rng.normal(size=l)
            A_raw = rng.normal(size=(l, l))
            sigma = A_raw @ A_raw.T + 0.1 * np.eye(l)
            j = int(np.argmin(z))
            ev = selection_event(j, l)
            for i in range(l):
                if i == j:
                    continue
                eta = contrast(i, j, l).eta
                interval = polyhedral_truncation(ev.A, ev.b, z, sigma, eta)
                stat = float(eta @ z)
                assert interval.lower <= stat <= interval.upper

    def test_grid_search_oracle_l3(self):
        # perturb z along the Sigma eta direction; membership in the selection
        # polyhedron must match the computed interval
        rng = np.random.default_rng(3)
        for trial in range(20):
            z = rng.normal(size=3)
            A_raw = rng.normal(size=(3, 3))
            sigma = A_raw @ A_raw.T + 0.2 * np.eye(3)
            j = int(np.argmin(z))
            ev = selection_event(j, 3)
            i = (j + 1) % 3
            eta = contrast(i, j, 3).eta
            interval = polyhedral_truncation(ev.A, ev.b, z, sigma, eta)
            stat = float(eta @ z)
            direction = sigma @ eta / float(eta @ sigma @ eta)
            for t in np.linspace(stat - 6.0, stat + 6.0, 400):
                z_t = z + (t - stat) * direction
                inside = np.all(ev.A @ z_t <= ev.b + 1e-9)
                in_interval = interval.lower - 1e-6 <= t <= interval.upper + 1e-6
                assert inside == in_interval, f"trial {trial}, t={t}"

    def test_scale_equivariance(self):
        rng = np.random.default_rng(4)
        z = rng.normal(size=4)
        A_raw = rng.normal(size=(4, 4))
        sigma = A_raw @ A_raw.T + 0.3 * np.eye(4)
        j = int(np.argmin(z))
        ev = selection_event(j, 4)
        eta = contrast((j + 1) % 4, j, 4).eta
        base = polyhedral_truncation(ev.A, ev.b, z, sigma, eta)
        alpha = 0.05
        sigma_eta = math.sqrt(float(eta @ sigma @ eta))
        t_base = selective_threshold(sigma_eta, base, alpha)
        for c in (0.1, 2.0, 37.5):
            scaled = polyhedral_truncation(ev.A, ev.b, c * z, c**2 * sigma, eta)
            assert scaled.lower == pytest.approx(c * base.lower, rel=1e-9)
            assert scaled.upper == pytest.approx(c * base.upper, rel=1e-9) or (
                math.isinf(base.upper) and math.isinf(scaled.upper)
            )
            t_scaled = selective_threshold(c * sigma_eta, scaled, alpha)
            assert t_scaled == pytest.approx(c * t_base, rel=1e-8)
            # decision invariance
            stat = float(eta @ z)
            assert (c * stat > t_scaled) == (stat > t_base)

    def test_rejects_violated_constraints(self):
        z = np.array([1.0, 0.0])
        sigma = np.eye(2)
        ev = selection_event(0, 2)  # claims model 0 is the arg-min, but z says otherwise
        with pytest.raises(ValueError, match="violated"):
            polyhedral_truncation(ev.A, ev.b, z, sigma, contrast(1, 0, 2).eta)

    def test_rejects_degenerate_variance(self):
        z = np.array([0.0, 1.0])
        sigma = np.zeros((2, 2))
        ev = selection_event(0, 2)
        with pytest.raises(ValueError, match="positive"):
            polyhedral_truncation(ev.A, ev.b, z, sigma, contrast(1, 0, 2).eta)


class TestThresholdAndPvalue:
    def test_case1_threshold(self):
        interval = TruncationInterval(0.0, INF)
        assert selective_threshold(1.0, interval, 0.05) == pytest.approx(
            1.959963984540054, abs=1e-10
        )

    def test_case2_threshold(self):
        interval = TruncationInterval(-INF, 0.0)
        assert selective_threshold(1.0, interval, 0.05) == pytest.approx(
            -0.06270677794321385, abs=1e-10
        )

    def test_untruncated_threshold(self):
        interval = TruncationInterval(-INF, INF)
        # 2 * Phi^{-1}(0.95)
        assert selective_threshold(2.0, interval, 0.05) == pytest.approx(
            3.2897072539029457, abs=1e-9
        )

    def test_monotone_decreasing_in_alpha(self):
        interval = TruncationInterval(0.0, INF)
        alphas = np.linspace(0.01, 0.5, 25)
        ts = [selective_threshold(1.3, interval, a) for a in alphas]
        assert all(t2 < t1 for t1, t2 in zip(ts, ts[1:]))

    def test_pvalue_at_threshold_equals_alpha(self):
        for interval in (
            TruncationInterval(0.0, INF),
            TruncationInterval(-INF, 0.0),
            TruncationInterval(-1.0, 2.0),
        ):
            for alpha in (0.01, 0.05, 0.3):
                t = selective_threshold(1.7, interval, alpha)
                assert selective_pvalue(t, 1.7, interval) == pytest.approx(alpha, abs=1e-9)

    def test_pvalue_at_lower_endpoint_is_one(self):
        interval = TruncationInterval(-0.5, INF)
        assert selective_pvalue(-0.5, 1.0, interval) == 1.0

    def test_reject_iff_pvalue_below_alpha(self):
        rng = np.random.default_rng(5)
        interval = TruncationInterval(0.0, INF)
        for _ in range(200):
            stat = rng.uniform(0.0, 4.0)
            sigma = rng.uniform(0.5, 2.0)
            alpha = rng.uniform(0.01, 0.3)
            t = selective_threshold(sigma, interval, alpha)
            p = selective_pvalue(stat, sigma, interval)
            if abs(stat - t) > 1e-9:  # away from the boundary the two rules agree
                assert (stat > t) == (p < alpha)


class TestValidation:
    def test_truncated_normal_rejects_bad_sigma(self):
        with pytest.raises(ValueError):
            TruncatedNormal(0.0, 0.0)

    def test_truncated_normal_rejects_empty_interval(self):
        with pytest.raises(ValueError):
            TruncatedNormal(0.0, 1.0, lower=1.0, upper=0.0)

    def test_threshold_rejects_bad_alpha(self):
        with pytest.raises(ValueError):
            selective_threshold(1.0, TruncationInterval(0.0, INF), 1.5)

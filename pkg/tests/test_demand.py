import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import (bisect_normal_quantile, quad_conditional_mean,
                     quad_conditional_variance)
from penflow import (DemandPath, MeanFunction, OUParams, Sinusoid, ValidationError,
                     conditional_mean, conditional_mean_quadrature,
                     conditional_variance, confidence_band, law, path_generator,
                     sample_transition, simulate_ensemble, simulate_path)
from penflow.gaussian import inv_cdf

# Frozen oracle values (scipy quadrature of the conditional-moment integrals).
MEAN_MU2_S025 = 1.5276334472589852        # kappa=3, mu==2, y=1, s=0.25
MEAN_CASE_S025 = 2.6355841995385094       # case-study parameters, s=0.25
VAR_CASE_S025 = 0.5179132265677134        # kappa=3, sigma=2, s=0.25


@pytest.fixture
def flat_ou():
    return OUParams(kappa=3.0, sigma=2.0, y0=1.0, mu=MeanFunction(offset=2.0))


class TestMeanFunction:
    def test_case_instance_is_exact(self, case_mu):
        for t in np.linspace(0.0, 1.0, 17):
            assert case_mu(t) == 2.0 + 3.0 * math.sin(2.0 * math.pi * t)

    def test_tabulated_interpolates_linearly(self):
        mu = MeanFunction(knots=((0.0, 1.0), (1.0, 3.0)))
        assert mu(0.5) == pytest.approx(2.0)
        assert mu.domain == (0.0, 1.0)

    def test_tabulated_rejects_unsorted_knots(self):
        with pytest.raises(ValidationError):
            MeanFunction(knots=((0.0, 1.0), (0.0, 2.0)))

    def test_tabulated_excludes_analytic_form(self):
        with pytest.raises(ValidationError):
            MeanFunction(offset=1.0, knots=((0.0, 1.0), (1.0, 2.0)))

    def test_evaluation_outside_domain_rejected(self):
        mu = MeanFunction(knots=((0.0, 1.0), (1.0, 2.0)))
        with pytest.raises(ValidationError):
            mu(2.0)


class TestOUParams:
    def test_rejects_nonpositive_kappa(self):
        with pytest.raises(ValidationError, match="kappa > 0"):
            OUParams(kappa=-1.0, sigma=1.0, y0=0.0, mu=MeanFunction())

    def test_rejects_nonpositive_sigma(self):
        with pytest.raises(ValidationError, match="sigma > 0"):
            OUParams(kappa=1.0, sigma=0.0, y0=0.0, mu=MeanFunction())


class TestConditionalMean:
    def test_zero_elapsed_returns_conditioning_value(self, flat_ou):
        assert conditional_mean(flat_ou, 0.0, 1.0, 0.0) == 1.0

    def test_flat_mean_level(self, flat_ou):
        got = conditional_mean(flat_ou, 0.0, 1.0, 0.25)
        assert got == pytest.approx(MEAN_MU2_S025, rel=1e-12)

    def test_case_study_value(self, case_ou):
        got = conditional_mean(case_ou, 0.0, 1.0, 0.25)
        assert got == pytest.approx(MEAN_CASE_S025, rel=1e-10)

    def test_rejects_reversed_window(self, flat_ou):
        with pytest.raises(ValidationError):
            conditional_mean(flat_ou, 0.5, 1.0, 0.25)

    def test_rejects_negative_conditioning_time(self, flat_ou):
        with pytest.raises(ValidationError):
            conditional_mean(flat_ou, -0.1, 1.0, 0.25)

    def test_closed_form_matches_package_quadrature(self, case_ou):
        # 100-point grid over [0, 1] at the case-study parameters.
        for s in np.linspace(0.0, 1.0, 100):
            closed = conditional_mean(case_ou, 0.0, 1.0, float(s))
            viaquad = conditional_mean_quadrature(case_ou, 0.0, 1.0, float(s))
            assert closed == pytest.approx(viaquad, rel=1e-8)

    def test_closed_form_matches_scipy_oracle(self, case_ou):
        for t0, s in ((0.0, 0.3), (0.2, 0.9), (0.5, 0.5)):
            got = conditional_mean(case_ou, t0, -0.7, s)
            want = quad_conditional_mean(case_ou.kappa, case_ou.mu, t0, -0.7, s)
            assert got == pytest.approx(want, rel=1e-10, abs=1e-12)

    def test_tabulated_mean_matches_scipy_oracle(self):
        mu = MeanFunction(knots=((0.0, 1.0), (0.3, 4.0), (0.7, 0.5), (1.0, 2.0)))
        p = OUParams(kappa=2.0, sigma=1.0, y0=0.0, mu=mu)
        got = conditional_mean(p, 0.1, 1.5, 0.9)
        want = quad_conditional_mean(p.kappa, mu, 0.1, 1.5, 0.9)
        assert got == pytest.approx(want, rel=1e-8)

    def test_tabulated_window_outside_domain_rejected(self):
        mu = MeanFunction(knots=((0.0, 1.0), (1.0, 2.0)))
        p = OUParams(kappa=2.0, sigma=1.0, y0=0.0, mu=mu)
        with pytest.raises(ValidationError):
            conditional_mean(p, 0.5, 1.0, 1.5)

    def test_mean_reversion_toward_flat_level(self, flat_ou):
        # |m(s) - c| is nonincreasing in s for mu == c.
        gaps = [abs(conditional_mean(flat_ou, 0.0, -3.0, s) - 2.0)
                for s in np.linspace(0.0, 2.0, 40)]
        assert all(b <= a + 1e-12 for a, b in zip(gaps, gaps[1:]))


class TestConditionalVariance:
    def test_zero_elapsed(self, flat_ou):
        assert conditional_variance(flat_ou, 0.7, 0.7) == 0.0

    def test_case_value(self, case_ou):
        assert conditional_variance(case_ou, 0.0, 0.25) == pytest.approx(
            VAR_CASE_S025, rel=1e-12)

    def test_stationary_limit(self, case_ou):
        want = case_ou.sigma ** 2 / (2.0 * case_ou.kappa)
        assert conditional_variance(case_ou, 0.0, 20.0) == pytest.approx(want, rel=1e-9)

    def test_matches_scipy_oracle(self):
        for kappa in (0.5, 3.0, 10.0):
            for sigma in (0.5, 2.0):
                p = OUParams(kappa=kappa, sigma=sigma, y0=0.0, mu=MeanFunction())
                for t0, s in ((0.0, 0.25), (0.1, 1.3), (2.0, 2.0)):
                    got = conditional_variance(p, t0, s)
                    want = quad_conditional_variance(kappa, sigma, t0, s)
                    assert got == pytest.approx(want, rel=1e-8, abs=1e-14)

    def test_rejects_reversed_window(self, flat_ou):
        with pytest.raises(ValidationError):
            conditional_variance(flat_ou, 1.0, 0.5)


class TestLaw:
    def test_zero_elapsed_is_degenerate(self, case_ou):
        l = law(case_ou, 0.4, 2.5, 0.4)
        assert l.mean == 2.5 and l.variance == 0.0

    def test_case_values(self, case_ou):
        l = law(case_ou, 0.0, 1.0, 0.25)
        assert l.mean == pytest.approx(MEAN_CASE_S025, rel=1e-10)
        assert l.variance == pytest.approx(VAR_CASE_S025, rel=1e-12)

    def test_constant_level_started_at_level_stays_centered(self):
        p = OUParams(kappa=2.0, sigma=1.0, y0=1.7, mu=MeanFunction(offset=1.7))
        for s in (0.0, 0.3, 1.0, 5.0):
            assert law(p, 0.0, 1.7, s).mean == pytest.approx(1.7, abs=1e-12)


class TestSampling:
    def test_vanishing_volatility_is_deterministic(self, case_mu):
        p = OUParams(kappa=3.0, sigma=1e-300, y0=1.0, mu=case_mu)
        rng = path_generator(1, 0)
        got = sample_transition(p, 0.0, 1.0, 0.25, rng)
        assert got == conditional_mean(p, 0.0, 1.0, 0.25)

    def test_rejects_nonpositive_step(self, case_ou):
        with pytest.raises(ValidationError):
            sample_transition(case_ou, 0.0, 1.0, 0.0, path_generator(1))

    def test_transition_moments(self, case_ou):
        n = 100_000
        rng = path_generator(777, 0)
        draws = np.fromiter(
            (sample_transition(case_ou, 0.0, 1.0, 0.25, rng) for _ in range(n)),
            dtype=float, count=n)
        l = law(case_ou, 0.0, 1.0, 0.25)
        sd = math.sqrt(l.variance)
        assert abs(draws.mean() - l.mean) <= 4.0 * sd / math.sqrt(n)
        var_se = l.variance * math.sqrt(2.0 / (n - 1))
        assert abs(draws.var(ddof=1) - l.variance) <= 4.0 * var_se

    def test_single_point_grid(self, case_ou):
        path = simulate_path(case_ou, [0.0], 1.0, 5)
        assert path.values.tolist() == [1.0]

    def test_same_seed_is_bit_identical(self, case_ou, case_grid):
        a = simulate_path(case_ou, case_grid.times(), 1.0, 99, stream=3)
        b = simulate_path(case_ou, case_grid.times(), 1.0, 99, stream=3)
        assert np.array_equal(a.values, b.values)

    def test_streams_differ(self, case_ou, case_grid):
        a = simulate_path(case_ou, case_grid.times(), 1.0, 99, stream=0)
        b = simulate_path(case_ou, case_grid.times(), 1.0, 99, stream=1)
        assert not np.array_equal(a.values, b.values)

    def test_ensemble_rows_match_single_paths(self, case_ou, case_grid):
        ens = simulate_ensemble(case_ou, case_grid.times(), 1.0, 42, 5, first_stream=2)
        for i in range(5):
            single = simulate_path(case_ou, case_grid.times(), 1.0, 42, stream=2 + i)
            assert np.array_equal(ens[i], single.values)

    def test_ensemble_moments_match_law(self, case_ou, case_grid):
        n = 100_000
        ens = simulate_ensemble(case_ou, case_grid.times(), 1.0, 2024, n)
        times = case_grid.times()
        for k in (10, 25, 40):
            l = law(case_ou, 0.0, 1.0, float(times[k]))
            sd = math.sqrt(l.variance)
            assert abs(ens[:, k].mean() - l.mean) <= 4.0 * sd / math.sqrt(n)
            var_se = l.variance * math.sqrt(2.0 / (n - 1))
            assert abs(ens[:, k].var(ddof=1) - l.variance) <= 4.0 * var_se

    def test_markov_consistency_through_intermediate_time(self, case_ou):
        # Chaining transitions through u reproduces the one-shot law at s.
        n = 100_000
        ens = simulate_ensemble(case_ou, [0.0, 0.1, 0.25], 1.0, 31337, n)
        final = ens[:, -1]
        l = law(case_ou, 0.0, 1.0, 0.25)
        sd = math.sqrt(l.variance)
        assert abs(final.mean() - l.mean) <= 4.0 * sd / math.sqrt(n)
        var_se = l.variance * math.sqrt(2.0 / (n - 1))
        assert abs(final.var(ddof=1) - l.variance) <= 4.0 * var_se

    def test_rejects_nonmonotone_grid(self, case_ou):
        with pytest.raises(ValidationError):
            simulate_path(case_ou, [0.0, 0.2, 0.1], 1.0, 1)


class TestDemandPath:
    def test_value_at_grid_time(self, case_ou, case_grid):
        path = simulate_path(case_ou, case_grid.times(), 1.0, 7)
        assert path.value_at(0.0) == 1.0
        assert path.value_at(0.15) == path.values[6]

    def test_value_at_off_grid_rejected(self, case_ou, case_grid):
        path = simulate_path(case_ou, case_grid.times(), 1.0, 7)
        with pytest.raises(ValidationError):
            path.value_at(0.1501)

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ValidationError):
            DemandPath(np.array([0.0, 1.0]), np.array([1.0]), (0, 0))


class TestConfidenceBand:
    def test_collapses_at_zero_elapsed(self, case_ou):
        lo, hi = confidence_band(case_ou, 0.3, 2.2, 0.3, 0.9)
        assert lo == 2.2 and hi == 2.2

    def test_two_sigma_level_at_unit_variance(self):
        # Stationary variance sigma^2/(2 kappa) = 1; elapsed time long enough
        # that the transient is below the rounding requested here.
        p = OUParams(kappa=0.5, sigma=1.0, y0=0.0, mu=MeanFunction(offset=0.0))
        lo, hi = confidence_band(p, 0.0, 0.0, 50.0, 0.9545)
        m = law(p, 0.0, 0.0, 50.0).mean
        assert hi - m == pytest.approx(2.0, abs=5e-4)
        assert m - lo == pytest.approx(2.0, abs=5e-4)

    def test_width_nondecreasing_in_time(self, case_ou):
        widths = [np.diff(confidence_band(case_ou, 0.0, 1.0, s, 0.9))[0]
                  for s in np.linspace(0.0, 1.0, 25)]
        assert all(b >= a - 1e-12 for a, b in zip(widths, widths[1:]))

    def test_rejects_bad_level(self, case_ou):
        with pytest.raises(ValidationError):
            confidence_band(case_ou, 0.0, 1.0, 0.5, 1.0)


class TestNormalQuantile:
    @pytest.mark.parametrize("p", [1e-10, 1e-6, 0.01, 0.2, 0.5, 0.77, 0.97725,
                                   1 - 1e-6, 1 - 1e-10])
    def test_against_bisection_oracle(self, p):
        assert abs(inv_cdf(p) - bisect_normal_quantile(p)) <= 1e-10

    def test_rejects_boundary(self):
        with pytest.raises(ValueError):
            inv_cdf(0.0)


@settings(max_examples=30, deadline=None)
@given(kappa=st.floats(0.2, 10.0), sigma=st.floats(0.1, 3.0),
       tau=st.floats(0.0, 3.0))
def test_variance_matches_quadrature_property(kappa, sigma, tau):
    p = OUParams(kappa=kappa, sigma=sigma, y0=0.0, mu=MeanFunction())
    got = conditional_variance(p, 0.0, tau)
    want = quad_conditional_variance(kappa, sigma, 0.0, tau)
    assert got == pytest.approx(want, rel=1e-8, abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(kappa=st.floats(0.2, 10.0), sigma=st.floats(0.1, 3.0),
       tau=st.floats(0.0, 3.0))
def test_variance_monotone_in_elapsed_time(kappa, sigma, tau):
    p = OUParams(kappa=kappa, sigma=sigma, y0=0.0, mu=MeanFunction())
    assert conditional_variance(p, 0.0, tau) <= \
        conditional_variance(p, 0.0, tau + 0.5) + 1e-15

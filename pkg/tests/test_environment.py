import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from zrpsim.environment import EnvDistribution, JumpKernel, RateOracle, \
    partition_sites, sample_environment, slow_mask, truncate_rates
from zrpsim.errors import ConfigError, DomainError


class TestJumpKernel:
    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(ConfigError):
            JumpKernel.from_entries([((1,), 0.5), ((-1,), 0.4)], 1)

    def test_range_is_sup_norm_radius(self):
        k = JumpKernel.from_entries([((2,), 0.5), ((-1,), 0.5)], 1)
        assert k.range == 2

    def test_lattice_span_rejects_even_steps(self):
        with pytest.raises(ConfigError):
            JumpKernel.from_entries([((2,), 0.5), ((-2,), 0.5)], 1)

    def test_lattice_span_rejects_single_axis_in_2d(self):
        with pytest.raises(ConfigError):
            JumpKernel.from_entries([((1, 0), 0.5), ((-1, 0), 0.5)], 2)

    def test_asymmetric_and_2d_kernels_accepted(self):
        JumpKernel.from_entries([((1,), 1.0)], 1)
        JumpKernel.nearest_neighbor(2)
        JumpKernel.from_entries([((2, 1), 0.5), ((1, 1), 0.5)], 2)

    def test_cdf_ends_at_one(self):
        k = JumpKernel.nearest_neighbor(1, asymmetry=0.3)
        assert k.cdf()[-1] == 1.0


class TestEnvDistribution:
    def test_parameter_validation(self):
        with pytest.raises(ConfigError):
            EnvDistribution(c=0.0, beta=1.0)
        with pytest.raises(ConfigError):
            EnvDistribution(c=0.3, beta=0.0)

    def test_slow_fraction_saturates(self, dist):
        assert dist.slow_fraction(1.0 - dist.c) == 1.0
        assert dist.slow_fraction(2.0) == 1.0

    def test_slow_fraction_vanishes_monotonically(self, dist):
        alphas = [0.4, 0.2, 0.1, 0.05, 0.01, 0.001]
        vals = [dist.slow_fraction(a) for a in alphas]
        assert all(b < a for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1e-6

    def test_slow_fraction_rejects_nonpositive(self, dist):
        with pytest.raises(DomainError):
            dist.slow_fraction(0.0)

    def test_slow_fraction_matches_monte_carlo(self, dist):
        # beta=3, c=0.2, alpha=0.1 against 1e6 hashed draws
        field = sample_environment(dist, 10**6, seed=321)
        frac = float(np.mean(field.rates <= 0.3))
        theta = dist.slow_fraction(0.1)
        se = np.sqrt(theta * (1 - theta) / 10**6)
        assert abs(frac - theta) <= 3 * se

    def test_mass_near_infimum(self, dist):
        for eps in [0.1, 0.01, 0.001]:
            assert dist.cdf(dist.c + eps) > 0


class TestSampleEnvironment:
    def test_support(self, dist):
        field = sample_environment(dist, 512, seed=0)
        assert np.all(field.rates > dist.c)
        assert np.all(field.rates <= 1.0)

    def test_deterministic(self, dist):
        a = sample_environment(dist, (8, 8), seed=42)
        b = sample_environment(dist, (8, 8), seed=42)
        assert np.array_equal(a.rates, b.rates)
        c = sample_environment(dist, (8, 8), seed=43)
        assert not np.array_equal(a.rates, c.rates)

    def test_kolmogorov_smirnov_against_analytic_cdf(self, dist):
        field = sample_environment(dist, 10**6, seed=77)
        res = stats.kstest(field.rates, dist.cdf)
        assert res.pvalue > 0.01

    def test_invalid_dims(self, dist):
        with pytest.raises(ConfigError):
            sample_environment(dist, 0, seed=1)

    def test_lazy_oracle_matches_field(self, dist):
        field = sample_environment(dist, (6, 5), seed=9)
        oracle = field.oracle()
        coords = field.coords()
        for i in [0, 7, 13, 29]:
            assert oracle.rate_at(coords[i]) == field.rates[i]

    def test_oracle_off_torus_queries(self, dist):
        oracle = RateOracle(dist, seed=5)
        r = oracle.rate_at((-1000000, 4))
        assert dist.c < r <= 1.0
        assert oracle.rate_at((-1000000, 4)) == r


class TestTruncation:
    def test_low_rate_lifted_to_cutoff(self):
        # c=0.2, alpha=0.05: a rate of 0.21 becomes exactly 0.25
        dist = EnvDistribution(c=0.2, beta=3.0)
        field = sample_environment(dist, 64, seed=3)
        field.rates[5] = 0.21
        out = truncate_rates(field, 0.05)
        assert out.rates[5] == 0.25

    def test_high_rate_unchanged(self, dist):
        field = sample_environment(dist, 64, seed=3)
        field.rates[7] = 0.9
        out = truncate_rates(field, 0.05)
        assert out.rates[7] == 0.9

    def test_identity_below_minimum_gap(self, dist):
        field = sample_environment(dist, 64, seed=3)
        alpha = 0.5 * (field.rates.min() - dist.c)
        out = truncate_rates(field, alpha)
        assert np.array_equal(out.rates, field.rates)

    def test_rejects_nonpositive_alpha(self, small_field):
        with pytest.raises(DomainError):
            truncate_rates(small_field, 0.0)

    @settings(max_examples=25, deadline=None)
    @given(alpha=st.floats(0.001, 1.0), seed=st.integers(0, 10**6))
    def test_idempotent_and_dominating(self, alpha, seed):
        dist = EnvDistribution(c=0.3, beta=2.0)
        field = sample_environment(dist, 32, seed=seed)
        once = truncate_rates(field, alpha)
        twice = truncate_rates(once, alpha)
        assert np.array_equal(once.rates, twice.rates)
        assert np.all(once.rates >= field.rates)
        fast, _ = partition_sites(field, alpha)
        assert np.array_equal(once.rates[fast], field.rates[fast])


class TestPartition:
    def test_all_fast_when_alpha_below_gap(self, small_field):
        alpha = 0.5 * (small_field.rates.min() - small_field.c)
        fast, slow = partition_sites(small_field, alpha)
        assert len(fast) == small_field.n_sites
        assert len(slow) == 0

    def test_all_slow_when_alpha_covers_support(self, small_field):
        fast, slow = partition_sites(small_field, 1.0 - small_field.c)
        assert len(fast) == 0
        assert len(slow) == small_field.n_sites

    def test_disjoint_cover(self, small_field):
        fast, slow = partition_sites(small_field, 0.2)
        both = np.concatenate([fast, slow])
        assert sorted(both.tolist()) == list(range(small_field.n_sites))

    def test_empirical_slow_fraction_matches_theta(self, dist):
        field = sample_environment(dist, 10**5, seed=13)
        alpha = 0.25
        _, slow = partition_sites(field, alpha)
        theta = dist.slow_fraction(alpha)
        se = np.sqrt(theta * (1 - theta) / field.n_sites)
        assert abs(len(slow) / field.n_sites - theta) <= 3 * se

    @settings(max_examples=25, deadline=None)
    @given(a1=st.floats(0.01, 0.7), a2=st.floats(0.01, 0.7))
    def test_fast_set_monotone_in_alpha(self, a1, a2):
        if a1 > a2:
            a1, a2 = a2, a1
        dist = EnvDistribution(c=0.25, beta=1.5)
        field = sample_environment(dist, 64, seed=5)
        fast1, _ = partition_sites(field, a1)
        fast2, _ = partition_sites(field, a2)
        assert set(fast2.tolist()) <= set(fast1.tolist())

    def test_slow_mask_zero_alpha_empty(self, small_field):
        assert not slow_mask(small_field, 0.0).any()

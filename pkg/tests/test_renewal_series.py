import pytest
import math
import numpy as np
import sys
import os

# Add the project root to Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from dri_toolkit.density.catalog import DensitySpec
from dri_toolkit.grid.discretize import discretize
from dri_toolkit.renewal.renewal_series import (density_defect, gamma_constant, heavy_tail_check,
                                                hitting_probability_bound, key_renewal_apply,
                                                laplace_transform, one_over_x_check, renewal_density,
                                                truncated_mean_slope, vanishing_propagation_check)
from dri_toolkit.utils.errors import ConfigError


class TestRenewalSeries:
    """Test the truncated renewal series and its remainder bound"""

    @pytest.fixture
    def exponential(self):
        """Exponential(1)"""
        return DensitySpec.exponential(1.0)

    @pytest.fixture
    def series(self, exponential):
        """u_80 for Exponential(1) on [0, 20]"""
        return renewal_density(exponential, 80, (0.0, 20.0), 1e-3)

    def test_laplace_transform(self, exponential):
        """Test phi(s) = 1 / (1 + s)"""
        assert laplace_transform(exponential, 1.0) == pytest.approx(0.5, abs=1e-8)
        assert laplace_transform(exponential, 3.0) == pytest.approx(0.25, abs=1e-8)

    def test_hitting_probability_bound(self, exponential):
        """Test the Chernoff bound is tiny far beyond the mean and infinite for no terms"""
        assert hitting_probability_bound(exponential, 10.0, 200) < 1e-20
        assert math.isinf(hitting_probability_bound(exponential, 10.0, 0))

    def test_exponential_is_flat(self, series):
        """Test u = 1 away from the origin for Exponential(1)"""
        far = series.grid.x >= 2.0
        assert np.max(np.abs(series.grid.values[far] - 1.0)) <= 1e-2
        assert series.remainder_bound <= 1e-4
        assert series.limit == pytest.approx(1.0)
        assert series.window == pytest.approx((0.0, 20.0))

    def test_uniform_closed_form(self):
        """Test u(x) = exp(x) on (0, 1) for Uniform(0, 1)"""
        series = renewal_density(DensitySpec.uniform(0.0, 1.0), 20, (0.0, 1.0), 1e-3)
        x = series.grid.x
        inner = (x >= 0.05) & (x <= 0.95)
        np.testing.assert_allclose(series.grid.values[inner], np.exp(x[inner]), atol=1e-2)
        assert series.limit == pytest.approx(2.0)

    def test_window_truncated_when_uncertified(self, exponential):
        """Test a short series shrinks the window until the remainder is certified"""
        series = renewal_density(exponential, 3, (0.0, 10.0), 0.01)
        assert series.window[1] < 10.0
        assert series.remainder_bound < 1e-3
        assert series.notes

    def test_window_mass(self, series):
        """Test the renewal measure band counts the atom at zero"""
        lower, upper = series.window_mass(10.0, 1.0)
        assert lower == pytest.approx(1.0, abs=0.02)
        assert upper >= lower
        with_atom, _ = series.window_mass(0.0, 0.5)
        assert with_atom == pytest.approx(1.5, abs=0.02)

    def test_rejects_signed_support(self):
        """Test renewal needs steps on [0, inf)"""
        with pytest.raises(ConfigError):
            renewal_density(DensitySpec.gaussian(), 10, (0.0, 10.0), 0.01)

    def test_rejects_empty_series(self, exponential):
        """Test N must be positive"""
        with pytest.raises(ValueError):
            renewal_density(exponential, 0, (0.0, 10.0), 0.01)

    def test_density_defect(self, series):
        """Test u - f_1 approaches 1/mu on the far window"""
        report = density_defect(series, 2)
        assert report['limit'] == pytest.approx(1.0)
        assert report['sup_deviation'] < 0.02
        assert report['far_window'][1] == pytest.approx(20.0)
        with pytest.raises(ValueError):
            density_defect(series, 20)

    def test_exponential_oracle(self, exponential):
        """Test u_200 for Exponential(1) on [0, 30] stays within 1e-3 of 1 past x = 2"""
        series = renewal_density(exponential, 200, (0.0, 30.0), 1.0 / 512)
        far = series.grid.x >= 2.0
        assert np.max(np.abs(series.grid.values[far] - 1.0)) <= 1e-3
        assert series.remainder_bound <= 1e-4
        assert series.window == pytest.approx((0.0, 30.0))

    def test_uniform_oracle(self):
        """Test u_100 for Uniform(0, 1) matches exp(x) below 1 and settles at 2"""
        series = renewal_density(DensitySpec.uniform(0.0, 1.0), 100, (0.0, 30.0), 1e-3)
        x, u = series.grid.x, series.grid.values
        below = x < 1.0 - 1e-9
        np.testing.assert_allclose(u[below], np.exp(x[below]), atol=1e-3)
        tail = (x >= 20.0) & (x <= 30.0)
        assert np.max(np.abs(u[tail] - 2.0)) <= 0.02

    def test_density_defect_is_signed(self, series):
        """Test the defect grid keeps its sign and reports only roundoff undershoot"""
        report = density_defect(series, 3)
        assert report['grid'].nonnegative is False
        assert 0.0 <= report['undershoot'] <= 1e-9

    def test_key_renewal(self, series):
        """Test (g * U) of a unit block tends to the block mass over mu"""
        g = discretize(DensitySpec.uniform(0.0, 1.0), (0.0, 1.0), 1e-3)
        result = key_renewal_apply(series, g)
        assert result.certified
        assert result.far_value == pytest.approx(1.0, abs=0.05)
        assert result.limit == pytest.approx(1.0, abs=0.01)

    def test_one_over_x(self, series):
        """Test f_2 decays at least like 1/x"""
        report = one_over_x_check(series, 2)
        assert report['is_O_1_over_x']
        with pytest.raises(ValueError):
            one_over_x_check(series, 9)

    def test_vanishing_propagation(self, series):
        """Test the kept powers are uniformly small beyond x_far"""
        assert vanishing_propagation_check(series, 8.0, tol=0.2)['passed']
        assert not vanishing_propagation_check(series, 8.0, tol=1e-3)['passed']


class TestHeavyTail:
    """Test the infinite-mean renewal limits"""

    def test_gamma_constant(self):
        """Test 1 / (Gamma(a) Gamma(2 - a)) at reference points"""
        assert gamma_constant(0.5)['target'] == pytest.approx(2 / math.pi, rel=1e-12)
        assert gamma_constant(1.0)['target'] == pytest.approx(1.0, rel=1e-12)
        report = gamma_constant(0.6)
        assert report['target'] == pytest.approx(report['oracle'], rel=1e-12)

    def test_truncated_mean_slope(self):
        """Test m(x) grows like x^(1 - alpha)"""
        report = truncated_mean_slope(DensitySpec.pareto(0.6, 1.0))
        assert report['expected'] == pytest.approx(0.4)
        assert report['passed']

    def test_infinite_mean_limit(self):
        """Test infinite-mean series have limit zero"""
        series = renewal_density(DensitySpec.pareto(0.5, 1.0), 20, (0.0, 10.5), 0.05)
        assert series.limit == 0.0
        assert math.isinf(series.mu)

    def test_small_alpha_reports_points_only(self):
        """Test alpha <= 1/2 makes no convergence claim"""
        report = heavy_tail_check(DensitySpec.pareto(0.5, 1.0), 20, [10.0], 0.05, k_bar=2)
        assert report['convergence_claim'] is False
        assert report['notes']
        assert report['points'][0]['x'] == 10.0

    def test_rejects_light_tails(self):
        """Test the heavy-tail check needs a pareto density"""
        with pytest.raises(ConfigError):
            heavy_tail_check(DensitySpec.exponential(1.0), 10, [5.0], 0.05, k_bar=2)

    @pytest.mark.slow
    def test_pareto_limit(self):
        """Test m(x) times the renewal density defect approaches its constant"""
        report = heavy_tail_check(DensitySpec.pareto(0.6, 1.0), 300, [1000.0], 0.05, k_bar=8, rtol=0.2)
        assert report['target'] == pytest.approx(0.7568, abs=1e-3)
        assert report['convergence_claim']
        assert report['within_tolerance']


if __name__ == "__main__":
    pytest.main([__file__, "-v"])

import pytest
import math
import numpy as np
import sys
import os

# Add the project root to Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from dri_toolkit.convolution.fourier import (boundedness_index, fourier_norms, fourier_reverse_check,
                                             fourier_transform, lp_power_growth, young_exponent)
from dri_toolkit.convolution.local_clt import local_clt_error, standardize
from dri_toolkit.density.catalog import DensityKind, DensitySpec
from dri_toolkit.grid.discretize import discretize


class TestFourier:
    """Test transform norms, decay fits and the boundedness index"""

    @pytest.fixture
    def gaussian_grid(self):
        """Standard normal on [-20, 20]"""
        return discretize(DensitySpec.gaussian(), (-20.0, 20.0), 0.01)

    def test_transform_at_zero(self, gaussian_grid):
        """Test |f^(0)| is the mass and the transform matches exp(-theta^2 / 2)"""
        theta, modulus = fourier_transform(gaussian_grid)
        assert theta[0] == 0.0
        assert modulus[0] == pytest.approx(1.0, abs=1e-8)
        sel = theta < 5.0
        np.testing.assert_allclose(modulus[sel], np.exp(-theta[sel] ** 2 / 2), atol=1e-6)

    def test_plancherel(self, gaussian_grid):
        """Test the spectral L^2 norm against quadrature of f^2 with the 2 pi convention"""
        report = fourier_norms(gaussian_grid, p_list=(math.inf,), spec=DensitySpec.gaussian())
        planch = report['plancherel']
        assert planch['direct_source'] == 'quadrature'
        assert planch['direct'] == pytest.approx(2 * math.pi / (2 * math.sqrt(math.pi)), rel=1e-8)
        assert planch['relative_error'] < 1e-6
        assert report['norms']['inf'] == pytest.approx(1.0, abs=1e-8)

    def test_plancherel_grid_fallback(self, gaussian_grid):
        """Test the grid L^2 norm stands in for quadrature without a catalog density"""
        planch = fourier_norms(gaussian_grid, p_list=(2,))['plancherel']
        assert planch['direct_source'] == 'grid'
        assert planch['relative_error'] < 1e-6

    def test_plancherel_with_jump(self):
        """Test the exponential transform carries 2 pi int f^2 = pi through its 1/theta tail"""
        spec = DensitySpec.exponential(1.0)
        report = fourier_norms(discretize(spec, (0.0, 64.0), 0.01), p_list=(2,), spec=spec)
        planch = report['plancherel']
        assert planch['direct'] == pytest.approx(math.pi, rel=1e-8)
        assert planch['relative_error'] < 0.05

    def test_plancherel_infinite_l2(self):
        """Test a density outside L^2 reports an infinite direct side and no error"""
        spec = DensitySpec.sqrt_singular()
        planch = fourier_norms(discretize(spec, (0.0, 1.0), 1 / 1024), p_list=(2,), spec=spec)['plancherel']
        assert math.isinf(planch['direct'])
        assert planch['relative_error'] is None
    def test_closed_form_index(self):
        """Test bounded densities have k0 = 1 without refinement"""
        report = boundedness_index(DensitySpec.exponential(1.0), (0.0, 32.0), 0.01)
        assert report['k0'] == 1
        assert report['method'] == 'closed-form sup'

    def test_singular_index(self):
        """Test 1/(2 sqrt x) needs two convolutions to become bounded"""
        report = boundedness_index(DensitySpec.sqrt_singular(), (0.0, 1.0), 1 / 1024)
        assert report['k0'] == 2
        assert report['method'] == 'grid refinement'
        assert report['consistent']
        decay = report['fourier_decay']
        assert decay == pytest.approx(-0.5, abs=0.05)
        # f_2 = pi/4 on (0, 1]
        assert report['sups'][2][-1] == pytest.approx(math.pi / 4, rel=0.05)

    def test_reverse_check(self):
        """Test the exponential transform decays like 1/theta"""
        report = fourier_reverse_check(DensitySpec.exponential(1.0), 1, (0.0, 64.0), 0.01)
        assert report['p'] == 2
        assert report['decay_exponent'] == pytest.approx(-1.0, abs=0.1)
        assert report['in_lp'] is True

    def test_young_exponent(self):
        """Test the Young exponent ladder"""
        assert young_exponent(2.0, 0) == pytest.approx(2.0)
        assert math.isinf(young_exponent(2.0, 1))
        assert young_exponent(4 / 3, 1) == pytest.approx(2.0)
        assert math.isinf(young_exponent(4 / 3, 2))

    def test_lp_power_growth(self):
        """Test the norms stay finite along the ladder"""
        report = lp_power_growth(DensitySpec.exponential(1.0), 2.0, 1, (0.0, 32.0), 0.01)
        assert report['all_finite']
        assert report['levels'][0]['norm'] == pytest.approx(math.sqrt(0.5), abs=0.01)
        assert math.isinf(report['levels'][1]['exponent'])


class TestLocalClt:
    """Test the local central limit check"""

    def test_standardize(self):
        """Test catalog families standardize in closed form"""
        uniform = standardize(DensitySpec.uniform(0.0, 1.0), (-6.0, 6.0), 0.01)
        assert uniform.kind == DensityKind.UNIFORM
        assert uniform.variance == pytest.approx(1.0)
        assert standardize(DensitySpec.gaussian(3.0, 2.0), (-6.0, 6.0), 0.01).params['sd'] == 1.0

    def test_standardize_rejects_heavy_tails(self):
        """Test densities without a variance cannot be standardized"""
        with pytest.raises(ValueError):
            standardize(DensitySpec.pareto(0.6, 1.0), (-6.0, 6.0), 0.01)

    def test_uniform_errors_decrease(self):
        """Test sup errors shrink along n for the standardized uniform"""
        report = local_clt_error(DensitySpec.uniform(0.0, 1.0), (2, 4, 8, 16))
        assert report['strictly_decreasing']
        assert report['errors'][16] < 0.02
        assert set(report['errors']) == {2, 4, 8, 16}

    def test_gaussian_is_a_fixed_point(self):
        """Test Gaussian input matches the normal density to 1e-6 at every n"""
        report = local_clt_error(DensitySpec.gaussian(), (2, 4, 8, 16))
        assert max(report['errors'].values()) <= 1e-6


if __name__ == "__main__":
    pytest.main([__file__, "-v"])

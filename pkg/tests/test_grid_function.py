import pytest
import math
import numpy as np
import sys
import os

# Add the project root to Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from dri_toolkit.density.catalog import DensitySpec
from dri_toolkit.density.tabulated import read_envelope_sidecar, read_tabulated_csv, write_envelope_sidecar
from dri_toolkit.grid.discretize import (discretize, grid_points, grown_window, omitted_mass,
                                         pointwise_envelope, truncated_mass)
from dri_toolkit.grid.grid_function import (EnvelopeKind, GridFunction, TailEnvelope, block_inf,
                                            block_sup, certify_window, lp_norm)
from dri_toolkit.utils.errors import GridOverflowError, MeshTooFineError, UncertifiedTruncationError


class TestDiscretize:
    """Test sampling of catalog densities onto grids"""

    def test_uniform_compact_support(self):
        """Test a window covering the support gets a zero envelope"""
        g = discretize(DensitySpec.uniform(0.0, 1.0), (-1.0, 2.0), 0.01)
        assert g.size == 301
        assert g.mass == pytest.approx(1.0, abs=1e-6)
        assert g.envelope.kind == EnvelopeKind.ZERO
        assert g.envelope.cutoff == pytest.approx(1.0)

    def test_uniform_jumps_take_half_height(self):
        """Test jump points carry the mean of the one-sided limits"""
        g = discretize(DensitySpec.uniform(0.0, 1.0), (-1.0, 2.0), 0.01)
        assert g.values[100] == pytest.approx(0.5)
        assert g.values[200] == pytest.approx(0.5)
        assert g.values[150] == pytest.approx(1.0)

    def test_exponential_envelope(self):
        """Test the exponential tail is carried in closed form"""
        spec = DensitySpec.exponential(1.0)
        g = discretize(spec, (0.0, 40.0), 0.01)
        assert truncated_mass(spec, (0.0, 40.0)) < 1e-17
        assert g.envelope.kind == EnvelopeKind.EXPONENTIAL
        assert g.envelope.constant == pytest.approx(1.0)
        assert g.envelope.support == (0.0, math.inf)

    def test_pareto_envelope(self):
        """Test the pareto power envelope and its certified truncation"""
        spec = DensitySpec.pareto(0.5, 1.0)
        g = discretize(spec, (0.0, 1e4), 0.25)
        assert truncated_mass(spec, (0.0, 1e4)) == pytest.approx(0.01)
        assert g.envelope.kind == EnvelopeKind.POWER
        assert g.envelope.exponent == pytest.approx(1.5)
        assert g.envelope.integrable
        assert g.check_envelope_domination()
        assert lp_norm(g, 1.0) == pytest.approx(1.0, abs=0.05)

    def test_unbounded_density_uses_cell_averages(self):
        """Test the singular point is sampled by its cell average"""
        h = 1e-3
        g = discretize(DensitySpec.sqrt_singular(), (0.0, 1.0), h)
        # the end sample averages over the inner half cell [0, h/2]
        assert g.values[0] == pytest.approx(2 * math.sqrt(h / 2) / h)
        assert np.all(np.isfinite(g.values))

    def test_window_ends_take_inner_limits(self):
        """Test end samples use the one-sided limit from inside the window"""
        g = discretize(DensitySpec.uniform(0.0, 1.0), (0.0, 1.0), 0.01)
        assert g.values[0] == 1.0
        assert g.values[-1] == 1.0
        assert g.mass == pytest.approx(1.0, abs=1e-12)

    def test_omitted_mass(self):
        """Test the union bound k g_1(b / k) on the mass of f_k beyond the window"""
        spec = DensitySpec.exponential(1.0)
        assert omitted_mass(spec, 8, (0.0, 64.0)) == pytest.approx(8 * math.exp(-8.0))
        assert omitted_mass(spec, 1, (0.0, 40.0)) == pytest.approx(math.exp(-40.0))
        assert omitted_mass(DensitySpec.uniform(0.0, 1.0), 2, (0.0, 2.0)) == 0.0

    def test_grown_window(self):
        """Test open windows grow by whole lengths until at most 1e-3 is left outside"""
        spec = DensitySpec.exponential(1.0)
        window = grown_window(spec, 8, (0.0, 64.0), 1 / 16)
        assert window == (0.0, 128.0)
        assert omitted_mass(spec, 8, window) <= 1e-3
        assert grown_window(spec, 2, (0.0, 64.0), 1 / 16) == (0.0, 64.0)
        assert grown_window(DensitySpec.uniform(0.0, 1.0), 4, (0.0, 1.0), 0.01) == (0.0, 1.0)

    def test_grown_window_overflow(self):
        """Test heavy tails that need more than max_points raise"""
        with pytest.raises(GridOverflowError):
            grown_window(DensitySpec.pareto(0.6, 1.0), 2, (0.0, 64.0), 1 / 16)

    @pytest.mark.parametrize("spec", [
        DensitySpec.exponential(2.0),
        DensitySpec.gamma(3.0, 1.0),
        DensitySpec.gamma(0.7, 1.0),
        DensitySpec.pareto(0.6, 1.0),
        DensitySpec.gaussian(1.0, 2.0),
        DensitySpec.log_counterexample(),
    ])
    def test_pointwise_envelope_dominates(self, spec):
        """Test the closed-form pointwise envelope bounds f beyond its cutoff"""
        env = pointwise_envelope(spec)
        x = np.linspace(max(env.cutoff, 1e-3), 60.0, 601)
        x = np.concatenate([x, -x]) if spec.support[0] < 0 else x
        assert np.all(env.value(x) >= np.asarray(spec.eval(x)) * (1 - 1e-12))

    def test_pointwise_envelope_powers(self):
        """Test f_k(x) <= k sup_{|y| >= |x|/k} f(y) against Gamma(k) densities"""
        env = pointwise_envelope(DensitySpec.exponential(1.0))
        for k in (2, 3, 5):
            env_k = env.convolution_power(k)
            assert env_k.constant == pytest.approx(k)
            assert env_k.exponent == pytest.approx(1.0 / k)
            x = np.linspace(0.0, 80.0, 801)
            density = x ** (k - 1) * np.exp(-x) / math.factorial(k - 1)
            assert np.all(env_k.value(x) >= density)

    def test_weighted_envelopes(self):
        """Test weighting by 1 + |x|^eps lowers power exponents by eps"""
        pareto = pointwise_envelope(DensitySpec.pareto(0.6, 1.0))
        assert pareto.exponent == pytest.approx(1.6)
        assert pareto.convolution_power(4).constant == pytest.approx(0.6 * 4 ** 2.6)
        assert pareto.weighted(0.25).exponent == pytest.approx(1.35)
        assert pareto.weighted(0.25).integrable
        assert not pareto.weighted(0.6).integrable
        assert not pointwise_envelope(DensitySpec.log_counterexample()).weighted(0.0).integrable
        exponential = pointwise_envelope(DensitySpec.exponential(1.0)).weighted(1.0)
        assert exponential.kind == EnvelopeKind.EXPONENTIAL
        assert exponential.exponent == pytest.approx(0.5)
        x = np.linspace(0.0, 60.0, 601)
        assert np.all(exponential.value(x) >= (1 + x) * np.exp(-x))
        assert pointwise_envelope(DensitySpec.uniform(0.0, 1.0)).kind == EnvelopeKind.ZERO

    def test_uncertified_truncation(self):
        """Test dropping mass without an envelope raises"""
        with pytest.raises(UncertifiedTruncationError):
            discretize(DensitySpec.uniform(0.0, 1.0), (0.0, 0.5), 0.01)

    def test_grid_overflow(self):
        """Test the grid size cap"""
        with pytest.raises(GridOverflowError):
            grid_points((0.0, 1.0), 1e-3, max_points=100)

    def test_invalid_window(self):
        """Test empty windows are rejected"""
        with pytest.raises(ValueError):
            grid_points((1.0, 0.0), 0.1)


class TestGridFunction:
    """Test GridFunction values, norms and block extrema"""

    @pytest.fixture
    def indicator(self):
        """Indicator of [0, 1) sampled on [-1, 2] with h = 0.01"""
        values = np.zeros(301)
        values[100:200] = 1.0
        return GridFunction(origin=-1.0, spacing=0.01, values=values, label="indicator")

    def test_window_and_points(self, indicator):
        """Test grid geometry"""
        assert indicator.window == pytest.approx((-1.0, 2.0))
        assert indicator.x[100] == pytest.approx(0.0)

    def test_values_are_read_only(self, indicator):
        """Test grid values are immutable"""
        with pytest.raises(ValueError):
            indicator.values[0] = 5.0

    def test_negative_samples_rejected(self):
        """Test non-negative grids refuse negative samples"""
        with pytest.raises(ValueError):
            GridFunction(origin=0.0, spacing=0.1, values=np.array([1.0, -1.0, 1.0]))

    def test_block_sup_and_inf(self, indicator):
        """Test extrema over a block inside the support"""
        assert block_sup(indicator, 0.0, 1.0) == 1.0
        assert block_inf(indicator, 0.0, 1.0) == 1.0
        assert block_inf(indicator, -0.5, 1.0) == 0.0

    def test_block_ordering(self, indicator):
        """Test block_sup >= block_inf within the value range"""
        for left in np.arange(-1.0, 1.9, 0.13):
            s = block_sup(indicator, left, 0.1)
            i = block_inf(indicator, left, 0.1)
            assert 0.0 <= i <= s <= 1.0

    def test_mesh_too_fine(self, indicator):
        """Test blocks need eight samples"""
        with pytest.raises(MeshTooFineError):
            block_sup(indicator, 0.0, 0.05)

    def test_triangle_apex(self):
        """Test the sup of Uniform*Uniform near its apex"""
        from dri_toolkit.convolution.convolution_power import convolve_power
        triangle = convolve_power(DensitySpec.uniform(0.0, 1.0), 2, (0.0, 1.0), 0.01).grid
        assert block_sup(triangle, 0.9, 0.2) == pytest.approx(1.0, abs=0.02)

    def test_refinement_monotone(self):
        """Test halving h never lowers a block sup"""
        spec = DensitySpec.gamma(3.0, 1.0)
        coarse = discretize(spec, (0.0, 32.0), 1 / 64)
        fine = discretize(spec, (0.0, 32.0), 1 / 128)
        for left in (0.0, 1.5, 2.0, 7.25):
            assert block_sup(fine, left, 0.5) >= block_sup(coarse, left, 0.5)

    def test_log_counterexample_monotone_domination(self):
        """Test unit-block sups are dominated by the integral over the previous block"""
        spec = DensitySpec.log_counterexample()
        g = discretize(spec, (0.0, 64.0), 1 / 64)
        for m in range(4, 60):
            mass = spec.cdf(m) - spec.cdf(m - 1)
            assert block_sup(g, float(m), 1.0) <= mass

    def test_lp_norm(self):
        """Test L^p norms of the uniform density"""
        g = discretize(DensitySpec.uniform(0.0, 1.0), (-1.0, 2.0), 0.01)
        assert lp_norm(g, 1.0) == pytest.approx(1.0, abs=1e-6)
        assert lp_norm(g, 2.0) == pytest.approx(1.0, abs=0.01)
        assert lp_norm(g, math.inf) == pytest.approx(1.0)

    def test_lp_norm_infinite(self):
        """Test a flat envelope has infinite L^1 norm"""
        env = TailEnvelope.power(cutoff=10.0, constant=0.1, exponent=0.0, scale=0.1)
        g = GridFunction(origin=0.0, spacing=0.01, values=np.full(1001, 0.1), envelope=env)
        assert math.isinf(lp_norm(g, 1.0))
        # exponent 0.5 envelope: |g|^p integrable only for p > 2
        env = TailEnvelope.power(cutoff=1.0, constant=1.0, exponent=0.5, scale=1.0)
        g = g.with_envelope(env)
        assert math.isinf(lp_norm(g, 2.0))
        assert math.isfinite(lp_norm(g, 3.0))

    def test_evaluate_outside_window(self):
        """Test envelope values are used beyond the window"""
        g = discretize(DensitySpec.exponential(1.0), (0.0, 10.0), 0.01)
        assert g.evaluate(12.0) == pytest.approx(math.exp(-12.0))
        assert g.evaluate(-1.0) == 0.0
        assert g.evaluate(5.0) == pytest.approx(math.exp(-5.0), rel=1e-4)

    def test_certify_window(self):
        """Test a window short of the envelope cutoff is rejected"""
        env = TailEnvelope.power(cutoff=20.0, constant=1.0, exponent=2.0)
        g = GridFunction(origin=-5.0, spacing=0.1, values=np.ones(101), envelope=env)
        with pytest.raises(UncertifiedTruncationError):
            certify_window(g)

    def test_csv_and_sidecar(self, tmp_path):
        """Test grids share the tabulated CSV format and envelopes the JSON sidecar"""
        env = TailEnvelope.power(cutoff=4.0, constant=0.5, exponent=1.5)
        g = GridFunction(origin=0.0, spacing=0.25, values=np.linspace(1.0, 0.1, 17))
        g.to_csv(str(tmp_path / "g.csv"))
        write_envelope_sidecar(env, str(tmp_path / "g.envelope.json"))

        loaded = read_tabulated_csv(str(tmp_path / "g.csv"))
        np.testing.assert_array_equal(loaded.values, g.values)
        assert loaded.envelope.exponent == 1.5
        assert read_envelope_sidecar(str(tmp_path / "g.envelope.json")).cutoff == 4.0


if __name__ == "__main__":
    pytest.main([__file__, "-v"])

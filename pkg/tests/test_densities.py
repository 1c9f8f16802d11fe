"""
Tests for log Radon-Nikodym derivatives and information densities
"""

import math

import pytest
import numpy as np
from pathlib import Path

# Add src to path for imports
import sys
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from core.channels import piecewise_path, simulate_channel
from core.densities import (DensityMode, LogDensityValue, closed_form_info_density_gaussian_scalar,
                            exact_information_density, exact_mismatch_log_rn, exact_process_information_density,
                            exact_process_mismatch_log_rn, information_density, log_rn_conditional,
                            mismatch_log_rn)
from core.errors import PriorError
from core.filters import causal_filter_constant_x, causal_filter_piecewise
from core.montecarlo import EstimatorStats
from core.paths import RngSeed, Stream, make_uniform_grid, sample_brownian
from core.priors import (ConstantX, Gaussian, OrnsteinUhlenbeck, PiecewiseConstantIID, TwoPoint,
                         mutual_information, output_kl)


class TestLogDensityValue:
    """Test cases for LogDensityValue"""

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            LogDensityValue(float('nan'))
        with pytest.raises(ValueError):
            LogDensityValue(float('-inf'))

    def test_difference_keeps_mode(self):
        diff = LogDensityValue(2.5, DensityMode.ANALYTIC) - LogDensityValue(1.0)
        assert float(diff) == 1.5
        assert diff.mode is DensityMode.ANALYTIC

    def test_mode_parse(self):
        assert DensityMode.parse('Analytic') is DensityMode.ANALYTIC
        assert DensityMode.parse(DensityMode.ALGEBRAIC) is DensityMode.ALGEBRAIC
        with pytest.raises(ValueError):
            DensityMode.parse('exact')


class TestScalarDensities:
    """Test cases for closed-form scalar information densities"""

    @pytest.mark.parametrize('x,y,snr', [(0.3, 1.2, 1.0), (-2.0, 0.5, 4.0), (1.0, -3.0, 0.25)])
    def test_gaussian_closed_form_matches_tilt(self, x, y, snr):
        closed = closed_form_info_density_gaussian_scalar(x, y, snr)
        tilted = exact_information_density(Gaussian(0.0, 1.0), x, math.sqrt(snr) * y, snr)
        assert float(closed) == pytest.approx(float(tilted), rel=1e-12, abs=1e-12)
        assert closed.mode is DensityMode.ANALYTIC

    def test_closed_form_needs_positive_snr(self):
        with pytest.raises(ValueError):
            closed_form_info_density_gaussian_scalar(0.0, 0.0, 0.0)

    @pytest.mark.parametrize('name', ['gaussian', 'two_point', 'mixture'])
    def test_mean_is_mutual_information(self, priors, name):
        prior = priors[name]
        snr, n = 1.5, 200000
        x = prior.draw(RngSeed(8).generator(Stream.SIGNAL), n)
        noise = RngSeed(8).generator(Stream.NOISE).standard_normal(n)
        y = math.sqrt(snr) * x + noise
        density = exact_information_density(prior, x, math.sqrt(snr) * y, snr)
        se = np.std(density, ddof=1) / math.sqrt(n)
        assert abs(np.mean(density) - mutual_information(prior, snr)) < 4 * se

    def test_mismatch_mean_is_output_kl(self, priors):
        p, q = priors['two_point'], priors['gaussian']
        snr, n = 1.0, 200000
        x = p.draw(RngSeed(9).generator(Stream.SIGNAL), n)
        y = math.sqrt(snr) * x + RngSeed(9).generator(Stream.NOISE).standard_normal(n)
        log_rn = exact_mismatch_log_rn(p, q, math.sqrt(snr) * y, snr)
        se = np.std(log_rn, ddof=1) / math.sqrt(n)
        assert abs(np.mean(log_rn) - output_kl(p, q, snr)) < 4 * se


class TestPathDensities:
    """Test cases for Girsanov sums along a path"""

    def test_conditional_of_constant_input(self, unit_grid, seed):
        w = sample_brownian(unit_grid, seed)
        x = piecewise_path([0.8], unit_grid)
        y = simulate_channel(x, w)
        expected = 0.8 * y.values[-1] - 0.5 * 0.8 ** 2 * 1.0
        assert float(log_rn_conditional(x, y)) == pytest.approx(expected, rel=1e-12)

    def test_conditional_exponential_has_unit_mean(self):
        """Under pure noise the likelihood ratio of a bounded independent input averages to one"""
        process = PiecewiseConstantIID(TwoPoint(-1.0, 1.0, 0.5), 4)
        grid = make_uniform_grid(0.0, 1.0, 64)
        ratios = []
        for i in range(20000):
            seed = RngSeed(37, i)
            ratios.append(math.exp(float(log_rn_conditional(process.sample_path(grid, seed),
                                                            sample_brownian(grid, seed)))))
        assert EstimatorStats.from_samples(ratios).mean_within(1.0)

    def test_algebraic_approaches_analytic(self, seed):
        """The left-endpoint Girsanov sum converges to the closed form on fine grids"""
        prior = TwoPoint(-1.0, 2.0, 0.3)
        grid = make_uniform_grid(0.0, 1.0, 8192)
        x = piecewise_path([2.0], grid)
        y = simulate_channel(x, sample_brownian(grid, seed))
        algebraic = information_density(x, y, causal_filter_constant_x(prior, y))
        analytic = exact_process_information_density(ConstantX(prior), x, y)
        assert float(algebraic) == pytest.approx(float(analytic), abs=0.05)
        assert analytic.mode is DensityMode.ANALYTIC

    def test_piecewise_analytic_sums_segments(self, seed):
        prior = Gaussian(0.0, 1.0)
        grid = make_uniform_grid(0.0, 2.0, 64)
        x = piecewise_path([1.0, -0.5], grid)
        y = simulate_channel(x, sample_brownian(grid, seed))
        value = exact_process_information_density(PiecewiseConstantIID(prior, 2), x, y)
        h = np.array([y.values[32] - y.values[0], y.values[64] - y.values[32]])
        expected = np.sum(exact_information_density(prior, np.array([1.0, -0.5]), h, 1.0))
        assert float(value) == pytest.approx(expected)

    def test_mismatch_algebraic_approaches_analytic(self, seed):
        p, q = TwoPoint(-1.0, 2.0, 0.3), Gaussian(0.0, 1.0)
        grid = make_uniform_grid(0.0, 1.0, 8192)
        y = simulate_channel(piecewise_path([-1.0], grid), sample_brownian(grid, seed))
        algebraic = mismatch_log_rn(causal_filter_piecewise(p, y).estimate_path,
                                    causal_filter_piecewise(q, y).estimate_path, y)
        analytic = exact_process_mismatch_log_rn(ConstantX(p), ConstantX(q), y)
        assert float(algebraic) == pytest.approx(float(analytic), abs=0.05)

    def test_analytic_needs_piecewise_input(self, unit_grid, seed):
        ou = OrnsteinUhlenbeck(1.0, 1.0)
        x = ou.sample_path(unit_grid, seed)
        y = simulate_channel(x, sample_brownian(unit_grid, seed))
        with pytest.raises(PriorError):
            exact_process_information_density(ou, x, y)

    def test_mismatch_segments_must_agree(self, unit_grid, seed, standard_gaussian):
        y = sample_brownian(unit_grid, seed)
        with pytest.raises(PriorError):
            exact_process_mismatch_log_rn(PiecewiseConstantIID(standard_gaussian, 2),
                                          PiecewiseConstantIID(standard_gaussian, 4), y)

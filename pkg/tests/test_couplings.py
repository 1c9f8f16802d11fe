"""
Tests for the joint constructions of scalar channel outputs
"""

import math

import pytest
import numpy as np
from pathlib import Path

# Add src to path for imports
import sys
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from core.couplings import (CouplingKind, channel_residual, coupling_estimate_path, coupling_posterior_mean,
                            natural_parameters, simulate_additive_gaussian_coupling, simulate_bm_coupling,
                            simulate_coupling, simulate_independent_coupling)
from core.errors import GridError, IdentityError
from core.paths import RngSeed, make_uniform_grid
from core.priors import Gaussian, GaussianObservation, posterior_mean


class TestCouplingKind:
    """Test cases for coupling names"""

    @pytest.mark.parametrize('name,kind', [
        ('bm', CouplingKind.BROWNIAN_MOTION),
        ('A', CouplingKind.BROWNIAN_MOTION),
        ('additive', CouplingKind.ADDITIVE_GAUSSIAN),
        ('b', CouplingKind.ADDITIVE_GAUSSIAN),
        ('independent', CouplingKind.INDEPENDENT_GAUSSIANS),
        ('C', CouplingKind.INDEPENDENT_GAUSSIANS),
    ])
    def test_parse(self, name, kind):
        assert CouplingKind.parse(name) is kind

    def test_unknown(self):
        with pytest.raises(IdentityError):
            CouplingKind.parse('poisson')


class TestSimulation:
    """Test cases for sampling under each coupling"""

    def test_bm_coupling_starts_at_zero(self, seed):
        sample = simulate_bm_coupling(0.8, make_uniform_grid(0.0, 2.0, 64), seed)
        assert sample.y.values[0] == 0.0
        assert sample.snr == 2.0
        np.testing.assert_allclose(sample.y.values - sample.noise.values, 0.8 * sample.y.grid.points)

    def test_additive_shares_noise(self, seed):
        sample = simulate_additive_gaussian_coupling(1.2, make_uniform_grid(0.0, 4.0, 16), seed)
        residual = sample.y.values - np.sqrt(sample.y.grid.points) * 1.2
        np.testing.assert_allclose(residual, sample.noise)

    def test_independent_blocks(self, seed):
        sample = simulate_independent_coupling(-0.5, 3.0, 6, seed)
        assert sample.blocks == 6
        assert sample.y.grid.n_steps == 6
        residual = sample.y.values - np.sqrt(sample.y.grid.points) * -0.5
        np.testing.assert_allclose(residual[1:], sample.noise)
        assert residual[0] == sample.noise[0]

    @pytest.mark.parametrize('blocks', [0, 2.5, True])
    def test_invalid_block_count(self, seed, blocks):
        with pytest.raises(GridError):
            simulate_independent_coupling(0.0, 1.0, blocks, seed)

    def test_snr_grid_must_start_at_zero(self, seed):
        with pytest.raises(GridError):
            simulate_bm_coupling(0.0, make_uniform_grid(0.5, 1.0, 4), seed)

    def test_dispatch(self, seed):
        assert simulate_coupling('bm', 0.0, 1.0, 8, seed).kind is CouplingKind.BROWNIAN_MOTION
        assert simulate_coupling('additive', 0.0, 1.0, 8, seed).kind is CouplingKind.ADDITIVE_GAUSSIAN
        assert simulate_coupling('independent', 0.0, 1.0, 8, seed).blocks == 8

    @pytest.mark.parametrize('kind', list(CouplingKind))
    def test_marginals_are_the_scalar_channel(self, kind):
        """Y_gamma/sqrt(gamma) - sqrt(gamma)*x is standard normal at every level"""
        residuals = np.array([channel_residual(simulate_coupling(kind, 0.7, 2.0, 8, RngSeed(5, i)), 4)
                              for i in range(4000)])
        se_mean = 1.0 / math.sqrt(len(residuals))
        assert abs(residuals.mean()) < 4 * se_mean
        assert abs(residuals.var(ddof=1) - 1.0) < 4 * math.sqrt(2.0 / len(residuals))

    def test_residual_needs_positive_level(self, seed):
        with pytest.raises(GridError):
            channel_residual(simulate_coupling('bm', 0.0, 1.0, 8, seed), 0)


class TestPosteriorMean:
    """Test cases for conditional means along a coupling"""

    def test_natural_parameters(self):
        h, lam = natural_parameters(CouplingKind.BROWNIAN_MOTION, 1.5, 2.0)
        assert (float(h), float(lam)) == (1.5, 2.0)
        h, lam = natural_parameters(CouplingKind.ADDITIVE_GAUSSIAN, 1.5, 4.0)
        assert (float(h), float(lam)) == (3.0, 4.0)

    def test_bm_matches_scalar_observation(self, seed):
        """gamma*X + W_gamma carries the same information as sqrt(gamma)*X + N"""
        prior = Gaussian(0.3, 1.5)
        sample = simulate_bm_coupling(1.0, make_uniform_grid(0.0, 2.0, 8), seed)
        y = sample.y.values[-1]
        expected = posterior_mean(prior, GaussianObservation(scale=1.0, noise_variance=0.5, value=y / 2.0))
        assert coupling_posterior_mean('bm', prior, sample, 2.0) == pytest.approx(expected)

    def test_prior_mean_at_zero(self, seed):
        prior = Gaussian(0.3, 1.5)
        sample = simulate_additive_gaussian_coupling(1.0, make_uniform_grid(0.0, 2.0, 8), seed)
        assert coupling_posterior_mean('additive', prior, sample, 0.0) == 0.3
        path = coupling_estimate_path(prior, sample)
        assert path.values[0] == pytest.approx(0.3)
        assert path.values[-1] == pytest.approx(coupling_posterior_mean('additive', prior, sample, 2.0))

    def test_kind_mismatch(self, seed, standard_gaussian):
        sample = simulate_bm_coupling(1.0, make_uniform_grid(0.0, 1.0, 8), seed)
        with pytest.raises(IdentityError):
            coupling_posterior_mean('additive', standard_gaussian, sample, 1.0)

    def test_off_grid_level(self, seed, standard_gaussian):
        sample = simulate_bm_coupling(1.0, make_uniform_grid(0.0, 1.0, 8), seed)
        with pytest.raises(GridError):
            coupling_posterior_mean('bm', standard_gaussian, sample, 0.3)

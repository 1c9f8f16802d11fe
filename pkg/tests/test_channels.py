"""
Tests for the continuous-time channel, feedback drifts and time reversal
"""

import pytest
import numpy as np
from pathlib import Path

# Add src to path for imports
import sys
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from core.channels import (IdentityPhi, ObservableDrift, phi_from_dict, piecewise_path, segment_values,
                           simulate_channel, simulate_feedback_channel, time_reverse)
from core.errors import GridError, IdentityError
from core.paths import RngSeed, SamplePath, ito_integral, make_uniform_grid, sample_brownian
from core.priors import OrnsteinUhlenbeck


class TestSimulateChannel:
    """Test cases for dY = level*X dt + dW"""

    def test_constant_input(self, unit_grid, seed):
        w = sample_brownian(unit_grid, seed)
        x = SamplePath(unit_grid, np.full(unit_grid.n_steps + 1, 1.5))
        y = simulate_channel(x, w)
        assert y.values[0] == 0.0
        np.testing.assert_allclose(y.values, 1.5 * unit_grid.points + w.values, atol=1e-12)

    def test_level_scales_drift(self, unit_grid, seed):
        w = sample_brownian(unit_grid, seed)
        x = SamplePath(unit_grid, np.ones(unit_grid.n_steps + 1))
        y = simulate_channel(x, w, level=3.0)
        assert y.values[-1] == pytest.approx(3.0 + w.values[-1])

    def test_drift_uses_left_endpoint(self):
        grid = make_uniform_grid(0.0, 1.0, 2)
        x = SamplePath(grid, np.array([1.0, 2.0, 100.0]))
        w = SamplePath(grid, np.zeros(3))
        y = simulate_channel(x, w)
        np.testing.assert_allclose(y.values, [0.0, 0.5, 1.5])

    def test_grids_must_match(self, unit_grid, seed):
        w = sample_brownian(make_uniform_grid(0.0, 1.0, 64), seed)
        x = SamplePath(unit_grid, np.zeros(unit_grid.n_steps + 1))
        with pytest.raises(GridError):
            simulate_channel(x, w)


class TestSegments:
    """Test cases for piecewise constant inputs"""

    def test_segment_values_round_trip(self):
        grid = make_uniform_grid(0.0, 2.0, 12)
        path = piecewise_path([0.5, -1.0, 2.0], grid)
        np.testing.assert_array_equal(segment_values(path, 3), [0.5, -1.0, 2.0])

    def test_non_piecewise_rejected(self, unit_grid, seed):
        path = OrnsteinUhlenbeck(1.0, 1.0).sample_path(unit_grid, seed)
        with pytest.raises(IdentityError):
            segment_values(path, 4)

    def test_misaligned_segments_rejected(self):
        grid = make_uniform_grid(0.0, 1.0, 10)
        with pytest.raises(IdentityError):
            segment_values(SamplePath(grid, np.zeros(11)), 3)


class TestFeedback:
    """Test cases for channels with feedback"""

    def test_identity_phi_is_plain_channel(self, unit_grid, seed):
        w = sample_brownian(unit_grid, seed)
        x = piecewise_path([0.3, -0.4], unit_grid)
        np.testing.assert_array_equal(simulate_feedback_channel(IdentityPhi(), x, w).values,
                                      simulate_channel(x, w).values)

    def test_filter_observation_removes_feedback(self, unit_grid, seed):
        """Subtracting the observable drift leaves the plain channel output"""
        phi = ObservableDrift(0.8)
        w = sample_brownian(unit_grid, seed)
        x = piecewise_path([1.0, -2.0], unit_grid)
        y = simulate_feedback_channel(phi, x, w)
        np.testing.assert_allclose(phi.filter_observation(y).values, simulate_channel(x, w).values, atol=1e-10)

    def test_signal_adds_observable(self, unit_grid, seed):
        phi = ObservableDrift(0.5)
        w = sample_brownian(unit_grid, seed)
        x = piecewise_path([1.0], unit_grid)
        y = simulate_feedback_channel(phi, x, w)
        np.testing.assert_allclose(phi.signal(x, y).values, 1.0 + 0.5 * np.sin(y.values))
        assert np.all(phi.estimate(x, y).values == phi.signal(x, y).values)

    def test_phi_from_dict(self):
        assert isinstance(phi_from_dict({'name': 'identity'}), IdentityPhi)
        assert phi_from_dict({'name': 'observable_drift', 'b': 0.25}) == ObservableDrift(0.25)
        assert phi_from_dict('observable_drift') == ObservableDrift(0.5)
        with pytest.raises(IdentityError):
            phi_from_dict({'name': 'bang_bang'})


class TestTimeReverse:
    """Test cases for time reversal of the channel"""

    def test_reversed_integral_matches(self, seed):
        grid = make_uniform_grid(0.0, 1.0, 64)
        w = sample_brownian(grid, seed)
        x = piecewise_path([0.5, -1.0, 2.0, 0.0], grid)
        y = simulate_channel(x, w)
        rev = time_reverse(x, y, w, segments=4)
        np.testing.assert_array_equal(rev.x.values[:16], 0.0)
        assert rev.x.values[-1] == 0.5
        assert ito_integral(rev.x, rev.noise) == pytest.approx(ito_integral(x, w), abs=1e-12)

    def test_reversed_output_is_a_channel(self, seed):
        """Y~ = int X~ dt + B on the reversed clock"""
        grid = make_uniform_grid(0.0, 1.0, 64)
        w = sample_brownian(grid, seed)
        x = piecewise_path([0.5, -1.0], grid)
        rev = time_reverse(x, simulate_channel(x, w), w, segments=2)
        np.testing.assert_allclose(rev.y.values, simulate_channel(rev.x, rev.noise).values, atol=1e-12)

    def test_double_reversal(self, seed):
        grid = make_uniform_grid(0.0, 1.0, 32)
        w = sample_brownian(grid, seed)
        x = piecewise_path([0.5, -1.0], grid)
        y = simulate_channel(x, w)
        rev = time_reverse(x, y, w, segments=2)
        back = time_reverse(rev.x, rev.y, rev.noise, segments=2)
        np.testing.assert_allclose(back.y.values, y.values, atol=1e-12)
        np.testing.assert_array_equal(back.x.values, x.values)

    def test_non_piecewise_input_rejected(self, unit_grid, seed):
        w = sample_brownian(unit_grid, seed)
        x = OrnsteinUhlenbeck(1.0, 1.0).sample_path(unit_grid, seed)
        with pytest.raises(IdentityError):
            time_reverse(x, simulate_channel(x, w), w)

    def test_output_of_another_noise_rejected(self, seed):
        grid = make_uniform_grid(0.0, 1.0, 64)
        w = sample_brownian(grid, seed)
        other = sample_brownian(grid, RngSeed(seed.master_seed, seed.stream_index + 1))
        x = piecewise_path([0.5, -1.0], grid)
        with pytest.raises(IdentityError):
            time_reverse(x, simulate_channel(x, other), w, segments=2)

    def test_output_of_another_input_rejected(self, seed):
        grid = make_uniform_grid(0.0, 1.0, 64)
        w = sample_brownian(grid, seed)
        x = piecewise_path([0.5, -1.0], grid)
        y = simulate_channel(piecewise_path([0.5, 1.0], grid), w)
        with pytest.raises(IdentityError):
            time_reverse(x, y, w, segments=2)

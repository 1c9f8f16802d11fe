"""
Tests for the pointwise information-estimation identities
"""

import math

import pytest
import numpy as np
from pathlib import Path

# Add src to path for imports
import sys
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from core.channels import IdentityPhi, ObservableDrift, simulate_channel, simulate_feedback_channel, time_reverse
from core.couplings import (simulate_additive_gaussian_coupling, simulate_bm_coupling,
                            simulate_independent_coupling)
from core.densities import DensityMode
from core.errors import IdentityError
from core.filters import causal_filter_piecewise, kalman_bucy
from core.identities import (IdentityReport, additive_coupling_Z, bm_coupling_Z, causal_anticausal_J,
                             causal_vs_noncausal, closed_form_Z, cross_coupling_check, duncan_D, feedback_D_phi,
                             feedback_M_phi, independent_block_Z, independent_limit_Z, integrated_ztilde, mismatch_M,
                             sheet_N, scalar_Z, scalar_Z_mismatch, ztilde_gamma)
from core.paths import (RngSeed, SheetSpec, Stream, ito_integral, make_uniform_grid, sample_brownian,
                        sample_sheet)
from core.priors import ConstantX, Gaussian, OrnsteinUhlenbeck, PiecewiseConstantIID, TwoPoint
from core.priors import sample as sample_prior


def _channel(process, grid, seed):
    x = process.sample_path(grid, seed)
    w = sample_brownian(grid, seed)
    return x, simulate_channel(x, w), w


class TestIdentityReport:
    """Test cases for IdentityReport"""

    def test_gap_and_row(self):
        report = IdentityReport('duncan_D', 1.25, 1.0, seed=RngSeed(3, 4))
        assert report.pathwise_gap == 0.25
        assert not report.closes()
        row = report.to_row()
        assert row['seed'] == '3:4'
        assert float(row['gap']) == 0.25
        assert row['mode'] == 'algebraic'

    def test_closes_within_relative_bound(self):
        assert IdentityReport('x', 1e6, 1e6 + 1e-4).closes()
        assert not IdentityReport('x', 1.0, 1.0 + 1e-6).closes()


class TestScalarIdentities:
    """Test cases for the scalar channel identities over snr"""

    def test_scalar_z_closes(self, priors):
        grid = make_uniform_grid(0.0, 1.5, 512)
        for i, prior in enumerate(priors.values()):
            sample = simulate_bm_coupling(sample_prior(prior, RngSeed(41, i)), grid, RngSeed(41, i))
            report = scalar_Z(sample, prior)
            assert report.closes(), f"{prior.kind}: gap {report.pathwise_gap}"
            assert report.x_value == sample.x

    def test_scalar_z_analytic_gap_is_small(self, seed):
        prior = TwoPoint(-1.0, 2.0, 0.3)
        sample = simulate_bm_coupling(2.0, make_uniform_grid(0.0, 1.0, 8192), seed)
        report = scalar_Z(sample, prior, DensityMode.ANALYTIC)
        assert report.mode is DensityMode.ANALYTIC
        assert abs(report.pathwise_gap) < 0.05

    def test_scalar_z_needs_bm_sample(self, seed, standard_gaussian):
        sample = simulate_additive_gaussian_coupling(0.0, make_uniform_grid(0.0, 1.0, 8), seed)
        with pytest.raises(IdentityError):
            scalar_Z(sample, standard_gaussian)

    @pytest.mark.parametrize('mode', [DensityMode.ALGEBRAIC, DensityMode.ANALYTIC])
    def test_batched_bm_z_matches_scalar_z(self, priors, mode):
        grid = make_uniform_grid(0.0, 1.5, 128)
        for i, prior in enumerate(priors.values()):
            sample = simulate_bm_coupling(sample_prior(prior, RngSeed(43, i)), grid, RngSeed(43, i))
            batched = bm_coupling_Z(prior, [sample.x], sample.noise.increments[None, :], 1.5, mode)
            assert batched.shape == (1,)
            assert batched[0] == pytest.approx(scalar_Z(sample, prior, mode).left_value, abs=1e-9)

    def test_batched_bm_z_shape_mismatch(self, standard_gaussian):
        with pytest.raises(IdentityError):
            bm_coupling_Z(standard_gaussian, [0.0, 1.0], np.zeros((1, 8)), 1.0)

    def test_mismatch_closes(self, priors, seed):
        sample = simulate_bm_coupling(1.0, make_uniform_grid(0.0, 2.0, 512), seed)
        report = scalar_Z_mismatch(sample, priors['two_point'], priors['mixture'])
        assert report.closes()

    def test_mismatch_of_equal_priors_is_zero(self, seed, standard_gaussian):
        sample = simulate_bm_coupling(1.0, make_uniform_grid(0.0, 2.0, 64), seed)
        report = scalar_Z_mismatch(sample, standard_gaussian, standard_gaussian)
        assert report.left_value == pytest.approx(0.0, abs=1e-12)
        assert report.right_value == 0.0


class TestCouplingIdentities:
    """Test cases for the additive and independent couplings"""

    @pytest.mark.parametrize('snr', [0.5, 1.0, 3.0])
    def test_additive_matches_closed_form(self, snr):
        x = RngSeed(2).generator(Stream.SIGNAL).standard_normal(50)
        n = RngSeed(2).generator(Stream.NOISE).standard_normal(50)
        np.testing.assert_allclose(additive_coupling_Z(Gaussian(0.0, 1.0), x, n, snr),
                                   closed_form_Z('additive', x, n, snr), atol=1e-9)

    @pytest.mark.parametrize('snr', [0.5, 1.0, 3.0])
    def test_independent_limit_matches_closed_form(self, snr):
        x = RngSeed(3).generator(Stream.SIGNAL).standard_normal(50)
        n = RngSeed(3).generator(Stream.NOISE).standard_normal(50)
        np.testing.assert_allclose(independent_limit_Z(Gaussian(0.0, 1.0), x, n, snr),
                                   closed_form_Z('independent', x, n, snr), atol=1e-9)

    def test_closed_form_variances(self):
        """Var Z_B = 1/2 log^2(1+snr) + atan^2(sqrt snr), Var Z_C = snr(1+2snr)/(2(1+snr)^2)"""
        n_paths = 400000
        x = RngSeed(4).generator(Stream.SIGNAL).standard_normal(n_paths)
        n = RngSeed(4).generator(Stream.NOISE).standard_normal(n_paths)
        z_b = closed_form_Z('additive', x, n, 1.0)
        z_c = closed_form_Z('independent', x, n, 1.0)
        assert np.var(z_b) == pytest.approx(0.857076, rel=0.02)
        assert np.var(z_c) == pytest.approx(0.375, rel=0.02)
        assert abs(np.mean(z_b)) < 4 * np.std(z_b) / math.sqrt(n_paths)

    def test_closed_form_preconditions(self):
        with pytest.raises(IdentityError):
            closed_form_Z('bm', 0.0, 0.0, 1.0)
        with pytest.raises(IdentityError):
            closed_form_Z('additive', 0.0, 0.0, 1.0, prior=Gaussian(0.0, 2.0))
        with pytest.raises(IdentityError):
            closed_form_Z('additive', 0.0, 0.0, 0.0)

    def test_integrated_ztilde_is_z(self, priors):
        """Z~ is the snr derivative of Z along the additive coupling"""
        x = np.array([-1.0, 0.3, 2.0])
        n = np.array([0.5, -1.2, 0.1])
        for name in ('gaussian', 'two_point', 'mixture'):
            prior = priors[name]
            np.testing.assert_allclose(integrated_ztilde(prior, x, n, 1.3), additive_coupling_Z(prior, x, n, 1.3),
                                       atol=1e-8)

    def test_ztilde_difference_quotient(self, seed):
        prior = TwoPoint(-1.0, 2.0, 0.3)
        sample = simulate_additive_gaussian_coupling(2.0, make_uniform_grid(0.0, 2.0, 2000), seed)
        eps = sample.y.grid.step
        gamma = 1.0
        n = sample.noise
        quotient = (additive_coupling_Z(prior, 2.0, n, gamma + eps)
                    - additive_coupling_Z(prior, 2.0, n, gamma - eps)) / (2 * eps)
        assert ztilde_gamma(prior, sample, gamma) == pytest.approx(float(quotient), abs=1e-5)

    def test_ztilde_preconditions(self, seed, standard_gaussian):
        sample = simulate_additive_gaussian_coupling(0.0, make_uniform_grid(0.0, 1.0, 8), seed)
        with pytest.raises(IdentityError):
            ztilde_gamma(standard_gaussian, sample, 0.0)
        bm = simulate_bm_coupling(0.0, make_uniform_grid(0.0, 1.0, 8), seed)
        with pytest.raises(IdentityError):
            ztilde_gamma(standard_gaussian, bm, 0.5)

    def test_block_z_approaches_limit(self, seed):
        prior = TwoPoint(-1.0, 2.0, 0.3)
        sample = simulate_independent_coupling(0.7, 1.0, 4000, seed)
        limit = independent_limit_Z(prior, 0.7, sample.noise[-1], 1.0)
        assert independent_block_Z(prior, sample) == pytest.approx(float(limit), abs=0.1)

    def test_cross_coupling_gap_is_small(self, priors):
        grid = make_uniform_grid(0.0, 1.0, 8192)
        for i, name in enumerate(('gaussian', 'two_point')):
            w = sample_brownian(grid, RngSeed(31, i))
            report = cross_coupling_check(0.8, w, priors[name])
            assert report.mode is DensityMode.ANALYTIC
            assert abs(report.pathwise_gap) < 0.05


class TestDuncan:
    """Test cases for the continuous-time tracking errors"""

    @pytest.mark.parametrize('process', [
        ConstantX(TwoPoint(-1.0, 2.0, 0.3)),
        PiecewiseConstantIID(Gaussian(0.5, 2.0), 4),
    ])
    def test_duncan_closes(self, process, unit_grid, seed):
        x, y, w = _channel(process, unit_grid, seed)
        out = causal_filter_piecewise(process.prior, y, process.segments)
        report = duncan_D(x, y, out, w, seed=seed)
        assert report.closes()
        assert report.seed == seed

    def test_duncan_closes_for_ou(self, unit_grid, seed):
        ou = OrnsteinUhlenbeck(1.0, 1.0)
        x, y, w = _channel(ou, unit_grid, seed)
        assert duncan_D(x, y, kalman_bucy(ou, y), w).closes()

    def test_ou_has_no_analytic_density(self, unit_grid, seed):
        ou = OrnsteinUhlenbeck(1.0, 1.0)
        x, y, w = _channel(ou, unit_grid, seed)
        with pytest.raises(IdentityError):
            duncan_D(x, y, kalman_bucy(ou, y), w, mode=DensityMode.ANALYTIC)

    def test_right_endpoint_breaks_identity(self, unit_grid, seed):
        process = ConstantX(Gaussian(0.0, 1.0))
        x, y, w = _channel(process, unit_grid, seed)
        out = causal_filter_piecewise(process.prior, y)
        report = duncan_D(x, y, out, w, endpoint='right')
        assert not report.closes()
        with pytest.raises(IdentityError):
            duncan_D(x, y, out, w, endpoint='middle')

    def test_mismatch_closes(self, unit_grid, seed):
        p = PiecewiseConstantIID(TwoPoint(-1.0, 2.0, 0.3), 2)
        q = PiecewiseConstantIID(Gaussian(0.0, 1.0), 2)
        x, y, w = _channel(p, unit_grid, seed)
        report = mismatch_M(x, y, causal_filter_piecewise(p.prior, y, 2), causal_filter_piecewise(q.prior, y, 2), w)
        assert report.closes()
        analytic = mismatch_M(x, y, causal_filter_piecewise(p.prior, y, 2), causal_filter_piecewise(q.prior, y, 2),
                              w, mode=DensityMode.ANALYTIC)
        assert analytic.right_value == report.right_value


class TestFeedback:
    """Test cases for channels with feedback"""

    def test_identity_phi_reproduces_duncan(self, unit_grid, seed):
        process = ConstantX(TwoPoint(-1.0, 2.0, 0.3))
        x, y, w = _channel(process, unit_grid, seed)
        out = causal_filter_piecewise(process.prior, y)
        plain = duncan_D(x, y, out, w)
        phi = IdentityPhi()
        fed = feedback_D_phi(phi, x, simulate_feedback_channel(phi, x, w), w, out)
        assert fed.identity_name == 'duncan_D'
        assert fed.left_value == plain.left_value
        assert fed.right_value == plain.right_value

    def test_observable_drift_closes(self, unit_grid, seed):
        phi = ObservableDrift(0.8)
        process = PiecewiseConstantIID(TwoPoint(-1.0, 2.0, 0.3), 2)
        x = process.sample_path(unit_grid, seed)
        w = sample_brownian(unit_grid, seed)
        y = simulate_feedback_channel(phi, x, w)
        out = causal_filter_piecewise(process.prior, phi.filter_observation(y), 2)
        report = feedback_D_phi(phi, x, y, w, out)
        assert report.identity_name == 'feedback_D_phi'
        assert report.closes()

    def test_feedback_mismatch_closes(self, unit_grid, seed):
        phi = ObservableDrift(0.5)
        p, q = TwoPoint(-1.0, 2.0, 0.3), Gaussian(0.0, 1.0)
        x = ConstantX(p).sample_path(unit_grid, seed)
        w = sample_brownian(unit_grid, seed)
        y = simulate_feedback_channel(phi, x, w)
        y_plain = phi.filter_observation(y)
        report = feedback_M_phi(phi, x, y, w, causal_filter_piecewise(p, y_plain), causal_filter_piecewise(q, y_plain))
        assert report.identity_name == 'feedback_M_phi'
        assert report.closes()

    def test_unknown_phi(self, unit_grid, seed):
        process = ConstantX(Gaussian(0.0, 1.0))
        x, y, w = _channel(process, unit_grid, seed)
        with pytest.raises(IdentityError):
            feedback_D_phi('sin', x, y, w, causal_filter_piecewise(process.prior, y))


class TestSheetIdentities:
    """Test cases for identities over a Brownian sheet"""

    def _sheet(self, seed, time_steps=64, snr_steps=64, snr=2.0):
        spec = SheetSpec(make_uniform_grid(0.0, 1.0, time_steps), make_uniform_grid(0.0, snr, snr_steps))
        return sample_sheet(spec, seed)

    @pytest.mark.parametrize('process', [
        ConstantX(TwoPoint(-1.0, 2.0, 0.3)),
        PiecewiseConstantIID(Gaussian(0.5, 2.0), 4),
    ])
    def test_sheet_closes(self, process, seed):
        sheet = self._sheet(seed)
        x = process.sample_path(sheet.time_grid, seed)
        assert sheet_N(process, x, sheet).closes()

    def test_sheet_analytic_uses_exact_density(self, seed):
        process = ConstantX(Gaussian(0.0, 1.0))
        sheet = self._sheet(seed)
        x = process.sample_path(sheet.time_grid, seed)
        algebraic = sheet_N(process, x, sheet)
        analytic = sheet_N(process, x, sheet, DensityMode.ANALYTIC)
        assert analytic.right_value == algebraic.right_value
        assert analytic.left_value != algebraic.left_value

    def test_sheet_rejects_ou(self, seed):
        ou = OrnsteinUhlenbeck(1.0, 1.0)
        sheet = self._sheet(seed)
        with pytest.raises(IdentityError):
            sheet_N(ou, ou.sample_path(sheet.time_grid, seed), sheet)

    def test_sheet_time_grid_must_match(self, seed):
        process = ConstantX(Gaussian(0.0, 1.0))
        sheet = self._sheet(seed)
        x = process.sample_path(make_uniform_grid(0.0, 1.0, 32), seed)
        with pytest.raises(IdentityError):
            sheet_N(process, x, sheet)

    @pytest.mark.parametrize('process', [
        ConstantX(TwoPoint(-1.0, 2.0, 0.3)),
        PiecewiseConstantIID(Gaussian(0.5, 2.0), 4),
    ])
    def test_causal_vs_noncausal_closes(self, process, seed):
        sheet = self._sheet(seed)
        x = process.sample_path(sheet.time_grid, seed)
        report = causal_vs_noncausal(process, x, sheet)
        assert report.closes()
        assert report.correction != 0.0

    @pytest.mark.parametrize('process', [
        ConstantX(TwoPoint(-1.0, 2.0, 0.3)),
        PiecewiseConstantIID(Gaussian(0.5, 2.0), 4),
    ])
    def test_causal_anticausal_closes(self, process, unit_grid, seed):
        x, y, w = _channel(process, unit_grid, seed)
        out = causal_filter_piecewise(process.prior, y, process.segments)
        report = causal_anticausal_J(x, y, w, out)
        assert report.closes()

    def test_causal_anticausal_analytic_has_no_correction(self, unit_grid, seed):
        process = ConstantX(Gaussian(0.0, 1.0))
        x, y, w = _channel(process, unit_grid, seed)
        report = causal_anticausal_J(x, y, w, causal_filter_piecewise(process.prior, y), DensityMode.ANALYTIC)
        assert report.correction == 0.0

    def test_causal_anticausal_right_side_excludes_correction(self, unit_grid, seed):
        process = PiecewiseConstantIID(TwoPoint(-1.0, 2.0, 0.3), 2)
        x, y, w = _channel(process, unit_grid, seed)
        out = causal_filter_piecewise(process.prior, y, 2)
        report = causal_anticausal_J(x, y, w, out)
        reverse = time_reverse(x, y, w, 2)
        backward = causal_filter_piecewise(process.prior, reverse.y, 2).estimate_path
        expected = 2.0 * (ito_integral(out.estimate_path, w) - ito_integral(backward, reverse.noise))
        assert report.right_value == pytest.approx(expected, abs=1e-12)
        assert report.pathwise_gap == report.left_value - (report.right_value + report.correction)
        row = report.to_row()
        assert float(row['correction']) == report.correction
        assert float(row['right']) == report.right_value

    def test_causal_vs_noncausal_right_side_excludes_correction(self, seed):
        process = ConstantX(TwoPoint(-1.0, 2.0, 0.3))
        sheet = self._sheet(seed)
        x = process.sample_path(sheet.time_grid, seed)
        algebraic = causal_vs_noncausal(process, x, sheet)
        analytic = causal_vs_noncausal(process, x, sheet, DensityMode.ANALYTIC)
        assert analytic.correction == 0.0
        assert algebraic.right_value == analytic.right_value
        assert algebraic.closes()

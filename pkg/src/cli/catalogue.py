"""
Catalogue of runnable identities

Every entry turns an ExperimentConfig into per-path runs (or one batch draw
for the closed-form couplings), and knows the mean and variance its tracking
error should have.
"""

from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional

import numpy as np

from core.channels import phi_from_dict, simulate_channel, simulate_feedback_channel
from core.couplings import CouplingKind, simulate_bm_coupling
from core.densities import DensityMode
from core.errors import ConfigError, IdentityError
from core.filters import (FilterOutput, causal_filter_piecewise, kalman_bucy, particle_filter,
                          riccati_oracle)
from core.identities import (IdentityReport, causal_anticausal_J, causal_vs_noncausal, closed_form_Z,
                             cross_coupling_check, duncan_D, feedback_D_phi, feedback_M_phi, mismatch_M, scalar_Z,
                             scalar_Z_mismatch, sheet_N)
from core.montecarlo import coupling_variance_target, coupling_Z_samples
from core.paths import RngSeed, SheetSpec, Stream, make_uniform_grid, sample_brownian, sample_sheet
from core.priors import (ConstantX, Gaussian, OrnsteinUhlenbeck, PiecewiseConstantIID, ProcessPrior,
                         mutual_information, output_kl, sample)
from utils.config import ExperimentConfig


@dataclass(frozen=True)
class Point:
    """One resolved parameter point of an experiment"""
    config: ExperimentConfig
    mode: DensityMode
    snr: float
    horizon: float
    n_steps: int
    snr_steps: int
    coupling: CouplingKind
    blocks: Optional[int]

    @classmethod
    def from_config(cls, config: ExperimentConfig, **overrides) -> 'Point':
        c = config.config
        values = dict(
            config=config,
            mode=config.mode,
            snr=float(c['snr']),
            horizon=float(c['horizon']),
            n_steps=int(c['n_steps']),
            snr_steps=int(c['snr_steps'] or c['n_steps']),
            coupling=CouplingKind.parse(c['coupling']),
            blocks=c['blocks'],
        )
        values.update(overrides)
        return cls(**values)

    def with_value(self, key: str, value) -> 'Point':
        if key == 'coupling':
            value = CouplingKind.parse(value)
        return replace(self, **{key: value})


PathOp = Callable[[Point, RngSeed], IdentityReport]
BatchOp = Callable[[Point, int, int], tuple]


@dataclass(frozen=True)
class IdentitySpec:
    """
    A runnable identity

    Exactly one of path_op and batch_op is set. closes_algebraically marks
    identities whose Algebraic-mode gap must vanish to rounding.
    """
    name: str
    description: str
    parameters: str
    path_op: Optional[PathOp] = None
    batch_op: Optional[BatchOp] = None
    variance_target: Optional[Callable[[Point], Optional[float]]] = None
    mean_target: Callable[[Point], Optional[float]] = lambda point: 0.0
    closes_algebraically: bool = True
    check: Optional[Callable[[Point], None]] = None

    def target_mean(self, point: Point) -> Optional[float]:
        return self.mean_target(point)

    def target_variance(self, point: Point) -> Optional[float]:
        return None if self.variance_target is None else self.variance_target(point)

    def validate(self, point: Point):
        """Raise ConfigError if the point is outside the identity's preconditions"""
        if self.check is not None:
            try:
                self.check(point)
            except (IdentityError, ValueError) as e:
                if isinstance(e, ConfigError):
                    raise
                raise ConfigError(f"{self.name}: {e}") from e


# building blocks

def _process(point: Point) -> ProcessPrior:
    return point.config.process()


def _time_grid(point: Point):
    return make_uniform_grid(0.0, point.horizon, point.n_steps)


def _causal_filter(process: ProcessPrior, y, point: Point, seed: RngSeed, level: float = 1.0) -> FilterOutput:
    n_particles = point.config['n_particles']
    if n_particles is not None:
        return particle_filter(process, y, n_particles, seed, level)
    if isinstance(process, OrnsteinUhlenbeck):
        return kalman_bucy(process, y)
    return causal_filter_piecewise(process.prior, y, process.segments, level)


def _segments_fit(point: Point):
    process = _process(point)
    if isinstance(process, (ConstantX, PiecewiseConstantIID)) and point.n_steps % process.segments:
        raise IdentityError(f"{point.n_steps} steps do not split into {process.segments} segments")


def _piecewise_only(point: Point):
    process = _process(point)
    if not isinstance(process, (ConstantX, PiecewiseConstantIID)):
        raise IdentityError(f"needs a constant or piecewise constant input, got {process.kind}")
    _segments_fit(point)


def _analytic_needs_piecewise(point: Point):
    # closed-form densities exist for piecewise constant inputs only
    if point.mode is DensityMode.ANALYTIC:
        _piecewise_only(point)
    _segments_fit(point)


def _has_prior_q(point: Point):
    if point.config['prior_q'] is None:
        raise IdentityError("a mismatched law needs prior_q")


def _needs_prior_q(point: Point):
    _has_prior_q(point)
    _piecewise_only(point)


def _segment_info(point: Point):
    process = _process(point)
    segments = process.segments
    return process.prior, segments, point.horizon / segments


def _cmmse(point: Point) -> float:
    """Integrated causal error over [0, horizon]"""
    process = _process(point)
    if isinstance(process, OrnsteinUhlenbeck):
        return riccati_oracle(process, point.horizon).integrated_variance
    prior, segments, duration = _segment_info(point)
    return segments * 2.0 * mutual_information(prior, duration)


def _mismatch_variance(point: Point) -> float:
    prior, segments, duration = _segment_info(point)
    return segments * 2.0 * output_kl(prior, point.config.prior('prior_q'), duration)


# per-path runners

def _scalar_z_path(point: Point, seed: RngSeed) -> IdentityReport:
    prior = point.config.prior()
    x = sample(prior, seed)
    grid = make_uniform_grid(0.0, point.snr, point.snr_steps)
    return scalar_Z(simulate_bm_coupling(x, grid, seed), prior, point.mode)


def _scalar_z_mismatch_path(point: Point, seed: RngSeed) -> IdentityReport:
    prior = point.config.prior()
    x = sample(prior, seed)
    grid = make_uniform_grid(0.0, point.snr, point.snr_steps)
    return scalar_Z_mismatch(simulate_bm_coupling(x, grid, seed), prior, point.config.prior('prior_q'),
                             point.mode)


def _cross_coupling_path(point: Point, seed: RngSeed) -> IdentityReport:
    prior = point.config.prior()
    w = sample_brownian(make_uniform_grid(0.0, point.snr, point.snr_steps), seed)
    return cross_coupling_check(sample(prior, seed), w, prior)


def _channel(point: Point, seed: RngSeed):
    process = _process(point)
    grid = _time_grid(point)
    x = process.sample_path(grid, seed)
    w = sample_brownian(grid, seed)
    return process, x, w, simulate_channel(x, w)


def _duncan_path(point: Point, seed: RngSeed) -> IdentityReport:
    process, x, w, y = _channel(point, seed)
    return duncan_D(x, y, _causal_filter(process, y, point, seed), w, point.mode,
                    endpoint=point.config['endpoint'], seed=seed)


def _duncan_limit_path(point: Point, seed: RngSeed) -> IdentityReport:
    report = _duncan_path(point, seed)
    t = point.horizon
    return IdentityReport('duncan_limit', report.left_value / t, report.right_value / t, report.mode, seed)


def _mismatch_path(point: Point, seed: RngSeed) -> IdentityReport:
    process, x, w, y = _channel(point, seed)
    prior_q = point.config.prior('prior_q')
    filter_p = causal_filter_piecewise(process.prior, y, process.segments)
    filter_q = causal_filter_piecewise(prior_q, y, process.segments)
    return mismatch_M(x, y, filter_p, filter_q, w, point.mode, seed)


def _phi(point: Point):
    spec = point.config['phi']
    return phi_from_dict(spec if spec is not None else 'identity')


def _feedback_channel(point: Point, seed: RngSeed):
    process = _process(point)
    grid = _time_grid(point)
    phi = _phi(point)
    x = process.sample_path(grid, seed)
    w = sample_brownian(grid, seed)
    y = simulate_feedback_channel(phi, x, w)
    return process, phi, x, w, y


def _feedback_d_path(point: Point, seed: RngSeed) -> IdentityReport:
    process, phi, x, w, y = _feedback_channel(point, seed)
    filter_output = _causal_filter(process, phi.filter_observation(y), point, seed)
    return feedback_D_phi(phi, x, y, w, filter_output, point.mode, seed)


def _feedback_m_path(point: Point, seed: RngSeed) -> IdentityReport:
    process, phi, x, w, y = _feedback_channel(point, seed)
    observed = phi.filter_observation(y)
    filter_p = causal_filter_piecewise(process.prior, observed, process.segments)
    filter_q = causal_filter_piecewise(point.config.prior('prior_q'), observed, process.segments)
    return feedback_M_phi(phi, x, y, w, filter_p, filter_q, point.mode, seed)


def _sheet(point: Point, seed: RngSeed):
    process = _process(point)
    spec = SheetSpec(_time_grid(point), make_uniform_grid(0.0, point.snr, point.snr_steps))
    x = process.sample_path(spec.time_grid, seed)
    return process, x, sample_sheet(spec, seed)


def _sheet_path(point: Point, seed: RngSeed) -> IdentityReport:
    process, x, sheet = _sheet(point, seed)
    return sheet_N(process, x, sheet, point.mode, seed)


def _causal_noncausal_path(point: Point, seed: RngSeed) -> IdentityReport:
    process, x, sheet = _sheet(point, seed)
    return causal_vs_noncausal(process, x, sheet, point.mode, seed)


def _anticausal_path(point: Point, seed: RngSeed) -> IdentityReport:
    process, x, w, y = _channel(point, seed)
    filter_output = causal_filter_piecewise(process.prior, y, process.segments)
    return causal_anticausal_J(x, y, w, filter_output, point.mode, seed)


def _coupling_batch(point: Point, n_paths: int, master_seed: int):
    return coupling_Z_samples(point.coupling, point.config.prior(), point.snr, n_paths, master_seed,
                              point.snr_steps, point.blocks, point.mode)


def _finite_blocks(point: Point) -> bool:
    return point.coupling is CouplingKind.INDEPENDENT_GAUSSIANS and point.blocks is not None


def _coupling_mean(point: Point) -> Optional[float]:
    # the block Riemann sum is biased at finite block counts
    return None if _finite_blocks(point) else 0.0


def _coupling_variance(point: Point) -> Optional[float]:
    if _finite_blocks(point):
        return None
    return coupling_variance_target(point.coupling, point.config.prior(), point.snr)


def _sheet_variance(point: Point) -> float:
    prior, segments, duration = _segment_info(point)
    return segments * 2.0 * mutual_information(prior, point.snr * duration)


CATALOGUE: Dict[str, IdentitySpec] = {spec.name: spec for spec in [
    IdentitySpec(
        'scalar_Z', 'Tracking error of the Brownian-motion snr coupling', 'prior, snr, snr_steps',
        path_op=_scalar_z_path,
        variance_target=lambda p: 2.0 * mutual_information(p.config.prior(), p.snr)),
    IdentitySpec(
        'scalar_Z_mismatch', 'Mismatched tracking error of the Brownian-motion coupling',
        'prior, prior_q, snr, snr_steps',
        path_op=_scalar_z_mismatch_path,
        variance_target=lambda p: 2.0 * output_kl(p.config.prior(), p.config.prior('prior_q'), p.snr),
        check=_has_prior_q),
    IdentitySpec(
        'coupling_Z', 'Tracking error under the bm, additive or independent coupling',
        'prior, coupling, snr, blocks, snr_steps',
        batch_op=_coupling_batch, variance_target=_coupling_variance, mean_target=_coupling_mean,
        closes_algebraically=False),
    IdentitySpec(
        'cross_coupling', 'Additive-coupling error rebuilt from a Brownian path', 'prior, snr, snr_steps',
        path_op=_cross_coupling_path,
        variance_target=lambda p: coupling_variance_target('additive', p.config.prior(), p.snr),
        closes_algebraically=False),
    IdentitySpec(
        'duncan_D', 'Pointwise Duncan tracking error', 'process, horizon, n_steps, n_particles, endpoint',
        path_op=_duncan_path, variance_target=_cmmse, check=_analytic_needs_piecewise),
    IdentitySpec(
        'duncan_limit', 'Duncan tracking error divided by the horizon', 'process, horizon, n_steps',
        path_op=_duncan_limit_path,
        variance_target=lambda p: _cmmse(p) / p.horizon ** 2, check=_analytic_needs_piecewise),
    IdentitySpec(
        'mismatch_M', 'Pointwise mismatched tracking error', 'process, prior_q, horizon, n_steps',
        path_op=_mismatch_path, variance_target=_mismatch_variance, check=_needs_prior_q),
    IdentitySpec(
        'feedback_D_phi', 'Tracking error of a channel with feedback', 'process, phi, horizon, n_steps',
        path_op=_feedback_d_path, variance_target=_cmmse, check=_analytic_needs_piecewise),
    IdentitySpec(
        'feedback_M_phi', 'Mismatched tracking error with feedback', 'process, phi, prior_q, horizon, n_steps',
        path_op=_feedback_m_path, variance_target=_mismatch_variance, check=_needs_prior_q),
    IdentitySpec(
        'sheet_N', 'I-MMSE tracking error over a Brownian sheet', 'process, horizon, snr, n_steps, snr_steps',
        path_op=_sheet_path, variance_target=_sheet_variance, check=_piecewise_only),
    IdentitySpec(
        'causal_anticausal_J', 'Causal minus anti-causal squared error', 'process, horizon, n_steps',
        path_op=_anticausal_path, check=_piecewise_only),
    IdentitySpec(
        'causal_vs_noncausal', 'Filtering error against snr-averaged smoothing error',
        'process, horizon, snr, n_steps, snr_steps',
        path_op=_causal_noncausal_path, check=_piecewise_only),
]}


def get_identity(name: str) -> IdentitySpec:
    try:
        return CATALOGUE[name]
    except KeyError:
        raise ConfigError(f"unknown identity {name!r}; choose from {', '.join(sorted(CATALOGUE))}") from None


def list_identities() -> List[IdentitySpec]:
    return [CATALOGUE[name] for name in sorted(CATALOGUE)]


def is_constant_gaussian(point: Point) -> bool:
    """Standard Gaussian input, where the coupling errors have closed forms"""
    return point.config.prior() == Gaussian(0.0, 1.0)


def closed_form_draws(point: Point, n: int, master_seed: int) -> np.ndarray:
    """Direct closed-form Z draws for the additive or independent coupling"""
    base = RngSeed(master_seed, 1)
    x = base.generator(Stream.SIGNAL).standard_normal(n)
    noise = base.generator(Stream.NOISE).standard_normal(n)
    return np.asarray(closed_form_Z(point.coupling, x, noise, point.snr))

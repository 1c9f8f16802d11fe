"""
Causal and non-causal conditional mean estimators for dY = level * X dt + dW
"""

import math
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional

import numpy as np
from scipy.integrate import solve_ivp

from core.errors import FilterError, GridError, WeightCollapseError
from core.paths import RngSeed, SamplePath, Stream
from core.priors import (ConstantX, OrnsteinUhlenbeck, PiecewiseConstantIID, ProcessPrior,
                         ScalarPrior, piecewise_values, segment_length)
from utils.logger import get_logger

logger = get_logger('filters')

ESS_THRESHOLD = 0.5


@dataclass(frozen=True)
class EnsembleSummary:
    """Diagnostics of a particle run"""
    n_particles: int
    resample_count: int
    min_ess: float


@dataclass(frozen=True, eq=False)
class FilterOutput:
    """
    Causal estimate X^_t = E[X_t | Y_0^t]

    variance_path holds the Riccati solution of the Kalman-Bucy filter,
    ensemble the particle diagnostics, process the law the filter assumed.
    """
    estimate_path: SamplePath
    variance_path: Optional[SamplePath] = None
    ensemble: Optional[EnsembleSummary] = None
    process: Optional[ProcessPrior] = None


@dataclass(frozen=True, eq=False)
class SmootherOutput:
    """Non-causal estimate E[X_t | Y_0^T]"""
    estimate_path: SamplePath
    segment_estimates: np.ndarray


def _check_origin(y: SamplePath):
    if y.grid.t0 != 0.0:
        raise GridError(f"observations must start at time 0, got {y.grid.t0}")


def _as_process(prior: ScalarPrior, segments: int) -> ProcessPrior:
    return ConstantX(prior) if segments == 1 else PiecewiseConstantIID(prior, segments)


def causal_filter_piecewise(prior: ScalarPrior, y: SamplePath, segments: int = 1,
                            level: float = 1.0) -> FilterOutput:
    """
    Exact filter for a process that is i.i.d. constant on equal segments

    Within segment i the increment of Y since the segment start is a
    Gaussian observation of X_i with natural parameters (h, lam) =
    (Y_t - Y_{t_i}, level*(t - t_i)). At a segment start the estimate is the
    prior mean.

    Args:
        prior: Law of each segment value
        y: Observations on a grid starting at 0
        segments: Number of equal segments (1 for a constant input)
        level: Drift multiplier of the channel

    Returns:
        FilterOutput
    """
    _check_origin(y)
    length = segment_length(y.grid, segments)
    k = np.arange(y.grid.n_steps + 1)
    start = np.minimum(k // length, segments - 1) * length
    h = y.values - y.values[start]
    lam = level * (k - start) * y.grid.step
    estimate = np.asarray(prior.tilted_mean(h, lam), dtype=float)
    return FilterOutput(SamplePath(y.grid, estimate), process=_as_process(prior, segments))


def causal_filter_constant_x(prior: ScalarPrior, y: SamplePath) -> FilterOutput:
    """X^_t = E[X | Y_t] with the time-t observation (s, v) = (t, t)"""
    return causal_filter_piecewise(prior, y, 1)


def kalman_bucy(ou: OrnsteinUhlenbeck, y: SamplePath) -> FilterOutput:
    """
    Kalman-Bucy filter for an Ornstein-Uhlenbeck input

    Mean and Riccati variance advance with the same left-endpoint step:
        X^_{k+1} = X^_k - a X^_k dt + P_k (dY_k - X^_k dt)
        P_{k+1}  = P_k + (-2a P_k + b^2 - P_k^2) dt
    """
    if not isinstance(ou, OrnsteinUhlenbeck):
        raise FilterError(f"Kalman-Bucy needs an Ornstein-Uhlenbeck prior, got {type(ou).__name__}")
    _check_origin(y)
    a, b2 = ou.mean_reversion, ou.diffusion ** 2
    dt = y.grid.step
    dy = y.increments
    n = y.grid.n_steps
    mean = np.empty(n + 1)
    var = np.empty(n + 1)
    mean[0] = ou.initial.mean
    var[0] = ou.initial.variance
    for k in range(n):
        m, p = mean[k], var[k]
        mean[k + 1] = m - a * m * dt + p * (dy[k] - m * dt)
        var[k + 1] = p + (-2 * a * p + b2 - p * p) * dt
    return FilterOutput(SamplePath(y.grid, mean), variance_path=SamplePath(y.grid, var), process=ou)


class RiccatiSolution(NamedTuple):
    final_variance: float
    integrated_variance: float


def riccati_oracle(ou: OrnsteinUhlenbeck, horizon: float, rtol: float = 1e-12) -> RiccatiSolution:
    """
    High accuracy solution of dP/dt = -2aP + b^2 - P^2 and its integral over [0, horizon]

    Independent of the filter's own discretization; the integral equals the
    causal mmse over the horizon.
    """
    a, b2 = ou.mean_reversion, ou.diffusion ** 2

    def rhs(_, state):
        p = state[0]
        return [-2 * a * p + b2 - p * p, p]

    sol = solve_ivp(rhs, (0.0, horizon), [ou.initial.variance, 0.0],
                    method='DOP853', rtol=rtol, atol=1e-14)
    if not sol.success:
        raise FilterError(f"Riccati solve failed: {sol.message}")
    return RiccatiSolution(float(sol.y[0, -1]), float(sol.y[1, -1]))


def _systematic_indices(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = len(weights)
    positions = (rng.random() + np.arange(n)) / n
    return np.minimum(np.searchsorted(np.cumsum(weights), positions), n - 1)


def _stratified(prior: ScalarPrior, n: int, rng: np.random.Generator) -> np.ndarray:
    u = np.clip((np.arange(n) + rng.random(n)) / n, np.finfo(float).tiny, 1.0 - np.finfo(float).epsneg)
    return np.asarray(prior.quantile(u), dtype=float)


def particle_filter(process: ProcessPrior, y: SamplePath, n_particles: int, seed: RngSeed,
                    level: float = 1.0) -> FilterOutput:
    """
    Bootstrap particle filter

    Particles start from a stratified draw of the initial law, are weighted by
    the Gaussian likelihood of each observation increment and resampled
    systematically when the effective sample size drops below half the
    ensemble. Piecewise inputs redraw all particles at segment boundaries;
    OU inputs move by the exact transition.

    Args:
        process: Input law
        y: Observations on a grid starting at 0
        n_particles: Ensemble size (>= 2)
        seed: Seed of the particle sub-stream
        level: Drift multiplier of the channel

    Raises:
        WeightCollapseError: if every weight underflows
    """
    if n_particles < 2:
        raise FilterError(f"particle filter needs at least 2 particles, got {n_particles}")
    _check_origin(y)
    rng = seed.generator(Stream.PARTICLES)
    grid = y.grid
    dt = grid.step
    dy = y.increments
    n = grid.n_steps

    if isinstance(process, OrnsteinUhlenbeck):
        initial = process.initial
        decay = math.exp(-process.mean_reversion * dt)
        spread = math.sqrt(process.diffusion ** 2 * -math.expm1(-2 * process.mean_reversion * dt)
                           / (2 * process.mean_reversion))
        boundary = None
    elif isinstance(process, (ConstantX, PiecewiseConstantIID)):
        initial = process.prior
        boundary = segment_length(grid, process.segments)
    else:
        raise FilterError(f"no particle dynamics for {type(process).__name__}")

    particles = _stratified(initial, n_particles, rng)
    log_w = np.zeros(n_particles)
    estimate = np.empty(n + 1)
    resamples = 0
    min_ess = float(n_particles)

    for k in range(n + 1):
        w = np.exp(log_w - log_w.max())
        w /= w.sum()
        estimate[k] = np.dot(w, particles)
        if k == n:
            break

        log_w += particles * dy[k] - 0.5 * level * particles ** 2 * dt
        peak = log_w.max()
        if not np.isfinite(peak):
            raise WeightCollapseError(f"particle weights collapsed at step {k}")
        w = np.exp(log_w - peak)
        w /= w.sum()
        ess = 1.0 / np.dot(w, w)
        min_ess = min(min_ess, ess)
        if ess < ESS_THRESHOLD * n_particles:
            particles = particles[_systematic_indices(w, rng)]
            log_w = np.zeros(n_particles)
            resamples += 1

        if boundary is None:
            particles = decay * particles + spread * rng.standard_normal(n_particles)
        elif (k + 1) % boundary == 0 and k + 1 < n:
            # new segment value, independent of the past
            particles = _stratified(initial, n_particles, rng)
            log_w = np.zeros(n_particles)

    logger.debug(f"particle filter: {resamples} resamples, min ESS {min_ess:.1f}")
    return FilterOutput(SamplePath(grid, estimate),
                        ensemble=EnsembleSummary(n_particles, resamples, min_ess),
                        process=process)


def smoother_piecewise(prior: ScalarPrior, segments: int, y: SamplePath,
                       level: float = 1.0) -> SmootherOutput:
    """
    E[X_t | Y_0^T] for a process i.i.d. constant on equal segments

    Each segment is estimated from its own increment of Y, which is
    sufficient for it; the other segments carry no information.
    """
    _check_origin(y)
    length = segment_length(y.grid, segments)
    bounds = y.values[::length]
    h = np.diff(bounds)
    lam = level * length * y.grid.step
    estimates = np.asarray(prior.tilted_mean(h, np.full_like(h, lam)), dtype=float)
    return SmootherOutput(SamplePath(y.grid, piecewise_values(estimates, y.grid)), estimates)


def segment_smoother_paths(prior: ScalarPrior, segment_paths: List[SamplePath],
                           segment_duration: float) -> np.ndarray:
    """
    Smoother of each segment at every snr level of a sheet

    Args:
        prior: Law of each segment value
        segment_paths: Y^[i]_gamma = gamma*L*X_i + W^[i]_gamma over the snr grid
        segment_duration: Segment length L in time

    Returns:
        Array (segments, snr nodes) of E[X_i | Y^[i]_gamma]
    """
    values = np.stack([p.values for p in segment_paths])
    gammas = segment_paths[0].grid.points
    return np.asarray(prior.tilted_mean(values, segment_duration * gammas[None, :]), dtype=float)


def mismatched_filter(filter_op: Callable[..., FilterOutput], prior_q, y: SamplePath,
                      **kwargs) -> FilterOutput:
    """Run a filter under the assumed law Q on data generated under P"""
    return filter_op(prior_q, y, **kwargs)


def innovations(y: SamplePath, filter_output: FilterOutput, level: float = 1.0) -> SamplePath:
    """Y_t - level * int_0^t X^_s ds"""
    xhat = filter_output.estimate_path
    drift = np.concatenate(([0.0], np.cumsum(level * xhat.left * y.grid.step)))
    return SamplePath(y.grid, y.values - drift)

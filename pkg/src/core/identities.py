"""
Pointwise information-estimation identities

Every tracking error is built twice: the left side from information
densities and squared-error integrals, the right side from stochastic
integrals against the channel noise. In Algebraic mode both sides come from
the same left-endpoint sums and agree to rounding; in Analytic mode the
density is a closed form and the gap measures discretization error.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss

from core.channels import PhiSpec, segment_values, simulate_channel, time_reverse
from core.couplings import CouplingKind, CouplingSample, coupling_estimate_path
from core.densities import (DensityMode, exact_information_density, exact_mismatch_log_rn,
                            exact_process_information_density, exact_process_mismatch_log_rn,
                            information_density, mismatch_log_rn)
from core.errors import IdentityError, PriorError
from core.filters import FilterOutput, causal_filter_piecewise, segment_smoother_paths
from core.paths import (BrownianSheetGrid, RngSeed, SamplePath, anticipating_integral, ito_integral,
                        lebesgue_integral, make_uniform_grid, shared_grid)
from core.priors import ConstantX, Gaussian, PiecewiseConstantIID, ProcessPrior, ScalarPrior

ALGEBRAIC_TOLERANCE = 1e-9
LEGENDRE_NODES = 64
HERMITE_NODES = 96


@dataclass(frozen=True)
class IdentityReport:
    """
    Both sides of one identity on one path

    right_value is the stochastic-integral side alone. correction is the
    discrete reconciliation term of identities that compare two differently
    discretized information densities; it vanishes in the continuum and the
    gap is left - (right + correction).
    """
    identity_name: str
    left_value: float
    right_value: float
    mode: DensityMode = DensityMode.ALGEBRAIC
    seed: Optional[RngSeed] = None
    correction: float = 0.0
    x_value: Optional[float] = None
    pathwise_gap: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, 'left_value', float(self.left_value))
        object.__setattr__(self, 'right_value', float(self.right_value))
        object.__setattr__(self, 'correction', float(self.correction))
        object.__setattr__(self, 'pathwise_gap', self.left_value - (self.right_value + self.correction))

    @property
    def gap_bound(self) -> float:
        return ALGEBRAIC_TOLERANCE * (1.0 + abs(self.left_value))

    def closes(self) -> bool:
        """Whether the gap is within rounding; only meaningful in Algebraic mode"""
        return abs(self.pathwise_gap) <= self.gap_bound

    def to_row(self) -> dict:
        return {
            'identity': self.identity_name,
            'seed': '' if self.seed is None else f"{self.seed.master_seed}:{self.seed.stream_index}",
            'left': repr(self.left_value),
            'right': repr(self.right_value),
            'correction': repr(self.correction),
            'gap': repr(self.pathwise_gap),
            'mode': self.mode.value,
        }


def _sq(path: SamplePath) -> SamplePath:
    return path.map(np.square)


def _diff(a: SamplePath, b: SamplePath) -> SamplePath:
    return SamplePath(shared_grid(a, b), a.values - b.values)


def _constant(grid, value) -> SamplePath:
    return SamplePath(grid, np.full(grid.n_steps + 1, float(value)))


def _stochastic_integral(integrand: SamplePath, noise: SamplePath, endpoint: str) -> float:
    if endpoint == 'left':
        return ito_integral(integrand, noise)
    if endpoint == 'right':
        return anticipating_integral(integrand, noise)
    raise IdentityError(f"endpoint must be 'left' or 'right', got {endpoint!r}")


def _tracking_report(name, signal: SamplePath, estimate: SamplePath, y_path: SamplePath,
                     noise: SamplePath, mode: DensityMode, analytic_density=None, level: float = 1.0,
                     endpoint: str = 'left', seed=None, x_value=None) -> IdentityReport:
    # i - level/2 int (signal - estimate)^2  vs  int (signal - estimate) dW
    mode = DensityMode.parse(mode)
    if mode is DensityMode.ANALYTIC:
        if analytic_density is None:
            raise IdentityError(f"{name}: no closed-form density for this input")
        density = float(analytic_density())
    else:
        density = float(information_density(signal, y_path, FilterOutput(estimate), level))
    error = _diff(signal, estimate)
    left = density - 0.5 * level * lebesgue_integral(_sq(error))
    right = _stochastic_integral(error, noise, endpoint)
    return IdentityReport(name, left, right, mode, seed, x_value=x_value)


def _mismatch_report(name, signal: SamplePath, est_p: SamplePath, est_q: SamplePath, y_path: SamplePath,
                     noise: SamplePath, mode: DensityMode, analytic_log_rn=None, seed=None,
                     x_value=None) -> IdentityReport:
    # log dP/dQ - 1/2 int [(est_q - X)^2 - (est_p - X)^2]  vs  int (est_p - est_q) dW
    mode = DensityMode.parse(mode)
    if not (np.all(np.isfinite(est_p.values)) and np.all(np.isfinite(est_q.values))):
        raise IdentityError(f"{name}: estimate under Q is not finite, Q does not cover the data")
    if mode is DensityMode.ANALYTIC:
        if analytic_log_rn is None:
            raise IdentityError(f"{name}: no closed-form density for this input")
        log_rn = float(analytic_log_rn())
    else:
        log_rn = float(mismatch_log_rn(est_p, est_q, y_path))
    excess = lebesgue_integral(_sq(_diff(est_q, signal))) - lebesgue_integral(_sq(_diff(est_p, signal)))
    left = log_rn - 0.5 * excess
    right = ito_integral(_diff(est_p, est_q), noise)
    return IdentityReport(name, left, right, mode, seed, x_value=x_value)


def _require(sample: CouplingSample, kind: CouplingKind):
    if sample.kind is not kind:
        raise IdentityError(f"expected a {kind.value} coupling sample, got {sample.kind.value}")


# scalar channel over snr

def scalar_Z(sample: CouplingSample, prior: ScalarPrior,
             mode: DensityMode = DensityMode.ALGEBRAIC) -> IdentityReport:
    """
    Tracking error Z of the Brownian-motion coupling

    left  = i(X; Y_snr) - 1/2 int_0^snr (X - X^_gamma)^2 dgamma
    right = int_0^snr (X - X^_gamma) dW_gamma
    """
    _require(sample, CouplingKind.BROWNIAN_MOTION)
    grid = sample.y.grid
    estimate = coupling_estimate_path(prior, sample)
    snr, y_end = grid.t1, sample.y.values[-1]
    return _tracking_report(
        'scalar_Z', _constant(grid, sample.x), estimate, sample.y, sample.noise, mode,
        analytic_density=lambda: exact_information_density(prior, sample.x, y_end, snr),
        seed=sample.seed, x_value=sample.x)


def scalar_Z_mismatch(sample: CouplingSample, prior_p: ScalarPrior, prior_q: ScalarPrior,
                      mode: DensityMode = DensityMode.ALGEBRAIC) -> IdentityReport:
    """Mismatched tracking error Z_M of the Brownian-motion coupling"""
    _require(sample, CouplingKind.BROWNIAN_MOTION)
    grid = sample.y.grid
    snr, y_end = grid.t1, sample.y.values[-1]
    return _mismatch_report(
        'scalar_Z_mismatch', _constant(grid, sample.x),
        coupling_estimate_path(prior_p, sample), coupling_estimate_path(prior_q, sample),
        sample.y, sample.noise, mode,
        analytic_log_rn=lambda: exact_mismatch_log_rn(prior_p, prior_q, y_end, snr),
        seed=sample.seed, x_value=sample.x)


def bm_coupling_Z(prior: ScalarPrior, x, dw, snr: float, mode: DensityMode = DensityMode.ALGEBRAIC) -> np.ndarray:
    """
    Left side of scalar_Z for many Brownian-motion coupling paths at once

    Args:
        prior: Law of X
        x: Inputs, shape (paths,)
        dw: Increments of W over the uniform grid [0, snr], shape (paths, steps)
        snr: Top of the snr grid
        mode: Algebraic sums or closed-form density

    Returns:
        Z per path, the same sums scalar_Z takes on one path
    """
    _check_snr(snr)
    mode = DensityMode.parse(mode)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dw = np.atleast_2d(np.asarray(dw, dtype=float))
    if dw.shape[0] != x.size:
        raise IdentityError(f"{x.size} inputs but {dw.shape[0]} noise rows")
    grid = make_uniform_grid(0.0, snr, dw.shape[1])
    step = grid.step
    xs = x[:, None]
    w = np.concatenate((np.zeros((x.size, 1)), np.cumsum(dw, axis=1)), axis=1)
    y = grid.points * xs + w
    estimate = prior.tilted_mean(y[:, :-1], grid.points[:-1])
    squared_error = np.sum(np.square(xs - estimate), axis=1) * step
    if mode is DensityMode.ANALYTIC:
        density = exact_information_density(prior, x, y[:, -1], snr)
    else:
        dy = np.diff(y, axis=1)
        conditional = x * np.sum(dy, axis=1) - 0.5 * x * x * (step * grid.n_steps)
        marginal = np.sum(estimate * dy, axis=1) - 0.5 * np.sum(np.square(estimate), axis=1) * step
        density = conditional - marginal
    z = density - 0.5 * squared_error
    if not np.all(np.isfinite(z)):
        raise IdentityError("tracking error is not finite")
    return z


def _legendre(snr: float, nodes: int):
    t, w = leggauss(nodes)
    root = math.sqrt(snr)
    return 0.5 * root * (t + 1.0), 0.5 * root * w


def _scalar_density(prior: ScalarPrior, x, n, snr):
    # information density of y = sqrt(snr)*x + n
    root = math.sqrt(snr)
    y = root * x + n
    return exact_information_density(prior, x, root * y, snr)


def _check_snr(snr):
    if not snr > 0:
        raise IdentityError(f"snr must be positive, got {snr}")


def additive_coupling_Z(prior: ScalarPrior, x, n, snr: float, nodes: int = LEGENDRE_NODES):
    """
    Z = I_1 - I_2 for the additive standard Gaussian coupling

    I_2 = 1/2 int_0^snr (x - E[X | sqrt(g)*x + n])^2 dg is integrated by
    Gauss-Legendre in u = sqrt(g), where the integrand is smooth. Vectorized
    over x and n.
    """
    _check_snr(snr)
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)
    u, w = _legendre(snr, nodes)
    xs, ns = x[..., None], n[..., None]
    y = u * xs + ns
    m1 = prior.tilted_mean(u * y, u * u)
    i2 = np.sum(w * u * np.square(xs - m1), axis=-1)
    return _scalar_density(prior, x, n, snr) - i2


def integrated_ztilde(prior: ScalarPrior, x, n, snr: float, nodes: int = LEGENDRE_NODES):
    """int_0^snr Z~_gamma dgamma along the additive coupling, same quadrature as additive_coupling_Z"""
    _check_snr(snr)
    x = np.asarray(x, dtype=float)
    n = np.asarray(n, dtype=float)
    u, w = _legendre(snr, nodes)
    xs, ns = x[..., None], n[..., None]
    y = u * xs + ns
    m1, m2 = prior.tilted_moments(u * y, u * u)
    # 2u Z~ = u {E[X^2|Y] - x E[X|Y] - (x - E[X|Y])^2} + Y (x - E[X|Y])
    integrand = u * (m2 - xs * m1 - np.square(xs - m1)) + y * (xs - m1)
    return np.sum(w * integrand, axis=-1)


def ztilde_gamma(prior: ScalarPrior, sample: CouplingSample, gamma: float) -> float:
    """
    Z~_gamma = 1/2 {E[X^2|Y] - X E[X|Y] - (X - E[X|Y])^2 + (Y/sqrt(gamma)) (X - E[X|Y])}

    Args:
        prior: Law of X
        sample: Additive standard Gaussian coupling sample
        gamma: A positive node of the sample's snr grid
    """
    _require(sample, CouplingKind.ADDITIVE_GAUSSIAN)
    if not gamma > 0:
        raise IdentityError("Z~ is defined for gamma > 0 only")
    k = sample.y.grid.index_of(gamma)
    gamma = float(sample.y.grid.points[k])
    y = float(sample.y.values[k])
    root = math.sqrt(gamma)
    m1, m2 = prior.tilted_moments(root * y, gamma)
    x = sample.x
    return float(0.5 * (m2 - x * m1 - (x - m1) ** 2 + (y / root) * (x - m1)))


def independent_block_Z(prior: ScalarPrior, sample: CouplingSample) -> float:
    """
    Z_M = I_1 - 1/2 sum_i (X - E[X | Y_{gamma_i}])^2 * snr/M

    Riemann sum at the block right endpoints gamma_i = i*snr/M.
    """
    _require(sample, CouplingKind.INDEPENDENT_GAUSSIANS)
    grid = sample.y.grid
    gammas = grid.points[1:]
    y = sample.y.values[1:]
    m1 = prior.tilted_mean(np.sqrt(gammas) * y, gammas)
    i2 = 0.5 * float(np.sum(np.square(sample.x - m1))) * grid.step
    i1 = exact_information_density(prior, sample.x, math.sqrt(grid.t1) * y[-1], grid.t1)
    return float(i1) - i2


def independent_limit_Z(prior: ScalarPrior, x, n, snr: float, nodes: int = HERMITE_NODES):
    """
    Mean-square limit of Z_M as the block count grows

    The Riemann sum averages over independent block noises, so the limit is
    I_1(x, n) - E_N'[I_1(x, N')], the inner expectation by Gauss-Hermite.
    """
    _check_snr(snr)
    x = np.asarray(x, dtype=float)
    z, g = hermegauss(nodes)
    g = g / math.sqrt(2 * math.pi)
    averaged = np.sum(g * _scalar_density(prior, x[..., None], z, snr), axis=-1)
    return _scalar_density(prior, x, np.asarray(n, dtype=float), snr) - averaged


def closed_form_Z(coupling_kind, x, noise, snr: float, prior: Optional[ScalarPrior] = None):
    """
    Closed-form Z for a standard Gaussian input

    additive:    1/2 [log(1+snr) - N^2 log(1+snr) + 2XN atan(sqrt(snr))]
    independent: (-N^2 snr + 2XN sqrt(snr) + snr) / (2(1+snr))
    """
    if prior is not None and prior != Gaussian(0.0, 1.0):
        raise IdentityError("closed-form Z holds for a standard Gaussian input only")
    _check_snr(snr)
    kind = CouplingKind.parse(coupling_kind)
    x = np.asarray(x, dtype=float)
    n = np.asarray(noise, dtype=float)
    root = math.sqrt(snr)
    if kind is CouplingKind.ADDITIVE_GAUSSIAN:
        log_term = math.log1p(snr)
        return 0.5 * (log_term - n * n * log_term + 2 * x * n * math.atan(root))
    if kind is CouplingKind.INDEPENDENT_GAUSSIANS:
        return (-n * n * snr + 2 * x * n * root + snr) / (2 * (1 + snr))
    raise IdentityError("no closed-form Z for the Brownian-motion coupling")


def cross_coupling_check(x: float, w_path: SamplePath, prior: ScalarPrior) -> IdentityReport:
    """
    Coupling B error rebuilt from the Brownian-motion coupling on one W

    Both channels are driven by w_path: Y~_g = g*x + W_g and
    Y_g = sqrt(g)*x + N with N = W_snr/sqrt(snr), so Y~_snr = sqrt(snr)*Y_snr.
    left is Z of coupling B, right is
        int (x - E[X|Y~]) dW + 1/2 int (x - E[X|Y~])^2 - 1/2 int (x - E[X|Y])^2
    on the grid. Always Analytic.
    """
    grid = w_path.grid
    if grid.t0 != 0.0:
        raise IdentityError("the Brownian path must start at snr 0")
    snr = grid.t1
    gammas = grid.points
    n = float(w_path.values[-1] / math.sqrt(snr))
    left = float(additive_coupling_Z(prior, x, n, snr))
    bm_y = gammas * x + w_path.values
    bm_error = SamplePath(grid, x - prior.tilted_mean(bm_y, gammas))
    add_y = np.sqrt(gammas) * x + n
    add_error = SamplePath(grid, x - prior.tilted_mean(np.sqrt(gammas) * add_y, gammas))
    right = (ito_integral(bm_error, w_path) + 0.5 * lebesgue_integral(_sq(bm_error))
             - 0.5 * lebesgue_integral(_sq(add_error)))
    return IdentityReport('cross_coupling', left, right, DensityMode.ANALYTIC, x_value=float(x))


# continuous time

def _process_density(filter_output: FilterOutput, x_path, y_path, level=1.0):
    process = filter_output.process
    if process is None:
        return None

    def density():
        try:
            return float(exact_process_information_density(process, x_path, y_path, level))
        except PriorError as e:
            raise IdentityError(str(e)) from e
    return density


def duncan_D(x_path: SamplePath, y_path: SamplePath, filter_output: FilterOutput, w_path: SamplePath,
             mode: DensityMode = DensityMode.ALGEBRAIC, endpoint: str = 'left',
             seed: Optional[RngSeed] = None) -> IdentityReport:
    """
    Pointwise Duncan tracking error D(T)

    left  = i(X_0^T; Y_0^T) - 1/2 int (X - X^)^2 dt
    right = int (X - X^) dW

    Args:
        x_path: Input path
        y_path: Output of dY = X dt + dW
        filter_output: Causal estimate under the true law
        w_path: Channel noise
        mode: Algebraic sums or closed-form density
        endpoint: 'right' evaluates the stochastic integral at right endpoints,
            which is not an Ito integral and breaks the identity
        seed: Path seed recorded in the report
    """
    shared_grid(x_path, y_path, w_path, filter_output.estimate_path)
    return _tracking_report('duncan_D', x_path, filter_output.estimate_path, y_path, w_path, mode,
                            analytic_density=_process_density(filter_output, x_path, y_path),
                            endpoint=endpoint, seed=seed)


def _process_log_rn(filter_p: FilterOutput, filter_q: FilterOutput, y_path):
    if filter_p.process is None or filter_q.process is None:
        return None

    def log_rn():
        try:
            return float(exact_process_mismatch_log_rn(filter_p.process, filter_q.process, y_path))
        except PriorError as e:
            raise IdentityError(str(e)) from e
    return log_rn


def mismatch_M(x_path: SamplePath, y_path: SamplePath, filter_p: FilterOutput, filter_q: FilterOutput,
               w_path: SamplePath, mode: DensityMode = DensityMode.ALGEBRAIC,
               seed: Optional[RngSeed] = None) -> IdentityReport:
    """
    Pointwise mismatched tracking error M(T)

    left  = log dP_Y/dQ_Y - 1/2 int [(pi_Q - X)^2 - (pi_P - X)^2] dt
    right = int (pi_P - pi_Q) dW
    """
    shared_grid(x_path, y_path, w_path)
    return _mismatch_report('mismatch_M', x_path, filter_p.estimate_path, filter_q.estimate_path,
                            y_path, w_path, mode, _process_log_rn(filter_p, filter_q, y_path), seed)


def feedback_D_phi(phi: PhiSpec, x_path: SamplePath, y_path: SamplePath, w_path: SamplePath,
                   filter_output: FilterOutput, mode: DensityMode = DensityMode.ALGEBRAIC,
                   seed: Optional[RngSeed] = None) -> IdentityReport:
    """
    Tracking error D_phi(T) of a channel with feedback dY = phi_t dt + dW

    filter_output must estimate X from phi.filter_observation(y_path); the
    estimate of phi_t adds back the observable part of the drift.
    """
    if not isinstance(phi, PhiSpec):
        raise IdentityError(f"unknown feedback drift: {phi!r}")
    shared_grid(x_path, y_path, w_path)
    signal = phi.signal(x_path, y_path)
    estimate = phi.estimate(filter_output.estimate_path, y_path)
    name = 'duncan_D' if signal is x_path else 'feedback_D_phi'
    return _tracking_report(
        name, signal, estimate, y_path, w_path, mode,
        analytic_density=_process_density(filter_output, x_path, phi.filter_observation(y_path)),
        seed=seed)


def feedback_M_phi(phi: PhiSpec, x_path: SamplePath, y_path: SamplePath, w_path: SamplePath,
                   filter_p: FilterOutput, filter_q: FilterOutput,
                   mode: DensityMode = DensityMode.ALGEBRAIC,
                   seed: Optional[RngSeed] = None) -> IdentityReport:
    """Mismatched tracking error M_phi(T); right = int (phi^_P - phi^_Q) dW"""
    if not isinstance(phi, PhiSpec):
        raise IdentityError(f"unknown feedback drift: {phi!r}")
    shared_grid(x_path, y_path, w_path)
    signal = phi.signal(x_path, y_path)
    est_p = phi.estimate(filter_p.estimate_path, y_path)
    est_q = phi.estimate(filter_q.estimate_path, y_path)
    name = 'mismatch_M' if signal is x_path else 'feedback_M_phi'
    return _mismatch_report(
        name, signal, est_p, est_q, y_path, w_path, mode,
        _process_log_rn(filter_p, filter_q, phi.filter_observation(y_path)), seed)


def _segments_of(process: ProcessPrior) -> int:
    if not isinstance(process, (ConstantX, PiecewiseConstantIID)):
        raise IdentityError(f"only constant or piecewise constant inputs are supported, got {type(process).__name__}")
    return process.segments


@dataclass(frozen=True)
class SheetTerms:
    """Pieces of the sheet identity at the top snr level"""
    density: float
    exact_density: float
    squared_error: float
    noise_integral: float


def _sheet_terms(process: ProcessPrior, x_path: SamplePath, sheet: BrownianSheetGrid) -> SheetTerms:
    segments = _segments_of(process)
    if x_path.grid != sheet.time_grid:
        raise IdentityError("input path and sheet use different time grids")
    xs = segment_values(x_path, segments)
    steps = sheet.time_grid.n_steps // segments
    duration = steps * sheet.time_grid.step
    snr_grid = sheet.snr_grid
    gammas = snr_grid.points
    noises = [sheet.segment_path(i * steps, (i + 1) * steps) for i in range(segments)]
    outputs = [SamplePath(snr_grid, gammas * duration * xs[i] + noises[i].values) for i in range(segments)]
    smoothed = segment_smoother_paths(process.prior, outputs, duration)

    density = squared_error = noise_integral = 0.0
    for i in range(segments):
        signal = _constant(snr_grid, xs[i])
        estimate = SamplePath(snr_grid, smoothed[i])
        error = _diff(signal, estimate)
        # the snr-direction channel dY = L*X dgamma + dW^[i], noise rate L
        density += float(information_density(signal, outputs[i], FilterOutput(estimate), duration))
        squared_error += duration * lebesgue_integral(_sq(error))
        noise_integral += ito_integral(error, noises[i])
    top = snr_grid.t1
    ends = np.array([out.values[-1] for out in outputs])
    exact = float(np.sum(exact_information_density(process.prior, xs, ends, top * duration)))
    return SheetTerms(density, exact, squared_error, noise_integral)


def sheet_N(process: ProcessPrior, x_path: SamplePath, sheet: BrownianSheetGrid,
            mode: DensityMode = DensityMode.ALGEBRAIC, seed: Optional[RngSeed] = None) -> IdentityReport:
    """
    Pointwise I-MMSE tracking error N(T) over a Brownian sheet

    At level gamma segment i is observed through Y^[i]_gamma = gamma*L*X_i + W^[i]_gamma,
    where W^[i] is the sheet increment over the segment.

    left  = i(snr) - 1/2 int_0^snr int_0^T (X_t - E[X_t | Y^(gamma)])^2 dt dgamma
    right = sum_i int_0^snr (X_i - X^_i(gamma)) dW^[i]_gamma
    """
    mode = DensityMode.parse(mode)
    terms = _sheet_terms(process, x_path, sheet)
    density = terms.exact_density if mode is DensityMode.ANALYTIC else terms.density
    return IdentityReport('sheet_N', density - 0.5 * terms.squared_error, terms.noise_integral, mode, seed)


def causal_anticausal_J(x_path: SamplePath, y_path: SamplePath, w_path: SamplePath,
                        filter_output: FilterOutput, mode: DensityMode = DensityMode.ALGEBRAIC,
                        seed: Optional[RngSeed] = None) -> IdentityReport:
    """
    Difference of the causal and anti-causal squared errors J(T)

    left  = int (X - X^)^2 dt - int (X~ - X~^)^2 dt
    right = 2 [int X^ dW - int X~^ dB]
    correction: density reconciliation, Algebraic mode only
    """
    mode = DensityMode.parse(mode)
    process = filter_output.process
    segments = _segments_of(process)
    forward = filter_output.estimate_path
    reverse = time_reverse(x_path, y_path, w_path, segments)
    backward = causal_filter_piecewise(process.prior, reverse.y, segments).estimate_path

    left = (lebesgue_integral(_sq(_diff(x_path, forward)))
            - lebesgue_integral(_sq(_diff(reverse.x, backward))))
    correction = 0.0
    if mode is DensityMode.ALGEBRAIC:
        correction = 2.0 * (float(information_density(x_path, y_path, filter_output))
                            - float(information_density(reverse.x, reverse.y, FilterOutput(backward))))
    right = 2.0 * (ito_integral(forward, w_path) - ito_integral(backward, reverse.noise))
    return IdentityReport('causal_anticausal_J', left, right, mode, seed, correction)


def causal_vs_noncausal(process: ProcessPrior, x_path: SamplePath, sheet: BrownianSheetGrid,
                        mode: DensityMode = DensityMode.ALGEBRAIC,
                        seed: Optional[RngSeed] = None) -> IdentityReport:
    """
    Filtering error at level snr against the smoothing error averaged over [0, snr]

    The filter observes the sheet slice dY = snr X dt + dW^(snr).
    left  = int (X - X^)^2 dt - (1/snr) int_0^snr int (X - smoother_gamma)^2 dt dgamma
    right = (2/snr) (N - D)
    correction: density reconciliation, Algebraic mode only
    """
    mode = DensityMode.parse(mode)
    segments = _segments_of(process)
    snr = sheet.snr_grid.t1
    noise = sheet.slice(sheet.snr_grid.n_steps)
    y_path = simulate_channel(x_path, noise, level=snr)
    filtered = causal_filter_piecewise(process.prior, y_path, segments, level=snr)
    error = _diff(x_path, filtered.estimate_path)
    causal_error = lebesgue_integral(_sq(error))
    d_right = ito_integral(error, noise)

    terms = _sheet_terms(process, x_path, sheet)
    left = causal_error - terms.squared_error / snr
    correction = 0.0
    if mode is DensityMode.ALGEBRAIC:
        time_density = float(information_density(x_path, y_path, filtered, level=snr))
        correction = 2.0 / snr * (time_density - terms.density)
    right = 2.0 / snr * (terms.noise_integral - d_right)
    return IdentityReport('causal_vs_noncausal', left, right, mode, seed, correction)

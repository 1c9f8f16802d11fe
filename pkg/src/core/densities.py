"""
Log Radon-Nikodym derivatives of channel output laws

Girsanov exponents against Wiener measure appear only in differences, so the
reference measure cancels. Algebraic values are left-endpoint sums on the
path; analytic values are closed forms in the sufficient statistics.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from core.errors import PriorError
from core.filters import FilterOutput
from core.paths import SamplePath, ito_integral, lebesgue_integral, shared_grid
from core.priors import ConstantX, PiecewiseConstantIID, ProcessPrior, ScalarPrior, segment_length


class DensityMode(str, Enum):
    ALGEBRAIC = 'algebraic'
    ANALYTIC = 'analytic'

    @classmethod
    def parse(cls, value) -> 'DensityMode':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"mode must be 'algebraic' or 'analytic', got {value!r}") from None


@dataclass(frozen=True)
class LogDensityValue:
    """A log density in nats"""
    value: float
    mode: DensityMode = DensityMode.ALGEBRAIC

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"log density is not finite: {self.value}")
        object.__setattr__(self, 'value', float(self.value))

    def __float__(self):
        return self.value

    def __sub__(self, other: 'LogDensityValue') -> 'LogDensityValue':
        return LogDensityValue(self.value - other.value, self.mode)


def _girsanov(drift: SamplePath, y_path: SamplePath, level: float) -> float:
    # int drift dY - level/2 int drift^2 dt
    return ito_integral(drift, y_path) - 0.5 * level * lebesgue_integral(drift.map(np.square))


def log_rn_conditional(x_path: SamplePath, y_path: SamplePath, level: float = 1.0) -> LogDensityValue:
    """log dP_{Y|X}/dmu = sum x dY - level/2 sum x^2 dt"""
    shared_grid(x_path, y_path)
    return LogDensityValue(_girsanov(x_path, y_path, level))


def log_rn_marginal(xhat_path: SamplePath, y_path: SamplePath, level: float = 1.0) -> LogDensityValue:
    """log dP_Y/dmu with the causal estimate in place of the input"""
    shared_grid(xhat_path, y_path)
    return LogDensityValue(_girsanov(xhat_path, y_path, level))


def information_density(x_path: SamplePath, y_path: SamplePath, filter_output: FilterOutput,
                        level: float = 1.0) -> LogDensityValue:
    """
    log dP_{Y|X}/dP_Y on one path

    Args:
        x_path: Input path
        y_path: Channel output
        filter_output: Causal estimate under the true law
        level: Drift multiplier of the channel

    Returns:
        LogDensityValue in Algebraic mode
    """
    return log_rn_conditional(x_path, y_path, level) - log_rn_marginal(
        filter_output.estimate_path, y_path, level)


def mismatch_log_rn(pi_p_path: SamplePath, pi_q_path: SamplePath, y_path: SamplePath,
                    level: float = 1.0) -> LogDensityValue:
    """log dP_Y/dQ_Y from the causal estimates under the two laws"""
    return log_rn_marginal(pi_p_path, y_path, level) - log_rn_marginal(pi_q_path, y_path, level)


def closed_form_info_density_gaussian_scalar(x: float, y: float, snr: float) -> LogDensityValue:
    """
    Information density of y = sqrt(snr)*x + N for a standard Gaussian input

    1/2 log(1+snr) + 1/2 (y^2/(1+snr) - (y - sqrt(snr)*x)^2)
    """
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr}")
    value = 0.5 * math.log1p(snr) + 0.5 * (y * y / (1 + snr) - (y - math.sqrt(snr) * x) ** 2)
    return LogDensityValue(value, DensityMode.ANALYTIC)


def exact_information_density(prior: ScalarPrior, x, h, lam):
    """
    x*h - lam*x^2/2 - log E[exp(X*h - lam*X^2/2)]

    Information density of an observation with natural parameters (h, lam);
    vectorized over the arguments.
    """
    return x * h - 0.5 * lam * np.square(x) - prior.log_partition(h, lam)


def exact_mismatch_log_rn(prior_p: ScalarPrior, prior_q: ScalarPrior, h, lam):
    """log of the ratio of output densities under P and Q"""
    return prior_p.log_partition(h, lam) - prior_q.log_partition(h, lam)


def _segment_statistics(process: ProcessPrior, y_path: SamplePath, level: float):
    if not isinstance(process, (ConstantX, PiecewiseConstantIID)):
        raise PriorError(f"no closed-form density for {type(process).__name__} inputs")
    length = segment_length(y_path.grid, process.segments)
    h = np.diff(y_path.values[::length])
    return h, level * length * y_path.grid.step


def exact_process_information_density(process: ProcessPrior, x_path: SamplePath, y_path: SamplePath,
                                      level: float = 1.0) -> LogDensityValue:
    """Closed-form information density of a piecewise constant input from its segment increments"""
    h, lam = _segment_statistics(process, y_path, level)
    length = y_path.grid.n_steps // len(h)
    xs = x_path.left[::length]
    value = np.sum(exact_information_density(process.prior, xs, h, lam))
    return LogDensityValue(float(value), DensityMode.ANALYTIC)


def exact_process_mismatch_log_rn(process_p: ProcessPrior, process_q: ProcessPrior, y_path: SamplePath,
                                  level: float = 1.0) -> LogDensityValue:
    """Closed-form log dP_Y/dQ_Y for piecewise constant inputs"""
    h, lam = _segment_statistics(process_p, y_path, level)
    h_q, _ = _segment_statistics(process_q, y_path, level)
    if len(h_q) != len(h):
        raise PriorError("laws P and Q must use the same segments")
    value = np.sum(exact_mismatch_log_rn(process_p.prior, process_q.prior, h, lam))
    return LogDensityValue(float(value), DensityMode.ANALYTIC)

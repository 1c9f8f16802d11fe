"""
Joint constructions of the scalar channel outputs over all snr levels

Each coupling produces, for one input x, outputs at every grid level whose
marginal law given X = x is the channel Y_gamma/sqrt(gamma) ~ Normal(sqrt(gamma)*x, 1).
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from core.errors import GridError, IdentityError
from core.paths import RngSeed, SamplePath, Stream, TimeGrid, make_uniform_grid, sample_brownian
from core.priors import ScalarPrior


class CouplingKind(str, Enum):
    BROWNIAN_MOTION = 'bm'
    ADDITIVE_GAUSSIAN = 'additive'
    INDEPENDENT_GAUSSIANS = 'independent'

    @classmethod
    def parse(cls, value) -> 'CouplingKind':
        if isinstance(value, cls):
            return value
        aliases = {'a': cls.BROWNIAN_MOTION, 'b': cls.ADDITIVE_GAUSSIAN, 'c': cls.INDEPENDENT_GAUSSIANS}
        key = str(value).lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise IdentityError(f"unknown coupling: {value!r}") from None


@dataclass(frozen=True, eq=False)
class CouplingSample:
    """
    One joint realization under a coupling

    noise is the Brownian path W (BM coupling), the shared N (additive) or the
    block noises N_1..N_M (independent Gaussians). y lives on the snr grid.
    """
    kind: CouplingKind
    x: float
    noise: Union[SamplePath, float, np.ndarray]
    y: SamplePath
    seed: Optional[RngSeed] = None

    @property
    def snr(self) -> float:
        return self.y.grid.t1

    @property
    def blocks(self) -> Optional[int]:
        if self.kind is CouplingKind.INDEPENDENT_GAUSSIANS:
            return len(self.noise)
        return None


def _check_snr_grid(snr_grid: TimeGrid):
    if snr_grid.t0 != 0.0:
        raise GridError(f"snr grid must start at 0, got {snr_grid.t0}")


def simulate_bm_coupling(x: float, snr_grid: TimeGrid, seed: RngSeed) -> CouplingSample:
    """Y_gamma = gamma*x + W_gamma with W a standard Brownian motion in gamma"""
    _check_snr_grid(snr_grid)
    w = sample_brownian(snr_grid, seed, Stream.NOISE)
    y = SamplePath(snr_grid, snr_grid.points * x + w.values)
    return CouplingSample(CouplingKind.BROWNIAN_MOTION, float(x), w, y, seed)


def simulate_additive_gaussian_coupling(x: float, snr_grid: TimeGrid, seed: RngSeed) -> CouplingSample:
    """Y_gamma = sqrt(gamma)*x + N with one N for every level"""
    _check_snr_grid(snr_grid)
    n = float(seed.generator(Stream.NOISE).standard_normal())
    y = SamplePath(snr_grid, np.sqrt(snr_grid.points) * x + n)
    return CouplingSample(CouplingKind.ADDITIVE_GAUSSIAN, float(x), n, y, seed)


def simulate_independent_coupling(x: float, snr: float, blocks: int, seed: RngSeed) -> CouplingSample:
    """
    Y_gamma = sqrt(gamma)*x + N_i on block i, blocks ((i-1)*snr/M, i*snr/M]

    The output lives on the M-step grid of block right endpoints; the node at
    gamma = 0 carries N_1.
    """
    if isinstance(blocks, bool) or int(blocks) != blocks or blocks < 1:
        raise GridError(f"block count must be a positive integer, got {blocks!r}")
    if not snr > 0:
        raise GridError(f"snr must be positive, got {snr}")
    grid = make_uniform_grid(0.0, snr, int(blocks))
    noise = seed.generator(Stream.NOISE).standard_normal(int(blocks))
    values = np.sqrt(grid.points) * x + np.concatenate((noise[:1], noise))
    return CouplingSample(CouplingKind.INDEPENDENT_GAUSSIANS, float(x), noise, SamplePath(grid, values), seed)


def simulate_coupling(kind, x: float, snr: float, n_steps: int, seed: RngSeed) -> CouplingSample:
    """Dispatch on the coupling kind; n_steps is the block count for independent Gaussians"""
    kind = CouplingKind.parse(kind)
    if kind is CouplingKind.INDEPENDENT_GAUSSIANS:
        return simulate_independent_coupling(x, snr, n_steps, seed)
    grid = make_uniform_grid(0.0, snr, n_steps)
    if kind is CouplingKind.BROWNIAN_MOTION:
        return simulate_bm_coupling(x, grid, seed)
    return simulate_additive_gaussian_coupling(x, grid, seed)


def natural_parameters(kind: CouplingKind, y, gamma):
    """
    (h, lam) of the observation at level gamma

    The BM coupling observes gamma*X + W_gamma, which is sufficient for the
    whole path up to gamma; the others observe sqrt(gamma)*X + noise.
    """
    gamma = np.asarray(gamma, dtype=float)
    if kind is CouplingKind.BROWNIAN_MOTION:
        return np.asarray(y, dtype=float), gamma
    return np.sqrt(gamma) * np.asarray(y, dtype=float), gamma


def coupling_estimate_path(prior: ScalarPrior, sample: CouplingSample) -> SamplePath:
    """E[X | observations up to gamma] at every level of the sample's grid"""
    h, lam = natural_parameters(sample.kind, sample.y.values, sample.y.grid.points)
    return SamplePath(sample.y.grid, prior.tilted_mean(h, lam))


def coupling_posterior_mean(kind, prior: ScalarPrior, sample: CouplingSample, gamma: float) -> float:
    """
    Posterior mean at a single level

    Args:
        kind: Coupling of the sample
        prior: Law assumed for X
        sample: Joint realization
        gamma: A node of the sample's snr grid

    Returns:
        E[X | Y up to gamma]; the prior mean at gamma = 0
    """
    kind = CouplingKind.parse(kind)
    if kind is not sample.kind:
        raise IdentityError(f"sample was drawn under {sample.kind.value}, not {kind.value}")
    k = sample.y.grid.index_of(gamma)
    level = float(sample.y.grid.points[k])
    if k == 0 or level == 0.0:
        return prior.mean
    h, lam = natural_parameters(kind, sample.y.values[k], level)
    return float(prior.tilted_mean(h, lam))


def channel_residual(sample: CouplingSample, k: int) -> float:
    """Y_gamma/sqrt(gamma) - sqrt(gamma)*x at node k, standard normal under every coupling"""
    gamma = float(sample.y.grid.points[k])
    if gamma <= 0:
        raise GridError("channel residual needs gamma > 0")
    y = sample.y.values[k]
    if sample.kind is CouplingKind.BROWNIAN_MOTION:
        y = y / math.sqrt(gamma)
    return y - math.sqrt(gamma) * sample.x

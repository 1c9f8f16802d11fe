"""
Grids, seeded path generation and discrete stochastic integration
Every sum in the library is a left-endpoint sum over a uniform grid, so the
algebra of the Girsanov identities closes exactly on the discrete level.
"""

from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property

import numpy as np

from core.errors import GridError

UINT64_MASK = (1 << 64) - 1


class Stream(IntEnum):
    """Counter offsets that keep the sub-streams of one path disjoint"""
    NOISE = 0
    SIGNAL = 1
    PARTICLES = 2
    SHEET = 3
    AUX = 4


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t0 + k*step, k = 0..n_steps, over time or snr"""
    t0: float
    t1: float
    n_steps: int

    def __post_init__(self):
        if isinstance(self.n_steps, bool) or int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise GridError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if not (np.isfinite(self.t0) and np.isfinite(self.t1)):
            raise GridError(f"grid endpoints must be finite, got [{self.t0}, {self.t1}]")
        if self.t1 <= self.t0:
            raise GridError(f"empty interval [{self.t0}, {self.t1}]")
        object.__setattr__(self, 'n_steps', int(self.n_steps))

    @property
    def step(self) -> float:
        return (self.t1 - self.t0) / self.n_steps

    @property
    def length(self) -> float:
        return self.t1 - self.t0

    @cached_property
    def points(self) -> np.ndarray:
        # affine in k, no cumulative drift
        pts = self.t0 + np.arange(self.n_steps + 1) * self.step
        pts[-1] = self.t1
        pts.setflags(write=False)
        return pts

    def index_of(self, t: float) -> int:
        """Index of the grid node equal to t (up to rounding)"""
        k = int(round((t - self.t0) / self.step))
        if k < 0 or k > self.n_steps or not np.isclose(self.points[k], t, rtol=0.0, atol=1e-9 * max(1.0, abs(t))):
            raise GridError(f"{t} is not a node of grid [{self.t0}, {self.t1}] with {self.n_steps} steps")
        return k

    def truncate(self, k: int) -> 'TimeGrid':
        """Grid covering the first k steps"""
        if k < 1 or k > self.n_steps:
            raise GridError(f"cannot truncate {self.n_steps}-step grid at {k}")
        return TimeGrid(self.t0, self.t0 + k * self.step, k)


def make_uniform_grid(t0: float, t1: float, n_steps: int) -> TimeGrid:
    """
    Build a uniform grid

    Args:
        t0: Start of the interval
        t1: End of the interval (must exceed t0)
        n_steps: Number of steps (>= 1)

    Returns:
        TimeGrid
    """
    return TimeGrid(float(t0), float(t1), n_steps)


@dataclass(frozen=True, eq=False)
class SamplePath:
    """Real-valued path sampled on the nodes of a TimeGrid"""
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.shape[0] != self.grid.n_steps + 1:
            raise GridError(
                f"path has {values.shape} values, grid needs {self.grid.n_steps + 1}"
            )
        if not np.all(np.isfinite(values)):
            raise GridError("path contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    def __len__(self):
        return self.values.shape[0]

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    @property
    def left(self) -> np.ndarray:
        """Values at the left endpoint of each step"""
        return self.values[:-1]

    def truncate(self, k: int) -> 'SamplePath':
        return SamplePath(self.grid.truncate(k), self.values[:k + 1])

    def map(self, func) -> 'SamplePath':
        return SamplePath(self.grid, func(self.values))


@dataclass(frozen=True)
class RngSeed:
    """
    Seed of one counter-based random stream

    A Philox generator is keyed by (master_seed, stream_index); the counter's
    top word carries the Stream purpose, so sub-streams never overlap.
    """
    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if self.stream_index < 0:
            raise GridError(f"stream_index must be non-negative, got {self.stream_index}")
        object.__setattr__(self, 'master_seed', int(self.master_seed) & UINT64_MASK)
        object.__setattr__(self, 'stream_index', int(self.stream_index))

    def generator(self, purpose: int = Stream.NOISE) -> np.random.Generator:
        key = np.array([self.master_seed, self.stream_index & UINT64_MASK], dtype=np.uint64)
        counter = np.array([0, 0, 0, int(purpose)], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(counter=counter, key=key))

    def spawn(self, offset: int) -> 'RngSeed':
        return RngSeed(self.master_seed, self.stream_index + offset)


def sample_brownian(grid: TimeGrid, seed: RngSeed, purpose: int = Stream.NOISE) -> SamplePath:
    """
    Standard Brownian motion started at 0 on the grid

    Gaussians come from numpy's ziggurat sampler fed by Philox, fixed for
    reproducibility.
    """
    rng = seed.generator(purpose)
    increments = rng.standard_normal(grid.n_steps) * np.sqrt(grid.step)
    return SamplePath(grid, np.concatenate(([0.0], np.cumsum(increments))))


@dataclass(frozen=True)
class SheetSpec:
    """Time and snr grids of a Brownian sheet"""
    time_grid: TimeGrid
    snr_grid: TimeGrid

    def __post_init__(self):
        if self.time_grid.t0 != 0.0 or self.snr_grid.t0 != 0.0:
            raise GridError("sheet grids must start at 0")


@dataclass(frozen=True, eq=False)
class BrownianSheetGrid:
    """Rectangle increments of a Brownian sheet W_{t,gamma}, Var = t*gamma"""
    time_grid: TimeGrid
    snr_grid: TimeGrid
    increments: np.ndarray

    def __post_init__(self):
        inc = np.array(self.increments, dtype=float)
        expected = (self.time_grid.n_steps, self.snr_grid.n_steps)
        if inc.shape != expected:
            raise GridError(f"sheet increments have shape {inc.shape}, expected {expected}")
        inc.setflags(write=False)
        object.__setattr__(self, 'increments', inc)

    @cached_property
    def field(self) -> np.ndarray:
        """W at every (t, gamma) node, zero on both axes"""
        w = np.zeros((self.time_grid.n_steps + 1, self.snr_grid.n_steps + 1))
        w[1:, 1:] = np.cumsum(np.cumsum(self.increments, axis=0), axis=1)
        w.setflags(write=False)
        return w

    def slice(self, level_index: int) -> SamplePath:
        """W^(gamma)_t over time at snr node level_index"""
        return SamplePath(self.time_grid, self.field[:, level_index])

    def segment_path(self, t_lo: int, t_hi: int) -> SamplePath:
        """gamma -> W_{t_hi,gamma} - W_{t_lo,gamma} over the snr grid"""
        if not 0 <= t_lo < t_hi <= self.time_grid.n_steps:
            raise GridError(f"invalid time segment [{t_lo}, {t_hi}]")
        return SamplePath(self.snr_grid, self.field[t_hi, :] - self.field[t_lo, :])


def sample_sheet(spec: SheetSpec, seed: RngSeed) -> BrownianSheetGrid:
    """Sample a Brownian sheet on spec's grids"""
    rng = seed.generator(Stream.SHEET)
    scale = np.sqrt(spec.time_grid.step * spec.snr_grid.step)
    increments = rng.standard_normal((spec.time_grid.n_steps, spec.snr_grid.n_steps)) * scale
    return BrownianSheetGrid(spec.time_grid, spec.snr_grid, increments)


def shared_grid(*paths: SamplePath) -> TimeGrid:
    """Common grid of the paths, or GridError"""
    grid = paths[0].grid
    for path in paths[1:]:
        if path.grid != grid:
            raise GridError(f"grid mismatch: {grid} vs {path.grid}")
    return grid


def ito_integral(integrand: SamplePath, integrator: SamplePath) -> float:
    """Left-endpoint (non-anticipating) sum of integrand * d(integrator)"""
    shared_grid(integrand, integrator)
    return float(np.sum(integrand.left * integrator.increments))


def ito_partial_sums(integrand: SamplePath, integrator: SamplePath) -> SamplePath:
    """Running Ito sums, value k covering steps 0..k-1"""
    grid = shared_grid(integrand, integrator)
    terms = integrand.left * integrator.increments
    return SamplePath(grid, np.concatenate(([0.0], np.cumsum(terms))))


def anticipating_integral(integrand: SamplePath, integrator: SamplePath) -> float:
    """Right-endpoint sum; not an Ito integral, kept as a negative control"""
    shared_grid(integrand, integrator)
    return float(np.sum(integrand.values[1:] * integrator.increments))


def lebesgue_integral(path: SamplePath) -> float:
    """Left Riemann sum of path over its grid"""
    return float(np.sum(path.left) * path.grid.step)


def quadratic_variation(path: SamplePath) -> float:
    return float(np.sum(path.increments ** 2))


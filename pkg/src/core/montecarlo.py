"""
Monte Carlo harness for the identities

Paths are simulated in shards on a thread pool; path i always uses
RngSeed(master_seed, i) and results are reassembled in path order, so a run
is bit-identical whatever the worker count.
"""

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import stats as sps

from core.couplings import CouplingKind, simulate_independent_coupling
from core.densities import DensityMode
from core.errors import ConfigError, ExperimentError, InfoEstError
from core.identities import (IdentityReport, additive_coupling_Z, bm_coupling_Z, independent_block_Z,
                             independent_limit_Z)
from core.paths import RngSeed, Stream
from core.priors import Gaussian, ScalarPrior, mutual_information
from utils.logger import get_logger

logger = get_logger('montecarlo')

MIN_PATHS = 100
CDF_LEVEL = 0.01
ACCEPT_SE = 4.0
BATCH_CHUNK = 1 << 15
BM_CHUNK_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class EstimatorStats:
    """Sample mean and variance with their standard errors"""
    n: int
    mean: float
    variance: float
    std_error_mean: float
    std_error_variance: float

    @classmethod
    def from_samples(cls, values) -> 'EstimatorStats':
        """
        Estimate from a sample

        The variance is unbiased; its standard error comes from the delta
        method with the fourth central moment. Sums are pairwise.
        """
        x = np.asarray(values, dtype=float).ravel()
        n = x.size
        if n == 0:
            raise ValueError("cannot estimate from an empty sample")
        mean = float(np.sum(x) / n)
        if n == 1:
            return cls(1, mean, 0.0, 0.0, 0.0)
        centered = x - mean
        sq = centered * centered
        variance = float(np.sum(sq) / (n - 1))
        m4 = float(np.sum(sq * sq) / n)
        var_of_var = (m4 - variance ** 2 * (n - 3) / (n - 1)) / n
        return cls(n, mean, variance, math.sqrt(variance / n), math.sqrt(max(var_of_var, 0.0)))

    def mean_within(self, target: float, k: float = ACCEPT_SE) -> bool:
        return _within(self.mean, self.std_error_mean, target, k)

    def variance_within(self, target: float, k: float = ACCEPT_SE) -> bool:
        return _within(self.variance, self.std_error_variance, target, k)

    def to_row(self) -> dict:
        return {'n': self.n, 'mean': repr(self.mean), 'se_mean': repr(self.std_error_mean),
                'var': repr(self.variance), 'se_var': repr(self.std_error_variance)}


def _within(value, se, target, k):
    return abs(value - target) <= k * se + 1e-12 * (1.0 + abs(target))


def dkw_halfwidth(n: int, alpha: float = CDF_LEVEL) -> float:
    """Distribution-free confidence band half-width of an empirical CDF"""
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


@dataclass(frozen=True, eq=False)
class EmpiricalCdf:
    """Empirical CDF with a 99% DKW band"""
    values: np.ndarray
    band_halfwidth: float

    @classmethod
    def from_samples(cls, samples, alpha: float = CDF_LEVEL) -> 'EmpiricalCdf':
        values = np.sort(np.asarray(samples, dtype=float).ravel())
        if values.size == 0:
            raise ValueError("cannot build a CDF from an empty sample")
        values.setflags(write=False)
        return cls(values, dkw_halfwidth(values.size, alpha))

    @property
    def n(self) -> int:
        return self.values.size

    def evaluate(self, points) -> np.ndarray:
        return np.searchsorted(self.values, np.asarray(points, dtype=float), side='right') / self.n

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.values, q))

    def sup_distance(self, other: 'EmpiricalCdf') -> float:
        """Kolmogorov distance between two empirical CDFs"""
        points = np.concatenate((self.values, other.values))
        return float(np.max(np.abs(self.evaluate(points) - other.evaluate(points))))

    def rows(self, max_rows: Optional[int] = None) -> List[Tuple[float, float, float]]:
        """(value, F(value), band) rows, thinned to at most max_rows"""
        idx = np.arange(self.n)
        if max_rows is not None and self.n > max_rows:
            idx = np.unique(np.linspace(0, self.n - 1, max_rows).round().astype(int))
        return [(float(self.values[i]), (i + 1) / self.n, self.band_halfwidth) for i in idx]


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    """Per-path reports of one experiment and their aggregates"""
    identity: str
    params: dict
    reports: Tuple[IdentityReport, ...]
    stats: EstimatorStats
    cdf: EmpiricalCdf
    master_seed: int

    @property
    def left_values(self) -> np.ndarray:
        return np.array([r.left_value for r in self.reports])

    @property
    def x_values(self) -> np.ndarray:
        return np.array([np.nan if r.x_value is None else r.x_value for r in self.reports])

    @property
    def max_gap(self) -> float:
        return max(abs(r.pathwise_gap) for r in self.reports)

    @property
    def algebraic_failures(self) -> List[IdentityReport]:
        return [r for r in self.reports if r.mode is DensityMode.ALGEBRAIC and not r.closes()]


def default_threads() -> int:
    return os.cpu_count() or 1


def _run_shard(identity_op, params, master_seed, indices) -> List[IdentityReport]:
    reports = []
    for i in indices:
        try:
            reports.append(identity_op(params, RngSeed(master_seed, i)))
        except (InfoEstError, ValueError, ArithmeticError) as e:
            raise ExperimentError(f"path {i}: {e}", path_index=i) from e
    return reports


def run_experiment(identity_op: Callable[[dict, RngSeed], IdentityReport], params: dict, n_paths: int,
                   master_seed: int, threads: Optional[int] = None, name: Optional[str] = None,
                   min_paths: int = MIN_PATHS) -> ExperimentResult:
    """
    Run an identity on n_paths independent paths

    Args:
        identity_op: Callable (params, seed) -> IdentityReport for one path
        params: Parameters handed to identity_op
        n_paths: Number of paths (at least 100)
        master_seed: Seed of the whole run; path i uses stream i
        threads: Worker count (default: hardware parallelism)
        name: Identity name for the result (default: taken from the first report)
        min_paths: Lower guard on n_paths

    Returns:
        ExperimentResult

    Raises:
        ConfigError: if n_paths is below the minimum
        ExperimentError: if a path fails, with its index attached
    """
    if n_paths < min_paths:
        raise ConfigError(f"n_paths must be at least {min_paths}, got {n_paths}")
    threads = max(1, min(threads or default_threads(), n_paths))
    width = math.ceil(n_paths / threads)
    shards = [range(s * width, min((s + 1) * width, n_paths)) for s in range(threads)]
    shards = [s for s in shards if len(s)]

    if len(shards) == 1:
        results = [_run_shard(identity_op, params, master_seed, shards[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(shards)) as pool:
            futures = [pool.submit(_run_shard, identity_op, params, master_seed, s) for s in shards]
            results = [f.result() for f in futures]
    for s, shard in enumerate(shards):
        logger.debug(f"shard {s}: paths {shard.start}..{shard.stop - 1}")

    reports = tuple(r for shard in results for r in shard)
    left = np.array([r.left_value for r in reports])
    return ExperimentResult(name or reports[0].identity_name, dict(params), reports,
                            EstimatorStats.from_samples(left), EmpiricalCdf.from_samples(left),
                            master_seed)


class BinStats(NamedTuple):
    lower: float
    upper: float
    stats: EstimatorStats


def conditional_mean_by_bins(x, z, n_bins: int) -> List[BinStats]:
    """
    Mean of z within equal-probability bins of x

    Bins are cut at quantiles of x; when x takes at most n_bins distinct
    values each value gets its own bin.
    """
    if n_bins < 2:
        raise ValueError(f"need at least 2 bins, got {n_bins}")
    x = np.asarray(x, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    if x.shape != z.shape:
        raise ValueError("x and z must have the same length")
    distinct = np.unique(x)
    if distinct.size <= n_bins:
        return [BinStats(float(v), float(v), EstimatorStats.from_samples(z[x == v])) for v in distinct]
    edges = np.quantile(x, np.linspace(0.0, 1.0, n_bins + 1))
    labels = np.clip(np.searchsorted(edges, x, side='right') - 1, 0, n_bins - 1)
    bins = []
    for b in range(n_bins):
        members = z[labels == b]
        if members.size == 0:
            raise ValueError(f"bin {b} is empty, ties dominate the sample")
        bins.append(BinStats(float(edges[b]), float(edges[b + 1]), EstimatorStats.from_samples(members)))
    return bins


def martingale_increment_test(partial_sums, checkpoints: Sequence[Tuple[int, int]],
                              clip: float = 3.0) -> Dict[Tuple[int, int, str], EstimatorStats]:
    """
    E[(S_t - S_s) g(S_s)] for g = 1 and g = clipped S_s

    Args:
        partial_sums: Array (paths, nodes) or sequence of SamplePath
        checkpoints: Node index pairs (s, t) with s < t
        clip: Bound of the clipped past value

    Returns:
        Stats keyed by (s, t, 'constant' | 'clipped')
    """
    if not isinstance(partial_sums, np.ndarray):
        partial_sums = np.stack([p.values for p in partial_sums])
    out = {}
    for s, t in checkpoints:
        if not 0 <= s < t < partial_sums.shape[1]:
            raise ValueError(f"invalid checkpoint pair ({s}, {t})")
        increment = partial_sums[:, t] - partial_sums[:, s]
        past = np.clip(partial_sums[:, s], -clip, clip)
        out[(s, t, 'constant')] = EstimatorStats.from_samples(increment)
        out[(s, t, 'clipped')] = EstimatorStats.from_samples(increment * past)
    return out


class KsResult(NamedTuple):
    statistic: float
    critical_value: float
    p_value: float

    @property
    def passed(self) -> bool:
        return self.statistic <= self.critical_value


def ks_standard_normal(samples, alpha: float = CDF_LEVEL) -> KsResult:
    """Kolmogorov-Smirnov test of a sample against Normal(0, 1)"""
    samples = np.asarray(samples, dtype=float).ravel()
    result = sps.kstest(samples, 'norm')
    critical = float(sps.kstwo.ppf(1.0 - alpha, samples.size))
    return KsResult(float(result.statistic), critical, float(result.pvalue))


# coupling sweeps

def coupling_variance_target(kind, prior: ScalarPrior, snr: float) -> Optional[float]:
    """
    Var(Z) where a closed form exists

    BM coupling: int_0^snr mmse = 2 I(snr), any prior. The other couplings
    only for a standard Gaussian input.
    """
    kind = CouplingKind.parse(kind)
    if kind is CouplingKind.BROWNIAN_MOTION:
        return 2.0 * mutual_information(prior, snr)
    if prior != Gaussian(0.0, 1.0):
        return None
    if kind is CouplingKind.ADDITIVE_GAUSSIAN:
        return 0.5 * math.log1p(snr) ** 2 + math.atan(math.sqrt(snr)) ** 2
    return snr * (1 + 2 * snr) / (2 * (1 + snr) ** 2)


def coupling_Z_samples(kind, prior: ScalarPrior, snr: float, n_paths: int, master_seed: int,
                       n_steps: int = 1024, blocks: Optional[int] = None,
                       mode: DensityMode = DensityMode.ALGEBRAIC) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw (X, Z) pairs under one coupling

    The additive coupling, the block limit and the BM coupling are drawn in
    vectorized chunks from the master seed, the BM coupling over (chunk x
    n_steps) increment arrays. The finite-block independent coupling
    simulates path by path on stream i.
    """
    kind = CouplingKind.parse(kind)
    base = RngSeed(master_seed)
    if kind is CouplingKind.BROWNIAN_MOTION:
        x = np.asarray(prior.draw(base.generator(Stream.SIGNAL), n_paths), dtype=float)
        noise = base.generator(Stream.NOISE)
        root_step = math.sqrt(snr / n_steps)
        rows = max(1, BM_CHUNK_ELEMENTS // n_steps)
        z = np.empty(n_paths)
        for s in range(0, n_paths, rows):
            stop = min(s + rows, n_paths)
            dw = noise.standard_normal((stop - s, n_steps)) * root_step
            z[s:stop] = bm_coupling_Z(prior, x[s:stop], dw, snr, mode)
        return x, z
    if kind is CouplingKind.ADDITIVE_GAUSSIAN or (kind is CouplingKind.INDEPENDENT_GAUSSIANS and blocks is None):
        x = np.asarray(prior.draw(base.generator(Stream.SIGNAL), n_paths), dtype=float)
        n = base.generator(Stream.NOISE).standard_normal(n_paths)
        op = additive_coupling_Z if kind is CouplingKind.ADDITIVE_GAUSSIAN else independent_limit_Z
        z = np.concatenate([np.atleast_1d(op(prior, x[s:s + BATCH_CHUNK], n[s:s + BATCH_CHUNK], snr))
                            for s in range(0, n_paths, BATCH_CHUNK)])
        return x, z

    x = np.empty(n_paths)
    z = np.empty(n_paths)
    for i in range(n_paths):
        seed = RngSeed(master_seed, i)
        x[i] = prior.draw(seed.generator(Stream.SIGNAL))
        z[i] = independent_block_Z(prior, simulate_independent_coupling(x[i], snr, blocks, seed))
    return x, z


class SweepRow(NamedTuple):
    kind: CouplingKind
    snr: float
    stats: EstimatorStats
    target: Optional[float]

    def to_row(self) -> dict:
        row = {'coupling': self.kind.value, 'snr': repr(self.snr)}
        row.update(self.stats.to_row())
        row['target_var'] = '' if self.target is None else repr(self.target)
        return row


def variance_sweep(coupling_kind, prior: ScalarPrior, snr_list: Iterable[float], n_paths: int,
                   seed: int, n_steps: int = 1024, blocks: Optional[int] = None) -> List[SweepRow]:
    """Var(Z) of one coupling at each snr, with the analytic target where known"""
    snr_list = [float(s) for s in snr_list]
    if not snr_list:
        raise ConfigError("snr list is empty")
    kind = CouplingKind.parse(coupling_kind)
    rows = []
    for snr in snr_list:
        _, z = coupling_Z_samples(kind, prior, snr, n_paths, seed, n_steps, blocks)
        rows.append(SweepRow(kind, snr, EstimatorStats.from_samples(z), coupling_variance_target(kind, prior, snr)))
        logger.debug(f"sweep {kind.value} snr={snr}: var={rows[-1].stats.variance:.6f}")
    return rows


@dataclass(frozen=True)
class OrderingRow:
    """Var(Z) of the three couplings at one snr"""
    snr: float
    var_bm: EstimatorStats
    var_additive: EstimatorStats
    var_independent: EstimatorStats

    @property
    def ordered(self) -> bool:
        return self.var_independent.variance <= self.var_bm.variance <= self.var_additive.variance


def variance_ordering(prior: ScalarPrior, snr_list: Iterable[float], n_paths: int, seed: int,
                      n_steps: int = 1024) -> List[OrderingRow]:
    """
    Report whether Var(Z) under the independent, BM and additive couplings
    is increasing in that order. Observed, never enforced.
    """
    rows = []
    for snr in snr_list:
        per_kind = [EstimatorStats.from_samples(coupling_Z_samples(kind, prior, snr, n_paths, seed, n_steps)[1])
                    for kind in (CouplingKind.BROWNIAN_MOTION, CouplingKind.ADDITIVE_GAUSSIAN,
                                 CouplingKind.INDEPENDENT_GAUSSIANS)]
        rows.append(OrderingRow(float(snr), *per_kind))
    return rows


# CSV output

REPORT_COLUMNS = ['identity', 'seed', 'left', 'right', 'correction', 'gap', 'mode']
SUMMARY_COLUMNS = ['identity', 'n', 'mean', 'se_mean', 'var', 'se_var']


def _write_csv(path, header_lines: Iterable[str], columns: Sequence[str], rows: Iterable[dict]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        for line in header_lines:
            f.write(f"# {line}\n")
        writer = csv.DictWriter(f, fieldnames=list(columns), extrasaction='ignore')
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def write_reports_csv(path, reports: Iterable[IdentityReport], header_lines: Iterable[str] = ()):
    _write_csv(path, header_lines, REPORT_COLUMNS, (r.to_row() for r in reports))


def write_summary_csv(path, rows: Sequence[dict], header_lines: Iterable[str] = (),
                      columns: Optional[Sequence[str]] = None):
    if columns is None:
        columns = list(SUMMARY_COLUMNS)
        for row in rows:
            columns.extend(k for k in row if k not in columns)
    _write_csv(path, header_lines, columns, rows)


def write_cdf_csv(path, cdf: EmpiricalCdf, header_lines: Iterable[str] = (), max_rows: Optional[int] = None,
                  label: str = ''):
    rows = ({'label': label, 'value': repr(v), 'F': repr(f), 'band': repr(b)} for v, f, b in cdf.rows(max_rows))
    _write_csv(path, header_lines, ['label', 'value', 'F', 'band'], rows)


def read_csv_header(path) -> List[str]:
    """Comment lines at the top of a CSV written by this module, without the '# ' prefix"""
    lines = []
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            if not line.startswith('#'):
                break
            lines.append(line[2:].rstrip('\n'))
    return lines

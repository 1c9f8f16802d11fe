"""
Orchestration behind the verify, sweep and cdf commands
"""

import itertools
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from cli.catalogue import IdentitySpec, Point, closed_form_draws, get_identity, is_constant_gaussian
from core.couplings import CouplingKind
from core.densities import DensityMode
from core.errors import ConfigError
from core.identities import IdentityReport
from core.montecarlo import (ACCEPT_SE, EmpiricalCdf, EstimatorStats, OrderingRow, conditional_mean_by_bins,
                             run_experiment, variance_sweep, write_cdf_csv, write_reports_csv,
                             write_summary_csv)
from utils.config import ExperimentConfig
from utils.logger import PerformanceLogger, get_logger

logger = get_logger('cli')

EXIT_OK = 0
EXIT_STATISTICAL = 2
EXIT_ALGEBRAIC = 3
EXIT_CONFIG = 4

# list key in the config -> field of Point it sweeps
SWEEP_AXES = {
    'coupling_list': 'coupling',
    'snr_list': 'snr',
    'horizon_list': 'horizon',
    'block_list': 'blocks',
    'step_list': 'n_steps',
}

ORDER_HALF_RATIO = (1.15, 1.75)
CDF_MAX_ROWS = 2000


@dataclass(frozen=True)
class Assertion:
    """One pass/fail check; written as a row of the failure record"""
    name: str
    kind: str
    passed: bool
    observed: float
    target: float
    se: float
    point: str = ''

    def to_row(self) -> dict:
        return {'assertion': self.name, 'kind': self.kind, 'point': self.point,
                'observed': repr(self.observed), 'target': repr(self.target), 'se': repr(self.se),
                'passed': self.passed}


@dataclass(frozen=True, eq=False)
class PointOutcome:
    """Samples and aggregates at one parameter point"""
    point: Point
    labels: Dict[str, object]
    z: np.ndarray
    x: np.ndarray
    reports: Tuple[IdentityReport, ...]
    stats: EstimatorStats
    duration: float

    @property
    def label(self) -> str:
        return ' '.join(f"{k}={v}" for k, v in self.labels.items())

    @property
    def max_gap(self) -> float:
        return max((abs(r.pathwise_gap) for r in self.reports), default=float('nan'))

    @property
    def rms_gap(self) -> float:
        if not self.reports:
            return float('nan')
        gaps = np.array([r.pathwise_gap for r in self.reports])
        return float(np.sqrt(np.mean(gaps * gaps)))


@dataclass
class RunOutcome:
    """Everything one config produced"""
    name: str
    config: ExperimentConfig
    points: List[PointOutcome] = field(default_factory=list)
    assertions: List[Assertion] = field(default_factory=list)

    @property
    def failures(self) -> List[Assertion]:
        return [a for a in self.assertions if not a.passed]

    @property
    def exit_code(self) -> int:
        kinds = {a.kind for a in self.failures}
        if 'algebraic' in kinds:
            return EXIT_ALGEBRAIC
        if 'statistical' in kinds:
            return EXIT_STATISTICAL
        return EXIT_OK


def apply_overrides(config: ExperimentConfig, seed=None, paths=None, steps=None, mode=None,
                    output=None) -> ExperimentConfig:
    """
    Command-line flags take precedence over the config file

    steps sets n_steps, and snr_steps too when the config pins it.
    """
    overrides = {key: value for key, value in (
        ('master_seed', seed), ('n_paths', paths), ('n_steps', steps), ('mode', mode), ('output', output),
    ) if value is not None}
    if steps is not None and config['snr_steps'] is not None:
        overrides['snr_steps'] = steps
    if overrides:
        config.update(overrides)
    return config


def sweep_points(config: ExperimentConfig) -> List[Tuple[Dict[str, object], Point]]:
    """The cartesian product of every list parameter; a single point when there are none"""
    base = Point.from_config(config)
    axes = [(SWEEP_AXES[key], config[key]) for key in SWEEP_AXES if config[key] is not None]
    if not axes:
        return [({}, base)]
    points = []
    for values in itertools.product(*(v for _, v in axes)):
        point = base
        labels = {}
        for (name, _), value in zip(axes, values):
            point = point.with_value(name, value)
            labels[name] = getattr(point, name).value if name == 'coupling' else value
        points.append((labels, point))
    return points


def run_point(spec: IdentitySpec, point: Point, labels: Dict[str, object], n_paths: int,
              master_seed: int, threads: Optional[int] = None) -> PointOutcome:
    """Simulate one parameter point"""
    spec.validate(point)
    start = time.perf_counter()
    if spec.path_op is not None:
        result = run_experiment(lambda params, seed: spec.path_op(point, seed), dict(labels), n_paths,
                                master_seed, threads, name=spec.name)
        reports = result.reports
        z = result.left_values
        x = result.x_values
    else:
        x, z = spec.batch_op(point, n_paths, master_seed)
        reports = ()
    duration = time.perf_counter() - start
    logger.info(f"{spec.name} {labels or ''}: {n_paths} paths in {duration:.2f}s")
    return PointOutcome(point, dict(labels), np.asarray(z, dtype=float), np.asarray(x, dtype=float),
                        tuple(reports), EstimatorStats.from_samples(z), duration)


def _stat(name, observed, target, se, point_label) -> Assertion:
    passed = abs(observed - target) <= ACCEPT_SE * se + 1e-12 * (1.0 + abs(target))
    return Assertion(name, 'statistical', passed, float(observed), float(target), float(se), point_label)


def point_assertions(spec: IdentitySpec, outcome: PointOutcome, n_bins: Optional[int] = None,
                     endpoint: str = 'left') -> List[Assertion]:
    """Zero mean, variance target, algebraic closure and conditional zero mean at one point"""
    point, stats, label = outcome.point, outcome.stats, outcome.label
    checks = []
    target_mean = spec.target_mean(point)
    if target_mean is not None:
        checks.append(_stat('mean', stats.mean, target_mean, stats.std_error_mean, label))
    target_var = spec.target_variance(point)
    if target_var is not None:
        checks.append(_stat('variance', stats.variance, target_var, stats.std_error_variance, label))

    if outcome.reports and spec.closes_algebraically and point.mode is DensityMode.ALGEBRAIC:
        worst = max(outcome.reports, key=lambda r: abs(r.pathwise_gap) - r.gap_bound)
        closed = all(r.closes() for r in outcome.reports)
        if endpoint == 'right':
            # anticipating sums must be caught
            checks.append(Assertion('anticipating_detected', 'algebraic', not closed,
                                    abs(worst.pathwise_gap), worst.gap_bound, 0.0, label))
        else:
            checks.append(Assertion('algebraic_gap', 'algebraic', closed,
                                    abs(worst.pathwise_gap), worst.gap_bound, 0.0, label))

    if n_bins and target_mean == 0.0 and np.all(np.isfinite(outcome.x)):
        for b in conditional_mean_by_bins(outcome.x, outcome.z, n_bins):
            checks.append(_stat(f"bin_mean[{b.lower:.4g},{b.upper:.4g}]", b.stats.mean, 0.0,
                                b.stats.std_error_mean, label))
    return checks


def order_assertions(outcomes: Sequence[PointOutcome]) -> List[Assertion]:
    """RMS analytic gap should shrink by about sqrt(2) per doubling of the step count"""
    ordered = sorted(outcomes, key=lambda o: o.point.n_steps)
    checks = []
    for coarse, fine in zip(ordered, ordered[1:]):
        ratio = coarse.rms_gap / fine.rms_gap if fine.rms_gap > 0 else float('inf')
        low, high = ORDER_HALF_RATIO
        checks.append(Assertion('order_half_ratio', 'statistical', low <= ratio <= high, ratio, math.sqrt(2.0),
                                0.0, f"n_steps={coarse.point.n_steps}->{fine.point.n_steps}"))
    return checks


def block_trend_assertions(outcomes: Sequence[PointOutcome], limit: float, limit_se: float) -> List[Assertion]:
    """Var(Z_M) moves toward the limit as M grows, within standard errors"""
    ordered = sorted(outcomes, key=lambda o: o.point.blocks)
    checks = []
    for coarse, fine in zip(ordered, ordered[1:]):
        d_coarse = abs(coarse.stats.variance - limit)
        d_fine = abs(fine.stats.variance - limit)
        se = math.sqrt(coarse.stats.std_error_variance ** 2 + fine.stats.std_error_variance ** 2 + limit_se ** 2)
        checks.append(Assertion('block_trend', 'statistical', d_fine <= d_coarse + ACCEPT_SE * se,
                                d_fine, d_coarse, se, f"blocks={coarse.point.blocks}->{fine.point.blocks}"))
    return checks


def _summary_row(spec: IdentitySpec, outcome: PointOutcome) -> dict:
    row = {'identity': spec.name}
    row.update({k: v for k, v in outcome.labels.items()})
    row.update(outcome.stats.to_row())
    target_mean = spec.target_mean(outcome.point)
    target_var = spec.target_variance(outcome.point)
    row['target_mean'] = '' if target_mean is None else repr(target_mean)
    row['target_var'] = '' if target_var is None else repr(target_var)
    row['max_gap'] = repr(outcome.max_gap)
    row['rms_gap'] = repr(outcome.rms_gap)
    row['seconds'] = f"{outcome.duration:.3f}"
    return row


def _out_dir(config: ExperimentConfig, out) -> Path:
    path = Path(out if out is not None else config.get('output', '.'))
    path.mkdir(parents=True, exist_ok=True)
    return path


def run_verify(config: ExperimentConfig, name: str, out=None, threads: Optional[int] = None,
               perf: Optional[PerformanceLogger] = None) -> RunOutcome:
    """
    Run one config and check every enabled assertion

    Args:
        config: Validated experiment config (overrides applied)
        name: Stem of the output files
        out: Output directory (default: the config's output field, else '.')
        threads: Worker count
        perf: Optional performance logger

    Returns:
        RunOutcome; its exit_code follows the 0/2/3 contract
    """
    spec = get_identity(config['identity'])
    outcome = RunOutcome(name, config)
    n_paths, seed = config['n_paths'], config['master_seed']

    for labels, point in sweep_points(config):
        result = run_point(spec, point, labels, n_paths, seed, threads)
        outcome.points.append(result)
        outcome.assertions.extend(point_assertions(spec, result, config['n_bins'], config['endpoint']))
        if perf is not None:
            perf.log_operation_time(f"verify {spec.name} {result.label}".strip(), result.duration, n_paths)

    if config['step_list'] is not None and config.mode is DensityMode.ANALYTIC:
        outcome.assertions.extend(order_assertions(outcome.points))
    if config['block_list'] is not None and spec.batch_op is not None:
        limit_point = Point.from_config(config, blocks=None, coupling=CouplingKind.INDEPENDENT_GAUSSIANS)
        limit = spec.target_variance(limit_point)
        limit_se = 0.0
        if limit is None:
            limit_run = run_point(spec, limit_point, {'blocks': 'limit'}, n_paths, seed, threads)
            limit, limit_se = limit_run.stats.variance, limit_run.stats.std_error_variance
        outcome.assertions.extend(block_trend_assertions(outcome.points, limit, limit_se))

    out_dir = _out_dir(config, out)
    header = config.header_lines({'identity': spec.name})
    reports = [r for p in outcome.points for r in p.reports]
    if reports:
        write_reports_csv(out_dir / f"{name}_paths.csv", reports, header)
    write_summary_csv(out_dir / f"{name}_summary.csv", [_summary_row(spec, p) for p in outcome.points], header)
    if outcome.failures:
        write_summary_csv(out_dir / f"{name}_failures.csv", [a.to_row() for a in outcome.failures], header,
                          columns=['assertion', 'kind', 'point', 'observed', 'target', 'se', 'passed'])
        for failure in outcome.failures:
            logger.warning(f"{name}: {json.dumps(failure.to_row())}")
    return outcome


def run_sweep(config: ExperimentConfig, name: str, out=None, threads: Optional[int] = None,
              perf: Optional[PerformanceLogger] = None) -> List[dict]:
    """One summary row per parameter value; no assertions"""
    spec = get_identity(config['identity'])
    if not any(config[key] is not None for key in SWEEP_AXES):
        raise ConfigError(f"sweep needs one of {', '.join(SWEEP_AXES)}")
    n_paths, seed = config['n_paths'], config['master_seed']

    if spec.name == 'coupling_Z' and config['snr_list'] is not None and config['block_list'] is None:
        rows = _coupling_sweep_rows(config, n_paths, seed, perf)
    else:
        rows = []
        for labels, point in sweep_points(config):
            result = run_point(spec, point, labels, n_paths, seed, threads)
            rows.append(_summary_row(spec, result))
            if perf is not None:
                perf.log_operation_time(f"sweep {spec.name} {result.label}", result.duration, n_paths)

    write_summary_csv(_out_dir(config, out) / f"{name}_sweep.csv", rows, config.header_lines({'identity': spec.name}))
    return rows


def _coupling_sweep_rows(config: ExperimentConfig, n_paths: int, seed: int,
                         perf: Optional[PerformanceLogger]) -> List[dict]:
    point = Point.from_config(config)
    prior = config.prior()
    kinds = [CouplingKind.parse(k) for k in (config['coupling_list'] or [config['coupling']])]
    by_kind = {}
    for kind in kinds:
        start = time.perf_counter()
        by_kind[kind] = variance_sweep(kind, prior, config['snr_list'], n_paths, seed, point.snr_steps,
                                       point.blocks)
        if perf is not None:
            perf.log_operation_time(f"sweep coupling {kind.value}", time.perf_counter() - start,
                                    n_paths * len(config['snr_list']))
    rows = []
    for kind in kinds:
        for i, sweep_row in enumerate(by_kind[kind]):
            row = {'identity': 'coupling_Z'}
            row.update(sweep_row.to_row())
            if len(by_kind) == 3:
                ordering = OrderingRow(sweep_row.snr, *(by_kind[k][i].stats for k in (
                    CouplingKind.BROWNIAN_MOTION, CouplingKind.ADDITIVE_GAUSSIAN,
                    CouplingKind.INDEPENDENT_GAUSSIANS)))
                row['ordered'] = ordering.ordered
            rows.append(row)
    return rows


def run_cdf(config: ExperimentConfig, name: str, out=None, threads: Optional[int] = None) -> Dict[str, EmpiricalCdf]:
    """
    Empirical CDFs of the tracking error with their DKW bands

    coupling_Z defaults to the additive and independent couplings; with a
    standard Gaussian input each gets a closed-form reference CDF from
    n_reference direct draws, and the header records the sup distance.
    """
    spec = get_identity(config['identity'])
    n_paths, seed = config['n_paths'], config['master_seed']
    out_dir = _out_dir(config, out)
    base = Point.from_config(config)

    if spec.name == 'coupling_Z':
        kinds = config['coupling_list'] or [CouplingKind.ADDITIVE_GAUSSIAN.value,
                                            CouplingKind.INDEPENDENT_GAUSSIANS.value]
        points = [(CouplingKind.parse(k).value, base.with_value('coupling', k)) for k in kinds]
    else:
        points = [(spec.name, base)]

    cdfs = {}
    for label, point in points:
        result = run_point(spec, point, {'label': label}, n_paths, seed, threads)
        cdf = EmpiricalCdf.from_samples(result.z)
        cdfs[label] = cdf
        extra = {'identity': spec.name, 'label': label, 'n': cdf.n, 'band': cdf.band_halfwidth,
                 'median': cdf.quantile(0.5), 'max': float(cdf.values[-1])}

        closed_form = (spec.name == 'coupling_Z' and point.blocks is None and is_constant_gaussian(point)
                       and point.coupling is not CouplingKind.BROWNIAN_MOTION)
        if closed_form:
            n_reference = config['n_reference'] or 10 * n_paths
            reference = EmpiricalCdf.from_samples(closed_form_draws(point, n_reference, seed))
            cdfs[f"closed_form_{label}"] = reference
            distance = cdf.sup_distance(reference)
            extra.update({'reference_n': reference.n, 'reference_median': reference.quantile(0.5),
                          'sup_distance': distance,
                          'within_band': distance <= cdf.band_halfwidth + reference.band_halfwidth})
            write_cdf_csv(out_dir / f"{name}_{label}_closed_form_cdf.csv", reference,
                          config.header_lines({'label': f"closed_form_{label}"}), CDF_MAX_ROWS,
                          label=f"closed_form_{label}")
        write_cdf_csv(out_dir / f"{name}_{label}_cdf.csv", cdf, config.header_lines(extra), CDF_MAX_ROWS,
                      label=label)
    return cdfs

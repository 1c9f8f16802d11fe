"""
Command line interface: verify, sweep, cdf, list-identities
"""

import logging
from pathlib import Path

import click

from cli.catalogue import list_identities
from cli.runner import EXIT_CONFIG, EXIT_OK, apply_overrides, run_cdf, run_sweep, run_verify
from core.densities import DensityMode
from core.errors import ConfigError, InfoEstError
from utils.config import ExperimentConfig, load_config_paths, thread_count
from utils.logger import PerformanceLogger, setup_logging

EXIT_RUNTIME = 1


def _common_options(func):
    options = [
        click.option('--config', 'config_path', required=True, type=click.Path(exists=True, path_type=Path),
                     help='JSON config file, or a directory of them'),
        click.option('--out', type=click.Path(path_type=Path), default=None, help='Output directory for CSV files'),
        click.option('--seed', type=click.IntRange(0, 2 ** 64 - 1), default=None, help='Master seed (overrides config)'),
        click.option('--paths', type=int, default=None, help='Number of paths (overrides config)'),
        click.option('--steps', type=int, default=None, help='Grid steps, time and snr (overrides config)'),
        click.option('--mode', type=click.Choice([m.value for m in DensityMode]), default=None,
                     help='Density evaluation mode (overrides config)'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _load(path: Path, seed, paths, steps, mode, out) -> ExperimentConfig:
    config = ExperimentConfig.load(path)
    return apply_overrides(config, seed=seed, paths=paths, steps=steps, mode=mode,
                           output=str(out) if out is not None else None)


def _run_name(config: ExperimentConfig, path: Path) -> str:
    return path.stem if path.suffix == '.json' else config['identity']


@click.group()
@click.option('--log-level', type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR']), default='WARNING',
              show_default=True)
@click.option('--log-file/--no-log-file', default=False, help='Also log to ~/.infoest/logs')
@click.pass_context
def cli(ctx, log_level, log_file):
    """Pointwise information-estimation identities for Gaussian channels"""
    setup_logging(getattr(logging, log_level), log_to_file=log_file)
    ctx.ensure_object(dict)
    ctx.obj['perf'] = PerformanceLogger() if log_file else None


@cli.command()
@_common_options
@click.pass_context
def verify(ctx, config_path, out, seed, paths, steps, mode):
    """Run identities and check their assertions (exit 0 pass, 2 statistical, 3 algebraic, 4 config)"""
    perf = ctx.obj.get('perf')
    worst = EXIT_OK
    try:
        threads = thread_count()
        files = load_config_paths(config_path)
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        ctx.exit(EXIT_CONFIG)

    for path in files:
        try:
            config = _load(path, seed, paths, steps, mode, out)
            outcome = run_verify(config, _run_name(config, path), threads=threads, perf=perf)
        except ConfigError as e:
            click.echo(f"{path.name}: config error: {e}", err=True)
            worst = max(worst, EXIT_CONFIG)
            continue
        except InfoEstError as e:
            click.echo(f"{path.name}: {e}", err=True)
            worst = max(worst, EXIT_RUNTIME)
            continue

        for point in outcome.points:
            s = point.stats
            click.echo(f"{outcome.name} {point.label}: n={s.n} mean={s.mean:.6g}±{s.std_error_mean:.2g} "
                       f"var={s.variance:.6g}±{s.std_error_variance:.2g} max_gap={point.max_gap:.3g}")
        for failure in outcome.failures:
            click.echo(f"{outcome.name}: FAIL {failure.name} [{failure.kind}] {failure.point} "
                       f"observed={failure.observed:.6g} target={failure.target:.6g} se={failure.se:.2g}", err=True)
        status = 'PASS' if outcome.exit_code == EXIT_OK else 'FAIL'
        click.echo(f"{outcome.name}: {status}")
        worst = max(worst, outcome.exit_code)
    ctx.exit(worst)


@cli.command()
@_common_options
@click.pass_context
def sweep(ctx, config_path, out, seed, paths, steps, mode):
    """Variance of a tracking error over a list of parameter values"""
    try:
        threads = thread_count()
        for path in load_config_paths(config_path):
            config = _load(path, seed, paths, steps, mode, out)
            rows = run_sweep(config, _run_name(config, path), threads=threads, perf=ctx.obj.get('perf'))
            for row in rows:
                click.echo(', '.join(f"{k}={v}" for k, v in row.items()))
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        ctx.exit(EXIT_CONFIG)
    except InfoEstError as e:
        click.echo(str(e), err=True)
        ctx.exit(EXIT_RUNTIME)


@cli.command()
@_common_options
@click.pass_context
def cdf(ctx, config_path, out, seed, paths, steps, mode):
    """Empirical CDF rows of a tracking error with 99% bands"""
    try:
        threads = thread_count()
        for path in load_config_paths(config_path):
            config = _load(path, seed, paths, steps, mode, out)
            for label, result in run_cdf(config, _run_name(config, path), threads=threads).items():
                click.echo(f"{label}: n={result.n} median={result.quantile(0.5):.6g} band={result.band_halfwidth:.4g}")
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        ctx.exit(EXIT_CONFIG)
    except InfoEstError as e:
        click.echo(str(e), err=True)
        ctx.exit(EXIT_RUNTIME)


@cli.command('list-identities')
def list_identities_command():
    """Print the identity catalogue"""
    for spec in list_identities():
        click.echo(f"{spec.name:22s} {spec.description}")
        click.echo(f"{'':22s} parameters: {spec.parameters}")


def main(argv=None):
    """Console entry point"""
    cli.main(args=argv, prog_name='infoest')

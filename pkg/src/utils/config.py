"""
Experiment Configuration
JSON experiment settings, validation and the CSV header round trip
"""

import copy
import json
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

from dotenv import load_dotenv

from core.couplings import CouplingKind
from core.densities import DensityMode
from core.errors import ConfigError, InfoEstError
from core.montecarlo import MIN_PATHS
from core.priors import prior_from_dict, process_from_dict
from core.channels import phi_from_dict

CONFIG_VERSION = '1.0'
THREADS_ENV = 'INFOEST_THREADS'
HEADER_KEY = 'config'


class ExperimentConfig:
    """Settings of one identity experiment"""

    def __init__(self, values: Optional[Dict[str, Any]] = None):
        """
        Initialize configuration

        Args:
            values: Settings merged over the defaults and validated
        """
        self.defaults = {
            'identity': 'scalar_Z',
            'prior': {'kind': 'gaussian', 'mean': 0.0, 'variance': 1.0},
            'prior_q': None,
            'process': None,
            'coupling': 'bm',
            'coupling_list': None,
            'phi': None,
            'snr': 1.0,
            'snr_list': None,
            'horizon': 1.0,
            'horizon_list': None,
            'n_steps': 1024,
            'step_list': None,
            'snr_steps': None,
            'blocks': None,
            'block_list': None,
            'n_bins': None,
            'n_particles': None,
            'n_paths': 1000,
            'master_seed': 0,
            'mode': DensityMode.ALGEBRAIC.value,
            'endpoint': 'left',
            'n_reference': None,
            'output': None,
            'description': '',
        }
        self.config = copy.deepcopy(self.defaults)
        if values:
            self.update(values)

    @classmethod
    def load(cls, config_file) -> 'ExperimentConfig':
        """
        Load configuration from a JSON file

        Raises:
            ConfigError: if the file cannot be read or does not validate
        """
        try:
            with open(config_file, 'r', encoding='utf-8') as f:
                values = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Failed to load config file {config_file}: {e}") from e
        if not isinstance(values, dict):
            raise ConfigError(f"config file {config_file} must hold a JSON object")
        return cls(values)

    def save(self, config_file):
        """Save configuration to a JSON file"""
        path = Path(config_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.config, f, indent=4, ensure_ascii=False)

    def update(self, values: Dict[str, Any]):
        """Merge values and validate; the previous settings are kept on failure"""
        unknown = sorted(set(values) - set(self.defaults))
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
        old_config = self.config
        self.config = {**copy.deepcopy(old_config), **copy.deepcopy(values)}
        try:
            self._validate_config()
        except ConfigError:
            self.config = old_config
            raise

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get configuration value

        Args:
            key: Configuration key
            default: Default value if key not set

        Returns:
            Configuration value
        """
        value = self.config.get(key)
        return default if value is None else value

    def set(self, key: str, value: Any):
        """Set one configuration value, validated"""
        self.update({key: value})

    def __getitem__(self, key):
        return self.config[key]

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self.config)

    def export_config(self, export_path):
        """
        Export configuration with version and timestamp

        Args:
            export_path: Path to export file
        """
        export_data = {
            'version': CONFIG_VERSION,
            'export_timestamp': datetime.now(timezone.utc).isoformat(),
            'config': self.config,
        }
        try:
            with open(export_path, 'w', encoding='utf-8') as f:
                json.dump(export_data, f, indent=4, ensure_ascii=False)
        except OSError as e:
            raise ConfigError(f"Failed to export configuration: {e}") from e

    @classmethod
    def import_config(cls, import_path) -> 'ExperimentConfig':
        """Read a file written by export_config"""
        try:
            with open(import_path, 'r', encoding='utf-8') as f:
                import_data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Failed to import configuration: {e}") from e
        if not isinstance(import_data, dict) or 'config' not in import_data:
            raise ConfigError("Invalid configuration file format")
        return cls(import_data['config'])

    def header_lines(self, extra: Optional[Dict[str, Any]] = None) -> List[str]:
        """Comment lines for an output CSV; from_header rebuilds the config from them"""
        lines = [f"{HEADER_KEY}: {json.dumps(self.config, sort_keys=True)}"]
        for key, value in (extra or {}).items():
            lines.append(f"{key}: {value}")
        return lines

    @classmethod
    def from_header(cls, lines: Iterable[str]) -> 'ExperimentConfig':
        for line in lines:
            key, _, value = line.partition(': ')
            if key == HEADER_KEY:
                try:
                    return cls(json.loads(value))
                except json.JSONDecodeError as e:
                    raise ConfigError(f"corrupt config header: {e}") from e
        raise ConfigError("no config line in header")

    # typed views

    @property
    def mode(self) -> DensityMode:
        return DensityMode.parse(self.config['mode'])

    def prior(self, key: str = 'prior'):
        return prior_from_dict(self.config[key])

    def process(self):
        spec = self.config['process']
        if spec is None:
            return process_from_dict({'kind': 'constant', 'prior': self.config['prior']})
        return process_from_dict(spec)

    def _validate_config(self):
        """Validate configuration values, raising ConfigError on the first bad one"""
        c = self.config

        for key in ('n_paths', 'n_steps'):
            if isinstance(c[key], bool) or not isinstance(c[key], int) or c[key] < 1:
                raise ConfigError(f"{key} must be a positive integer, got {c[key]!r}")
        if c['n_paths'] < MIN_PATHS:
            raise ConfigError(f"n_paths must be at least {MIN_PATHS}, got {c['n_paths']}")
        for key in ('snr_steps', 'blocks', 'n_bins', 'n_particles', 'n_reference'):
            value = c[key]
            if value is not None and (isinstance(value, bool) or not isinstance(value, int) or value < 1):
                raise ConfigError(f"{key} must be a positive integer, got {value!r}")
        if c['n_bins'] is not None and c['n_bins'] < 2:
            raise ConfigError(f"n_bins must be at least 2, got {c['n_bins']}")

        seed = c['master_seed']
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
            raise ConfigError(f"master_seed must be an unsigned 64-bit integer, got {seed!r}")

        for key in ('snr', 'horizon'):
            if not _positive_number(c[key]):
                raise ConfigError(f"{key} must be a positive number, got {c[key]!r}")
        for key in ('snr_list', 'horizon_list'):
            values = c[key]
            if values is None:
                continue
            if not isinstance(values, list) or not values:
                raise ConfigError(f"{key} must be a non-empty list")
            if not all(_positive_number(v) for v in values):
                raise ConfigError(f"{key} must hold positive numbers, got {values!r}")
        for key in ('block_list', 'step_list'):
            values = c[key]
            if values is not None and (not isinstance(values, list) or not values or not all(
                    isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in values)):
                raise ConfigError(f"{key} must be a non-empty list of positive integers, got {values!r}")
        couplings = c['coupling_list']
        if couplings is not None and (not isinstance(couplings, list) or not couplings):
            raise ConfigError("coupling_list must be a non-empty list")
        try:
            for kind in [c['coupling']] + (couplings or []):
                CouplingKind.parse(kind)
        except InfoEstError as e:
            raise ConfigError(str(e)) from e
        if c['endpoint'] not in ('left', 'right'):
            raise ConfigError(f"endpoint must be 'left' or 'right', got {c['endpoint']!r}")

        try:
            DensityMode.parse(c['mode'])
        except ValueError as e:
            raise ConfigError(str(e)) from e

        try:
            prior_from_dict(c['prior'])
            if c['prior_q'] is not None:
                prior_from_dict(c['prior_q'])
            if c['process'] is not None:
                process_from_dict(c['process'])
            if c['phi'] is not None:
                phi_from_dict(c['phi'])
        except InfoEstError as e:
            raise ConfigError(str(e)) from e

        if not isinstance(c['identity'], str) or not c['identity']:
            raise ConfigError(f"identity must be a name, got {c['identity']!r}")


def _positive_number(value) -> bool:
    return (not isinstance(value, bool) and isinstance(value, (int, float))
            and value > 0 and value != float('inf'))


def load_config_paths(path) -> List[Path]:
    """A config file, or every *.json in a directory in name order"""
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob('*.json'))
        if not files:
            raise ConfigError(f"no JSON configs in {path}")
        return files
    if not path.exists():
        raise ConfigError(f"config path does not exist: {path}")
    return [path]


def thread_count() -> Optional[int]:
    """Worker count from INFOEST_THREADS (a .env file is honoured); None means hardware parallelism"""
    load_dotenv()
    raw = os.getenv(THREADS_ENV)
    if raw is None or raw.strip() == '':
        return None
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if threads < 1:
        raise ConfigError(f"{THREADS_ENV} must be positive, got {threads}")
    return threads

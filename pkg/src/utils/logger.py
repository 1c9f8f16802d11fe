"""
Logging utilities for the library and the experiment runner
"""

import logging
import logging.handlers
import sys
from pathlib import Path

ROOT_LOGGER = 'infoest'
DEFAULT_LOG_DIR = Path.home() / '.infoest' / 'logs'


def setup_logging(log_level=logging.INFO, log_to_file=True, log_dir=None):
    """
    Setup library logging

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_to_file: Whether to log to file
        log_dir: Directory for log files (default: ~/.infoest/logs)

    Returns:
        The configured root library logger
    """
    logger = logging.getLogger(ROOT_LOGGER)
    logger.setLevel(log_level)

    # Clear any existing handlers
    logger.handlers.clear()

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(log_level)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_to_file:
        log_dir = DEFAULT_LOG_DIR if log_dir is None else Path(log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)

        file_handler = logging.handlers.RotatingFileHandler(
            log_dir / 'infoest.log', maxBytes=10*1024*1024, backupCount=5  # 10MB files, keep 5 backups
        )
        file_handler.setLevel(log_level)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger


def get_logger(name=None):
    """
    Get logger instance

    Args:
        name: Child name under the library logger (default: the library logger itself)

    Returns:
        Logger instance
    """
    if name is None:
        return logging.getLogger(ROOT_LOGGER)
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")


class PerformanceLogger:
    """Logger for experiment timing"""

    def __init__(self, log_dir=None):
        """
        Initialize performance logger

        Args:
            log_dir: Directory for performance log files
        """
        log_dir = DEFAULT_LOG_DIR if log_dir is None else Path(log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)
        self.log_file = log_dir / 'performance.log'

        self.logger = logging.getLogger(f"{ROOT_LOGGER}.performance")
        self.logger.setLevel(logging.INFO)
        self.logger.propagate = False

        self.logger.handlers.clear()

        handler = logging.handlers.RotatingFileHandler(
            self.log_file, maxBytes=20*1024*1024, backupCount=5
        )
        handler.setFormatter(logging.Formatter(
            '%(asctime)s - PERF - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        ))
        self.logger.addHandler(handler)

    def log_operation_time(self, operation, duration, n_paths=None):
        """
        Log operation timing

        Args:
            operation: Operation name
            duration: Duration in seconds
            n_paths: Optional number of simulated paths
        """
        if n_paths:
            throughput = n_paths / duration if duration > 0 else 0
            self.logger.info(f"{operation}: {duration:.2f}s, {n_paths} paths, {throughput:.0f} paths/s")
        else:
            self.logger.info(f"{operation}: {duration:.2f}s")

    def close(self):
        for handler in list(self.logger.handlers):
            handler.close()
            self.logger.removeHandler(handler)

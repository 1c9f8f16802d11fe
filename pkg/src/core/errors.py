"""
Exception hierarchy shared by the numerical modules and the CLI
"""


class InfoEstError(Exception):
    """Base class for all library errors"""


class GridError(InfoEstError, ValueError):
    """Invalid grid, or paths that do not share one grid"""


class PriorError(InfoEstError, ValueError):
    """Invalid prior parameters or a prior the operation cannot handle"""


class FilterError(InfoEstError, RuntimeError):
    """A filter could not produce an estimate"""


class WeightCollapseError(FilterError):
    """Every particle weight underflowed to zero"""


class IdentityError(InfoEstError, ValueError):
    """An identity was asked to run outside its preconditions"""


class ExperimentError(InfoEstError, RuntimeError):
    """A Monte Carlo run failed on a specific path"""

    def __init__(self, message, path_index=None):
        super().__init__(message)
        self.path_index = path_index


class ConfigError(InfoEstError, ValueError):
    """Invalid experiment configuration"""

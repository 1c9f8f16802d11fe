"""
Continuous-time Gaussian channels on a grid

dY = level * phi_t dt + dW, with the drift frozen at the left endpoint of
every step so the Girsanov sums in core.densities close exactly.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import ClassVar, NamedTuple

import numpy as np

from core.errors import IdentityError
from core.paths import SamplePath, TimeGrid, shared_grid
from core.priors import piecewise_values, segment_length

REVERSAL_TOLERANCE = 1e-9


def _integrate(grid: TimeGrid, increments: np.ndarray) -> SamplePath:
    return SamplePath(grid, np.concatenate(([0.0], np.cumsum(increments))))


def simulate_channel(x_path: SamplePath, w_path: SamplePath, level: float = 1.0) -> SamplePath:
    """
    Output of dY = level * X dt + dW

    Args:
        x_path: Input process
        w_path: Driving noise (standard, or with variance rate level for sheet slices)
        level: Signal to noise ratio multiplying the drift

    Returns:
        Y on the shared grid, Y_0 = 0
    """
    grid = shared_grid(x_path, w_path)
    return _integrate(grid, level * x_path.left * grid.step + w_path.increments)


def piecewise_path(values, grid: TimeGrid) -> SamplePath:
    """X_t holding values[i] on the i-th of len(values) equal segments"""
    return SamplePath(grid, piecewise_values(values, grid))


def segment_values(x_path: SamplePath, segments: int) -> np.ndarray:
    """
    Values of a path that is constant on each of `segments` aligned segments

    Raises:
        IdentityError: if the path is not piecewise constant on those segments
    """
    try:
        length = segment_length(x_path.grid, segments)
    except ValueError as e:
        raise IdentityError(str(e)) from e
    blocks = x_path.left.reshape(segments, length)
    if not np.all(blocks == blocks[:, :1]):
        raise IdentityError(f"input is not piecewise constant on {segments} segments")
    return blocks[:, 0].copy()


class PhiSpec(ABC):
    """Causal drift phi_t(Y_0^t, X) of a channel with feedback"""

    name: ClassVar[str]

    @abstractmethod
    def observable(self, y_values: np.ndarray) -> np.ndarray:
        """Part of the drift that is a function of the observed output"""

    def signal(self, x_path: SamplePath, y_path: SamplePath) -> SamplePath:
        """phi_t along a path"""
        return SamplePath(x_path.grid, x_path.values + self.observable(y_path.values))

    def estimate(self, xhat_path: SamplePath, y_path: SamplePath) -> SamplePath:
        """Conditional mean of phi_t; the observable part passes through unchanged"""
        return SamplePath(xhat_path.grid, xhat_path.values + self.observable(y_path.values))

    def filter_observation(self, y_path: SamplePath) -> SamplePath:
        """Y minus the integrated observable drift, i.e. the plain channel output"""
        drift = self.observable(y_path.left) * y_path.grid.step
        return SamplePath(y_path.grid, y_path.values - np.concatenate(([0.0], np.cumsum(drift))))

    def to_dict(self) -> dict:
        return {'name': self.name}


@dataclass(frozen=True)
class IdentityPhi(PhiSpec):
    """phi_t = X_t, the channel without feedback"""
    name: ClassVar[str] = 'identity'

    def observable(self, y_values):
        return np.zeros_like(y_values)

    def signal(self, x_path, y_path):
        return x_path

    def estimate(self, xhat_path, y_path):
        return xhat_path

    def filter_observation(self, y_path):
        return y_path


@dataclass(frozen=True)
class ObservableDrift(PhiSpec):
    """phi_t = X_t + b*sin(Y_t)"""
    b: float = 0.5
    name: ClassVar[str] = 'observable_drift'

    def observable(self, y_values):
        return self.b * np.sin(y_values)

    def to_dict(self):
        return {'name': self.name, 'b': self.b}


def phi_from_dict(data) -> PhiSpec:
    """Look up a feedback drift by its JSON form"""
    name = data.get('name') if isinstance(data, dict) else data
    if name == IdentityPhi.name:
        return IdentityPhi()
    if name == ObservableDrift.name:
        try:
            return ObservableDrift(float(data.get('b', 0.5)) if isinstance(data, dict) else 0.5)
        except (TypeError, ValueError) as e:
            raise IdentityError(f"invalid feedback drift {data!r}: {e}") from e
    raise IdentityError(f"unknown feedback drift: {data!r}")


def simulate_feedback_channel(phi: PhiSpec, x_path: SamplePath, w_path: SamplePath) -> SamplePath:
    """Output of dY = phi_t(Y_0^t, X) dt + dW, generated step by step"""
    if isinstance(phi, IdentityPhi):
        return simulate_channel(x_path, w_path)
    grid = shared_grid(x_path, w_path)
    dt = grid.step
    dw = w_path.increments
    x = x_path.left
    y = np.zeros(grid.n_steps + 1)
    for k in range(grid.n_steps):
        y[k + 1] = y[k] + (x[k] + float(phi.observable(y[k]))) * dt + dw[k]
    return SamplePath(grid, y)


class ReversedChannel(NamedTuple):
    """Time-reversed input, output and noise"""
    x: SamplePath
    y: SamplePath
    noise: SamplePath


def _reverse_intervals(path: SamplePath) -> SamplePath:
    # interval k of the reversed path is interval n-1-k of the original
    left = path.left[::-1]
    return SamplePath(path.grid, np.append(left, left[-1]))


def _reverse_increments(path: SamplePath) -> SamplePath:
    # R_t = P_T - P_{T-t}
    return SamplePath(path.grid, path.values[-1] - path.values[::-1])


def time_reverse(x_path: SamplePath, y_path: SamplePath, w_path: SamplePath,
                 segments: int = 1) -> ReversedChannel:
    """
    X~_t = X_{T-t}, Y~_t = Y_T - Y_{T-t}, B_t = W_T - W_{T-t}

    Only inputs that are constant on `segments` aligned segments are accepted,
    and y_path must be the output of dY = X dt + dW for the given input and
    noise; then Y~ is the output of the reversed channel dY~ = X~ dt + dB.

    Raises:
        IdentityError: if the input is not piecewise constant or y_path is not
            the channel output of x_path and w_path
    """
    grid = shared_grid(x_path, y_path, w_path)
    segment_values(x_path, segments)
    residual = y_path.increments - (x_path.left * grid.step + w_path.increments)
    scale = 1.0 + float(np.max(np.abs(y_path.values)))
    if float(np.max(np.abs(residual))) > REVERSAL_TOLERANCE * scale:
        raise IdentityError("output is not the channel driven by this input and noise")
    return ReversedChannel(_reverse_intervals(x_path), _reverse_increments(y_path), _reverse_increments(w_path))

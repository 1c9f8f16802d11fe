"""
Test Configuration
"""

import json
import pytest
import tempfile
import shutil
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from core.paths import RngSeed, make_uniform_grid
from core.priors import Gaussian, GaussianMixture, PointMass, TwoPoint


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests"""
    temp_path = Path(tempfile.mkdtemp())
    yield temp_path
    shutil.rmtree(temp_path, ignore_errors=True)


@pytest.fixture
def seed():
    """A fixed path seed"""
    return RngSeed(12345, 7)


@pytest.fixture
def unit_grid():
    """[0, 1] in 512 steps"""
    return make_uniform_grid(0.0, 1.0, 512)


@pytest.fixture
def standard_gaussian():
    return Gaussian(0.0, 1.0)


@pytest.fixture
def priors():
    """One prior of each kind, keyed by kind"""
    return {prior.kind: prior for prior in [
        Gaussian(0.5, 2.0),
        TwoPoint(-1.0, 2.0, 0.3),
        GaussianMixture(((0.4, -1.0, 0.5), (0.6, 1.5, 0.25))),
        PointMass(0.7),
    ]}


@pytest.fixture
def suite_config(temp_dir):
    """Write a JSON config and return its path"""
    def write(name='run', **values):
        path = temp_dir / f"{name}.json"
        path.write_text(json.dumps(values))
        return path
    return write

import os

import numpy as np
import pytest

# Keep test runs from writing log files; set before any project module is imported
os.environ['PDLEARN_LOG_DIR'] = ''


def pytest_addoption(parser):
    parser.addoption('--run-slow', action='store_true', default=False,
                     help='run ensemble-scale tests marked slow')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--run-slow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --run-slow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def interior_pairs(rng):
    """Factory for n random (x, y) memory-one pairs away from the boundary."""
    def draw(n, low=0.05, high=0.95):
        return rng.uniform(low, high, size=(n, 2, 4))
    return draw

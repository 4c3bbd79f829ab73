# This file is used to configure the behavior of pytest when using the Astropy
# test infrastructure.

import numpy as np
import pytest

try:
    from pytest_astropy_header.display import PYTEST_HEADER_MODULES, TESTED_VERSIONS
except ImportError:
    try:
        # older Astropy versions ship the header plugin themselves
        from astropy.tests.plugins.display import PYTEST_HEADER_MODULES, TESTED_VERSIONS
    except ImportError:
        PYTEST_HEADER_MODULES, TESTED_VERSIONS = {}, {}

try:
    PYTEST_HEADER_MODULES['Numba'] = 'numba'
    PYTEST_HEADER_MODULES['joblib'] = 'joblib'
    del PYTEST_HEADER_MODULES['h5py']
    del PYTEST_HEADER_MODULES['Pandas']
except KeyError:
    pass

# display the package version rather than the Astropy version in the header
try:
    from .version import version
except ImportError:
    version = 'dev'
TESTED_VERSIONS['satclassifier'] = version


def pytest_addoption(parser):
    parser.addoption('--run-slow', action='store_true', default=False,
                     help='run the long benchmark reproductions')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--run-slow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --run-slow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def blobs():
    """Three well separated 2-d clusters of 20 points, labels 0, 1, 2."""
    generator = np.random.default_rng(7)
    centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
    points = np.vstack([center + 0.5 * generator.standard_normal((20, 2)) for center in centers])
    labels = np.repeat(np.arange(3), 20)
    return points, labels

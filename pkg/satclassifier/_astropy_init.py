# Licensed under a 3-clause BSD style license - see LICENSE.rst

import os

from astropy.tests.runner import TestRunner

__all__ = ['__version__', '__githash__', 'test']

try:
    from .version import version as __version__
except ImportError:
    # not built with setup.py: ask the installed distribution
    try:
        from importlib.metadata import version as _distribution_version
        __version__ = _distribution_version('satclassifier')
    except Exception:
        __version__ = ''
try:
    from .version import githash as __githash__
except ImportError:
    __githash__ = ''

# self test, ``satclassifier.test()``
test = TestRunner.make_test_runner_in(os.path.dirname(__file__))

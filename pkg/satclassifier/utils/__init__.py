# Licensed under a 3-clause BSD style license - see LICENSE.rst

# This sub-module is destined for common non-package specific utility
# functions.

from contextlib import contextmanager
import time

import joblib

__all__ = ['resolve_threads', 'stopwatch']


def resolve_threads(threads=None):
    """Number of worker threads to use.

    ``None`` reads ``conf.threads``; zero or negative means all cores.
    """
    if threads is None:
        from ..config import conf
        threads = conf.threads
    threads = int(threads)
    if threads <= 0:
        return max(1, joblib.cpu_count())
    return threads


@contextmanager
def stopwatch(timings, key):
    """Accumulate the wall time of the ``with`` block into ``timings[key]``."""
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[key] = timings.get(key, 0.0) + time.perf_counter() - start

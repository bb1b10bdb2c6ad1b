#!/usr/bin/env python3
"""
Utilities for timing aoiikit stages.
"""
import logging
import time

logger = logging.getLogger('aoiikit.timers')


class _benchmark(object):
    """
    Context object for timing arbitrary blocks of code. The elapsed time
    is sent to the ``aoiikit.timers`` logger at debug level.
    """
    def __init__(self, message):
        self.message = message
        self.elapsed = None

    def __enter__(self):
        self.time = time.perf_counter()
        return self

    def __exit__(self, *args):  # noqa: U100
        self.elapsed = time.perf_counter() - self.time
        logger.debug('%s: %.3fs', self.message, self.elapsed)

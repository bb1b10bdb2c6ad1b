#!/usr/bin/env python3
"""
A python package for the age of incorrect information of Markov sources
on random access channels.
"""
# Import everything to top-level
from importlib import metadata as _metadata

from .config import *  # noqa: F401 F403
from .internals import timers as _timers
from .internals.warnings import (  # noqa: F401
    AoIIWarning,
    ConvergenceError,
    DegenerateChainError,
)

with _timers._benchmark('imports'):
    from .sources import *  # noqa: F401 F403
    from .analytics import *  # noqa: F401 F403
    from .simulator import *  # noqa: F401 F403
    from .oracle import *  # noqa: F401 F403
    from .optimizer import *  # noqa: F401 F403

# SCM versioning
name = 'aoiikit'
try:
    version = __version__ = _metadata.version(__name__)
except _metadata.PackageNotFoundError:
    version = __version__ = 'unknown'

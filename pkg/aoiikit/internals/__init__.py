#!/usr/bin/env python3
"""
Utilities used internally by aoiikit.
"""
import numbers

import numpy as np

from . import docstring, rcsetup, timers, warnings  # noqa: F401


# Success probability modes
GAMMA_MODES = ('exact', 'exponential')


def _not_none(*args, default=None, **kwargs):
    """
    Return the first non-``None`` value. This is used with keyword arg aliases and
    for setting default values. Use `kwargs` to issue warnings when multiple
    non-``None`` values were passed. Use `args` to just ignore extra values.
    """
    first = default
    if args and kwargs:
        raise ValueError('_not_none can only be used with args or kwargs.')
    elif args:
        for arg in args:
            if arg is not None:
                first = arg
                break
    elif kwargs:
        for name, arg in list(kwargs.items()):
            if arg is not None:
                first = arg
                break
        kwargs = {name: arg for name, arg in kwargs.items() if arg is not None}
        if len(kwargs) > 1:
            warnings._warn_aoii(
                f'Got conflicting or duplicate keyword args: {kwargs}. '
                'Using the first one.'
            )
    return first


def _to_prob(value, name='probability', tol=None):
    """
    Return `value` as a float in [0, 1]. Values outside the interval by no
    more than :rc:`prob.tol` are clamped, anything further out is an error.
    """
    if tol is None:
        from ..config import rc
        tol = rc['prob.tol']
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, numbers.Real):
        raise ValueError(f'Invalid {name} {value!r}. Must be a real number.')
    value = float(value)
    if not np.isfinite(value) or value < -tol or value > 1 + tol:
        raise ValueError(f'Invalid {name} {value!r}. Must lie in [0, 1].')
    return min(max(value, 0.0), 1.0)


def _to_count(value, name='count', minimum=1):
    """
    Return `value` as an integer no smaller than `minimum`. Integral floats
    such as ``1e6`` read from text files are accepted.
    """
    if isinstance(value, (bool, np.bool_)):
        raise ValueError(f'Invalid {name} {value!r}. Must be an integer.')
    if isinstance(value, numbers.Real) and not isinstance(value, numbers.Integral):
        if not float(value).is_integer():
            raise ValueError(f'Invalid {name} {value!r}. Must be an integer.')
        value = int(value)
    if not isinstance(value, numbers.Integral):
        raise ValueError(f'Invalid {name} {value!r}. Must be an integer.')
    value = int(value)
    if value < minimum:
        raise ValueError(f'Invalid {name} {value!r}. Must be >= {minimum}.')
    return value


def _to_mode(mode):
    """
    Return a valid success probability mode, falling back to :rc:`gamma.mode`.
    """
    if mode is None:
        from ..config import rc
        mode = rc['gamma.mode']
    if mode not in GAMMA_MODES:
        raise ValueError(
            f'Invalid gamma mode {mode!r}. Options are '
            + ', '.join(map(repr, GAMMA_MODES)) + '.'
        )
    return mode


def _to_state(value, name='critical_state'):
    """
    Return a valid binary source state.
    """
    if isinstance(value, (bool, np.bool_)) or value not in (0, 1):
        raise ValueError(f'Invalid {name} {value!r}. Must be 0 or 1.')
    return int(value)

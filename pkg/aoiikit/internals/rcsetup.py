#!/usr/bin/env python3
"""
Default aoiikit configuration settings and validators for
`RcConfigurator` assignments.
"""
import numbers

import numpy as np

from . import warnings

# Shared defaults
GAMMA_MODE = 'exponential'
PROB_TOL = 1e-12
TAIL_MASS = 1e-12  # neglected mass of truncated geometric sums

# Settings are stored as {key: (default, description)}
_rc_aoiikit = {
    # Channel model
    'gamma.mode': (
        GAMMA_MODE,
        "Success probability model used by the closed forms. ``'exact'`` uses "
        "(1 - rho)^(M - 1) and ``'exponential'`` uses exp(-rho M)."
    ),
    'prob.tol': (
        PROB_TOL,
        'Probabilities outside [0, 1] by less than this are clamped, '
        'larger excursions raise an error.'
    ),

    # Brute-force verifiers
    'oracle.tol': (
        1e-13,
        'L1 residual ||vP - v|| at which power iteration stops.'
    ),
    'oracle.maxiter': (
        64,
        'Maximum number of matrix squarings used by power iteration.'
    ),
    'oracle.cutoff': (
        None,
        'Number of terms in truncated geometric sums. If ``None``, the smallest '
        f'cutoff with neglected tail mass below {TAIL_MASS} is used.'
    ),
    'oracle.slots': (
        1_000_000,
        'Number of slots simulated by the single-source chain sampler.'
    ),
    'oracle.seed': (
        0,
        'Seed for the single-source chain sampler.'
    ),

    # Network simulator
    'simulator.block': (
        2 ** 16,
        'Largest number of slots advanced at once by the simulator. Blocks '
        'also end at the warmup end and at batch boundaries.'
    ),
    'simulator.maxcells': (
        2 ** 20,
        'Upper bound on the node count and on the expected number of node '
        'events buffered per block. The block is shortened for busy channels.'
    ),
    'simulator.maxhorizon': (
        10 ** 10,
        'Largest accepted simulation horizon in slots.'
    ),
    'simulator.batches': (
        32,
        'Number of non-overlapping batches used for batch-means '
        'confidence intervals.'
    ),
    'simulator.minbatches': (
        10,
        'Minimum number of batches needed to report a confidence interval.'
    ),
    'simulator.warmup': (
        None,
        'Warmup slots discarded before measuring. If ``None``, '
        'max(10000, 10 / q_bar) is used.'
    ),

    # Access probability optimizer
    'optimizer.linpoints': (
        17,
        'Number of linearly spaced grid points in [0, span / M].'
    ),
    'optimizer.logpoints': (
        33,
        'Number of logarithmically spaced grid points in [span / M, 1].'
    ),
    'optimizer.span': (
        4.0,
        'Extent of the linear part of the search grid in units of 1 / M.'
    ),
    'optimizer.tol': (
        1e-6,
        'Parameter tolerance of the golden-section refinement.'
    ),
    'optimizer.rounds': (
        20,
        'Maximum number of coordinate-wise refinement rounds.'
    ),
    'optimizer.collapse': (
        1.5,
        'Distance from (1 / M, 1 / M), in units of 1 / M, within which an '
        'optimum is reported as collapsed onto the random policy.'
    ),

    # Command line tools
    'output.digits': (
        9,
        'Significant digits of floating point numbers written to CSV files.'
    ),
    'check.tolerance': (
        0.05,
        'Relative tolerance used by ``aoiikit simulate --check``.'
    ),
    'cli.threads': (
        1,
        'Number of worker processes used for sweeps.'
    ),
}


def _positive_int(value):
    return isinstance(value, numbers.Integral) and value > 0


def _optional(func):
    return lambda value: value is None or func(value)


# Simple validators for settings that feed numerical code
_rc_validators = {
    'gamma.mode': lambda value: value in ('exact', 'exponential'),
    'prob.tol': lambda value: isinstance(value, numbers.Real) and 0 <= value < 1e-3,
    'oracle.tol': lambda value: isinstance(value, numbers.Real) and value > 0,
    'optimizer.tol': lambda value: isinstance(value, numbers.Real) and value > 0,
    'check.tolerance': lambda value: isinstance(value, numbers.Real) and value > 0,
    'oracle.cutoff': _optional(_positive_int),
    'simulator.warmup': _optional(
        lambda value: isinstance(value, numbers.Real) and value >= 0
    ),
}
for _key in (
    'oracle.maxiter', 'oracle.slots', 'simulator.block', 'simulator.maxcells',
    'simulator.maxhorizon', 'simulator.batches', 'simulator.minbatches',
    'optimizer.linpoints', 'optimizer.logpoints', 'optimizer.rounds',
    'output.digits', 'cli.threads',
):
    _rc_validators[_key] = _positive_int
del _key

# Various helper dicts
_rc_aoiikit_default = {
    key: value for key, (value, *_) in _rc_aoiikit.items()
}

_rc_nodots = {
    name.replace('.', ''): name for name in _rc_aoiikit_default
}

_rc_categories = {
    '.'.join(name.split('.')[:i + 1])
    for name in _rc_aoiikit_default
    for i in range(len(name.split('.')) - 1)
}


def _get_default_param(key):
    """
    Get the default parameter. This is used for the :rc: role when compiling docs.
    """
    try:
        return _rc_aoiikit_default[key]
    except KeyError:
        raise KeyError(f'Invalid key {key!r}.') from None


def _validate_param(key, value):
    """
    Return the value if it passes the validator registered for `key`.
    """
    if isinstance(value, np.generic):
        value = value.item()
    validator = _rc_validators.get(key)
    if validator is not None and not validator(value):
        raise ValueError(f'Invalid value {value!r} for rc setting {key!r}.')
    return value


def _gen_rst_table():
    """
    Return the settings in an RST-style table.
    """
    # Initial stuff
    colspace = 2  # spaces between each column
    descrips = tuple(descrip for _, descrip in _rc_aoiikit.values())
    keylen = len(max((*_rc_aoiikit, 'Key'), key=len)) + 4  # for literal backticks
    vallen = len(max((*descrips, 'Description'), key=len))
    divider = '=' * keylen + ' ' * colspace + '=' * vallen + '\n'
    header = 'Key' + ' ' * (keylen - 3 + colspace) + 'Description\n'

    # Build table
    string = divider + header + divider
    for key, (_, descrip) in _rc_aoiikit.items():
        spaces = ' ' * (keylen - (len(key) + 4) + colspace)
        string += f'``{key}``{spaces}{descrip}\n'

    string = string + divider
    return '.. rst-class:: aoiikit-rctable\n\n' + string.strip()


def _gen_yaml_table(rcdict, comment=True, description=True):
    """
    Return the settings as a tabulated ``key: value`` table readable
    by `RcConfigurator.load_file`.
    """
    NoneType = type(None)
    prefix = '# ' if comment else ''
    data = []
    for key, pair in rcdict.items():
        # Optionally append description
        if isinstance(pair, tuple):
            value = pair[0]
            descrip = '# ' + pair[1] if description else ''
        else:
            value = pair
            descrip = ''

        # Translate object to string
        if isinstance(value, (str, numbers.Number, NoneType)):
            value = str(value)
        else:
            warnings._warn_aoii(
                f'Failed to write rc setting {key} = {value!r}. Must be string, '
                'number, or None.'
            )
            continue
        data.append((key, value, descrip))

    # Generate string
    if not data:
        return ''
    string = ''
    keylen = len(max((tup[0] for tup in data), key=len))
    vallen = len(max((tup[1] for tup in data), key=len))
    for key, value, descrip in data:
        space1 = ' ' * (keylen - len(key) + 1)
        space2 = ' ' * (vallen - len(value) + 2) if descrip else ''
        string += f'{prefix}{key}:{space1}{value}{space2}{descrip}\n'

    return string.strip()

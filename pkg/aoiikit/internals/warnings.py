#!/usr/bin/env python3
"""
Custom warning and exception classes.
"""
import re
import sys
import warnings

AoIIWarning = type('AoIIWarning', (UserWarning,), {})

# Raised when the joint (state, estimate) chain has no stationary regime
DegenerateChainError = type('DegenerateChainError', (ValueError,), {})

# Raised when a brute-force iteration runs out of steps
ConvergenceError = type('ConvergenceError', (RuntimeError,), {})


def _warn_aoii(message):
    """
    Emit an `AoIIWarning` and show the stack level outside of aoiikit.
    """
    frame = sys._getframe()
    stacklevel = 1
    while True:
        if frame is None:
            break  # when called in embedded context may hit frame is None
        if not re.match(r'\Aaoiikit\.', frame.f_globals.get('__name__', '')):
            break
        frame = frame.f_back
        stacklevel += 1
    warnings.warn(message, AoIIWarning, stacklevel=stacklevel)

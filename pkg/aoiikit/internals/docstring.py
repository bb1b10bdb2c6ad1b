#!/usr/bin/env python3
"""
Utilities for sharing parameter descriptions between aoiikit docstrings.
"""
import inspect

#: Dictionary of docstring snippets.
snippets = {}


def add_snippets(obj):
    """
    Decorator that dedents docstrings with `inspect.getdoc` and fills
    ``%(name)s`` placeholders from the global `snippets` dictionary. Percent
    substitution is used so that snippet keys may contain dots.
    """
    parts = {key: value.strip() for key, value in snippets.items()}
    if isinstance(obj, str):
        return obj % parts
    doc = inspect.getdoc(obj)
    if doc:
        obj.__doc__ = doc % parts
    return obj

#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# (C)2025 L2T-Reflect contributors

"""
Console output and small validation helpers shared by every L2T module.
"""

import sys

import numpy as np

import L2T.miscellaneous as miscellaneous

_ = miscellaneous.i18n

#: Disable message coloring when set to True, set by --no-color
no_color = False

try:
    import termcolor
except ImportError:
    print("Module termcolor is not installed, text coloring disabled")
    no_color = True

#: Progress chatter from the numerical modules, set by --verbose
verbose = False


def print_with_color(text, color=""):
    """
    Print function
    This function takes into account no_color flag

    :param text: Text to be printed
    :param color: Color of the text
    """
    if no_color or color == "":
        sys.stdout.write(text + "\n")
    else:
        termcolor.cprint(text, color)


def check_finite(name, array):
    """
    Reject NaN and infinite entries

    Args:
        name (str): Argument name used in the error message
        array: Scalar or array-like value

    Returns:
        numpy.ndarray: The value as a float64 array
    """
    values = np.asarray(array, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError(_("{0} contains non-finite values").format(name))
    return values


def as_matrix(name, array, rows=None, cols=None):
    """
    Convert to a finite 2-D float64 array, optionally checking its shape

    Args:
        name (str): Argument name used in error messages
        array: Array-like input
        rows (int, optional): Required row count
        cols (int, optional): Required column count

    Returns:
        numpy.ndarray: 2-D float64 array
    """
    matrix = np.asarray(array, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError(_("{0} must be a 2-D matrix, got shape {1}").format(name, matrix.shape))
    if rows is not None and matrix.shape[0] != rows:
        raise ValueError(_("{0} must have {1} rows, got shape {2}").format(name, rows, matrix.shape))
    if cols is not None and matrix.shape[1] != cols:
        raise ValueError(_("{0} must have {1} columns, got shape {2}").format(name, cols, matrix.shape))
    return check_finite(name, matrix)


def child_seeds(seed, count):
    """
    Derive independent integer seeds for per-item work

    :param seed: Parent seed
    :param count: Number of child seeds
    :return: list of int
    """
    if count <= 0:
        return []
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def parse_csv(text, convert=str):
    """
    Split a comma separated command line value, dropping empty items
    """
    return [convert(item.strip()) for item in text.split(",") if item.strip()]

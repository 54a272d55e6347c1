"""
This module provides the default data and parameters for kregcore.

The toy data set is the six-point example from the G-Aggregate vs.
Aggregate-Neighbor comparison; it is small enough that every coreset built
from it can be checked by hand. The AR(1) parameters reproduce the synthetic
stock-price-like series used for the one-dimensional experiments.

The module provides the following functions:
* toy_points: the toy data set as (x, y) arrays
* ar1_defaults: keyword arguments for data.synth_ar1
* eval_points_for: default evaluation-cloud size for a dimension
* default_bits: Morton bit budget per dimension
* resolve_threads: worker count from a flag or the KREG_THREADS variable
"""
import logging
import os

import numpy as np

logger = logging.getLogger(__name__)

# Regression kernels are truncated at this many bandwidths when truncation
# is enabled.
TRUNCATION_MULTIPLE = 10.0

# Growth factor between consecutive progressive regions.
PROGRESSIVE_GROWTH = 1.5

# Randomized constructions are repeated this many times and their errors
# averaged.
REPETITIONS = 10

EVAL_POINTS_1D = 128000
EVAL_POINTS_2D = 512000

THREADS_ENV = 'KREG_THREADS'


def toy_points():
    """Return the toy data set {(1,100),(2,40),(3,0),(15,50),(16,50),(17,50)}.

    :return: a (x, y) tuple where x is a (6, 1) array and y a (6,) array.
    """
    x = np.array([[1.0], [2.0], [3.0], [15.0], [16.0], [17.0]])
    y = np.array([100.0, 40.0, 0.0, 50.0, 50.0, 50.0])
    return x, y


def ar1_defaults():
    """Return the AR(1) parameter set y_i = c + phi*y_(i-1) + N(0, noise)
    used for the synthetic one-dimensional experiments (one million points).
    """
    return {'n': 1000000, 'c': 0.0, 'phi': 1.0, 'y0': 10.0,
            'noise_sigma': 1.0}


def eval_points_for(d):
    """Return the default number of evaluation points for dimension d."""
    return EVAL_POINTS_1D if d == 1 else EVAL_POINTS_2D


def default_bits(d):
    """Return the number of quantization bits per dimension used for Morton
    keys: 21 bits up to d=3, 10 bits up to d=6, and otherwise as many as fit
    into 64 bits.
    """
    if d <= 3:
        return 21
    if d <= 6:
        return 10
    return 64 // d


def resolve_threads(threads=None):
    """Return the worker count to use.

    :param threads: (int or None) explicit count, e.g. from --threads.
    :return: threads if given, else the KREG_THREADS environment variable,
    else 1.
    """
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning('ignoring %s=%r (not an integer)', THREADS_ENV, env)
    return 1

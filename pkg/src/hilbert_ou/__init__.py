"""Gaussian calculus on a spectrally truncated Hilbert space.

OU semigroup, commutator of smoothing and transport, Gaussian quadratic-form
identities and a characteristics solver for the continuity equation, each
paired with an independent numerical check.
"""

from .errors import *  # noqa: F401,F403
from .estimation import Estimate
from .spectral import (
    OUOperators,
    SampleBatch,
    Spectrum,
    build_spectrum,
    ou_operators,
    rotate_pair,
    sample_gaussian,
)

__version__ = "0.1.0"

"""Monte Carlo and quadrature bookkeeping.

Every stochastic or quadrature result in the package is an :class:`Estimate`:
a value together with a Monte Carlo standard error ``se`` and a deterministic
quadrature error bound ``bound``.  Reductions are done in a fixed order so that
results do not depend on how work was chunked.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss


@dataclass(frozen=True)
class Estimate:
    value: np.ndarray | float
    se: np.ndarray | float = 0.0
    bound: np.ndarray | float = 0.0

    @property
    def err(self):
        """Total error scale: standard error plus quadrature bound."""
        return np.asarray(self.se) + np.asarray(self.bound)

    def within(self, target, k=3.0, extra=0.0):
        """True where ``|value - target| <= k * err + extra``."""
        return np.abs(np.asarray(self.value) - target) <= k * self.err + extra

    def __float__(self):
        return float(self.value)

    def __add__(self, other):
        if not isinstance(other, Estimate):
            return Estimate(np.asarray(self.value) + other, self.se, self.bound)
        return Estimate(
            np.asarray(self.value) + other.value,
            np.hypot(self.se, other.se),
            np.asarray(self.bound) + other.bound,
        )

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return Estimate(-np.asarray(self.value), self.se, self.bound)

    def scale(self, c):
        c = abs(c)
        return Estimate(np.asarray(self.value) * c, np.asarray(self.se) * c, np.asarray(self.bound) * c)


def combined_err(*estimates):
    """Standard errors added in quadrature, quadrature bounds added linearly."""
    se = np.sqrt(sum(np.asarray(e.se) ** 2 for e in estimates))
    bound = sum(np.asarray(e.bound) for e in estimates)
    return se + bound


def mean_se(values, axis=0, log_weights=None):
    """Sample mean and its standard error along ``axis``.

    With ``log_weights`` (importance sampling, exact density ratios) the
    estimator is the plain average of ``w * values``.
    """
    values = np.asarray(values, dtype=float)
    if log_weights is not None:
        w = np.exp(np.asarray(log_weights, dtype=float))
        shape = [1] * values.ndim
        shape[axis] = -1
        values = values * w.reshape(shape)
    m = values.shape[axis]
    mean = values.mean(axis=axis)
    if m < 2:
        return Estimate(mean, np.full_like(mean, np.inf))
    se = values.std(axis=axis, ddof=1) / np.sqrt(m)
    return Estimate(mean, se)


def trapezoid_weights(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("time grid must be a nonempty 1-d array")
    if grid.size == 1:
        return np.zeros(1)
    h = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def simpson_weights(n, a=0.0, b=1.0):
    """Composite Simpson weights on ``n`` (odd) uniform nodes of [a, b]."""
    if n < 3 or n % 2 == 0:
        raise ValueError("Simpson's rule needs an odd node count >= 3")
    h = (b - a) / (n - 1)
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


@lru_cache(maxsize=64)
def _gh_1d(k):
    x, w = hermegauss(k)
    return x, w / w.sum()


def gauss_hermite_grid(levels, dims):
    """Tensor Gauss-Hermite rule for ``N(0, I_dims)``.

    Returns nodes of shape ``(levels**dims, dims)`` and weights summing to 1.
    """
    x, w = _gh_1d(int(levels))
    if dims == 0:
        return np.zeros((1, 0)), np.ones(1)
    mesh = np.meshgrid(*([x] * dims), indexing="ij")
    wmesh = np.meshgrid(*([w] * dims), indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)
    weights = np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1)
    return nodes, weights


def lp_norm(values, time_weights, p, log_weights=None):
    """Estimate of ``(int_0^T E|h(t, X)|^p dt)^(1/p)``.

    ``values`` has shape ``(n_times, m)``: the integrand at each time node for
    the same ``m`` sample points.  Per-sample time integrals are formed first,
    so correlation across time nodes is accounted for in the standard error.
    The standard error of the norm comes from the delta method.
    """
    values = np.abs(np.asarray(values, dtype=float))
    tw = np.asarray(time_weights, dtype=float)
    per_sample = np.tensordot(tw, values**p, axes=(0, 0))
    integral = mean_se(per_sample, log_weights=log_weights)
    return power_estimate(integral, 1.0 / p)


def power_estimate(est, q):
    """``est ** q`` with delta-method standard error."""
    v = float(est.value)
    if v <= 0.0:
        return Estimate(0.0, float(est.se) ** q if est.se else 0.0)
    val = v**q
    se = abs(q) * v ** (q - 1.0) * float(est.se)
    bound = abs(q) * v ** (q - 1.0) * float(est.bound)
    return Estimate(val, se, bound)

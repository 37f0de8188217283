"""Diagonal covariance spectrum, the Gaussian measure N_Q and the OU operators.

Everything lives in the eigenbasis of Q truncated to ``n`` modes, so Q, T_t,
S_t and Q_t are stored as per-mode arrays.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    EmptyBatchError,
    InvalidSpectrumError,
    OrderingError,
    ShapeError,
    SingularModeError,
)

CHUNK_ROWS = 1 << 14
WORKERS_ENV = "HILBERT_OU_WORKERS"


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues ``lambdas`` of Q, non-increasing and strictly positive."""

    lambdas: np.ndarray

    def __post_init__(self):
        lam = _frozen(self.lambdas)
        if lam.ndim != 1 or lam.size == 0:
            raise InvalidSpectrumError("spectrum must be a nonempty 1-d list")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise InvalidSpectrumError("eigenvalues must be finite and strictly positive")
        if np.any(np.diff(lam) > 0):
            raise OrderingError("eigenvalues must be listed in non-increasing order")
        object.__setattr__(self, "lambdas", lam)

    @property
    def n(self):
        return self.lambdas.size

    @property
    def trace(self):
        return float(self.lambdas.sum())

    def head(self, d):
        """Spectrum of the first ``d`` modes."""
        return Spectrum(self.lambdas[:d])

    def __hash__(self):
        return hash(self.lambdas.tobytes())

    def __eq__(self, other):
        return isinstance(other, Spectrum) and np.array_equal(self.lambdas, other.lambdas)


def build_spectrum(kind="power-law", n=None, gamma=2.0, values=None):
    """Build a :class:`Spectrum`.

    ``kind="power-law"`` gives ``lambda_k = k**-gamma`` for ``k = 1..n``;
    ``kind="explicit"`` takes ``values`` as given (they are not re-sorted).
    """
    if kind == "power-law":
        if n is None or int(n) < 1:
            raise InvalidSpectrumError("truncation dimension n must be >= 1")
        if not gamma > 0:
            raise InvalidSpectrumError("power-law exponent gamma must be > 0")
        k = np.arange(1, int(n) + 1, dtype=float)
        return Spectrum(k ** (-float(gamma)))
    if kind == "explicit":
        if values is None:
            raise InvalidSpectrumError("explicit spectrum needs values")
        values = np.asarray(values, dtype=float)
        if n is not None and values.size != int(n):
            raise InvalidSpectrumError(f"expected {n} eigenvalues, got {values.size}")
        return Spectrum(values)
    raise InvalidSpectrumError(f"unknown spectrum kind {kind!r}")


@dataclass(frozen=True)
class OUOperators:
    """Per-mode actions of T_t, S_t and Q_t at time ``t``."""

    t: float
    lambdas: np.ndarray
    tau: np.ndarray
    sigma: np.ndarray
    qt: np.ndarray
    alpha: np.ndarray

    @property
    def n(self):
        return self.tau.size

    def head(self, d):
        return OUOperators(
            self.t, self.lambdas[:d], self.tau[:d], self.sigma[:d], self.qt[:d], self.alpha[:d]
        )

    def t_over_s(self):
        """T_t / S_t per mode; raises if some S_t underflows."""
        bad = np.flatnonzero(self.sigma < 1e-150)
        if bad.size:
            raise SingularModeError(int(bad[0]) + 1)
        return self.tau / self.sigma

    def qinv_t_over_s(self):
        """Q^{-1} T_t / S_t = Q_t^{-1} T_t S_t per mode."""
        return self.t_over_s() / self.lambdas


def ou_operators(spec, t):
    t = float(t)
    if not t >= 0:
        raise DomainError(f"time must be nonnegative, got {t}")
    lam = spec.lambdas
    ratio = t / lam
    tau = np.exp(-0.5 * ratio)
    # 1 - tau^2 without cancellation for small t
    sigma = np.sqrt(-np.expm1(-ratio))
    return OUOperators(
        t=t,
        lambdas=lam,
        tau=_frozen(tau),
        sigma=_frozen(sigma),
        qt=_frozen(lam * sigma**2),
        alpha=_frozen(0.5 / lam),
    )


@dataclass(frozen=True)
class SampleBatch:
    spectrum: Spectrum
    m: int
    seed: int
    data: np.ndarray
    log_weights: np.ndarray | None = None
    inflation: float = 1.0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def dims(self):
        return self.data.shape[1]


def _workers(workers):
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, int(workers))


def _chunk(seed, index, rows, sd):
    ss = np.random.SeedSequence(seed, spawn_key=(index,))
    rng = np.random.Generator(np.random.PCG64(ss))
    # column-major draw: asking for fewer coordinates yields a prefix of the same stream
    return rng.standard_normal((len(sd), rows)).T * sd


def sample_gaussian(spec, m, seed, dims=None, inflation=1.0, workers=None):
    """Draw ``m`` points from N_Q (or from N_{inflation*Q} with importance weights).

    Chunk ``c`` of ``CHUNK_ROWS`` rows uses ``SeedSequence(seed, spawn_key=(c,))``,
    so the batch is identical for any worker count.  Drawing only the first
    ``dims`` coordinates gives exactly the leading columns of the full batch.
    """
    m = int(m)
    if m < 1:
        raise EmptyBatchError("sample count must be >= 1")
    dims = spec.n if dims is None else int(dims)
    if not 1 <= dims <= spec.n:
        raise ShapeError(f"dims must lie in [1, {spec.n}]")
    sd = np.sqrt(spec.lambdas[:dims] * float(inflation))
    starts = range(0, m, CHUNK_ROWS)
    jobs = [(int(seed), i, min(CHUNK_ROWS, m - s0), sd) for i, s0 in enumerate(starts)]
    nw = _workers(workers)
    if nw > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(nw) as ex:
            parts = list(ex.map(lambda a: _chunk(*a), jobs))
    else:
        parts = [_chunk(*a) for a in jobs]
    data = np.concatenate(parts, axis=0)
    data.setflags(write=False)
    log_w = None
    if inflation != 1.0:
        kappa = float(inflation)
        quad = np.sum(data**2 / spec.lambdas[:dims], axis=1)
        log_w = 0.5 * dims * np.log(kappa) - 0.5 * (1.0 - 1.0 / kappa) * quad
    return SampleBatch(spec, m, int(seed), data, log_w, float(inflation))


def rotate_pair(x, y, ops):
    """Apply the orthogonal map (x, y) -> (T x + S y, -S x + T y).

    The last axis holds the leading modes; it may be shorter than the full
    truncation, in which case only those modes are rotated.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ShapeError(f"x and y shapes differ: {x.shape} vs {y.shape}")
    d = x.shape[-1]
    if d > ops.n:
        raise ShapeError(f"points have {d} coordinates, spectrum has {ops.n}")
    tau, sigma = ops.tau[:d], ops.sigma[:d]
    return tau * x + sigma * y, -sigma * x + tau * y

"""The OU semigroup P_eps evaluated by kernel formulas.

Two routes are provided and kept independent of each other:

* Mehler form  ``P_eps u(x) = E_y u(T x + S y)``, ``y ~ mu``;
* density form ``P_eps u(x) = E_y u(y) rho(eps, x, y)``.

Inner Gaussian integrals run either by Monte Carlo or by tensor Gauss-Hermite
quadrature over the leading modes (Monte Carlo over the rest).  Only the modes a
cylinder function actually depends on are integrated; the remaining factors of
the kernel integrate to one exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import AccuracyError, DomainError, ShapeError
from .estimation import Estimate, gauss_hermite_grid
from .spectral import ou_operators, sample_gaussian

MAX_GH_MODES = 6
MAX_GH_LEVELS = 20


@dataclass(frozen=True)
class QuadratureSpec:
    """How to integrate against ``mu`` restricted to the leading modes.

    ``method="monte-carlo"`` uses ``m`` samples from ``seed``;
    ``method="gauss-hermite"`` uses ``levels`` nodes per mode on the first
    ``modes`` modes and, when more modes are needed, ``rest_samples`` Monte
    Carlo draws for the others.
    """

    method: str = "monte-carlo"
    m: int = 100_000
    seed: int = 0
    levels: int = 16
    modes: int = 2
    rest_samples: int = 256
    se_rel_tol: float = 0.1
    error_estimate: bool = True

    def __post_init__(self):
        if self.method not in ("monte-carlo", "gauss-hermite"):
            raise ValueError(f"unknown quadrature method {self.method!r}")
        if self.method == "gauss-hermite":
            if not 1 <= self.modes <= MAX_GH_MODES:
                raise ValueError(f"Gauss-Hermite retains at most {MAX_GH_MODES} modes")
            if not 2 <= self.levels <= MAX_GH_LEVELS:
                raise ValueError(f"Gauss-Hermite uses at most {MAX_GH_LEVELS} nodes per mode")

    def with_seed(self, seed):
        return QuadratureSpec(**{**self.__dict__, "seed": int(seed)})


MC = QuadratureSpec


def gh(levels=16, modes=2, error_estimate=True, rest_samples=256, seed=0):
    return QuadratureSpec(
        "gauss-hermite", levels=levels, modes=modes, error_estimate=error_estimate,
        rest_samples=rest_samples, seed=seed,
    )


# ---------------------------------------------------------------------------
# generic Gaussian expectation


def _gh_nodes(spec, d, q, levels):
    r = min(d, q.modes)
    grid, w = gauss_hermite_grid(levels, r)
    grid = grid * np.sqrt(spec.lambdas[:r])
    if d == r:
        return grid, w, 1
    rest = sample_gaussian(spec, q.rest_samples, q.seed, dims=d).data[:, r:d]
    R, G = rest.shape[0], grid.shape[0]
    Y = np.empty((R, G, d))
    Y[:, :, :r] = grid
    Y[:, :, r:] = rest[:, None, :]
    return Y.reshape(R * G, d), np.tile(w, R) * 1.0, R


def expectation(integrand, spec, d, q):
    """``E_y integrand(y)`` for ``y ~ N(0, diag(lambda_1..lambda_d))``.

    ``integrand`` maps nodes of shape ``(K, d)`` to values of shape ``(K, ...)``.
    """
    if q.method == "monte-carlo":
        Y = sample_gaussian(spec, q.m, q.seed, dims=d).data
        vals = np.asarray(integrand(Y), dtype=float)
        mean = vals.mean(axis=0)
        se = vals.std(axis=0, ddof=1) / np.sqrt(vals.shape[0])
        return Estimate(mean, se)

    def run(levels):
        Y, w, R = _gh_nodes(spec, d, q, levels)
        vals = np.asarray(integrand(Y), dtype=float)
        weighted = np.tensordot(w, vals, axes=(0, 0)) if R == 1 else None
        if R == 1:
            return weighted, None
        per = np.einsum("rg,rg...->r...", w.reshape(R, -1), vals.reshape((R, -1) + vals.shape[1:]))
        return per.mean(axis=0), per.std(axis=0, ddof=1) / np.sqrt(R)

    value, se = run(q.levels)
    bound = 0.0
    if q.error_estimate:
        lo, _ = run(max(2, q.levels - 4))
        bound = np.abs(value - lo)
    return Estimate(value, 0.0 if se is None else se, bound)


def _broadcast_nodes(Y, x):
    """Reshape nodes ``(K, d)`` so they broadcast against points ``(..., d)``."""
    return Y.reshape((Y.shape[0],) + (1,) * (x.ndim - 1) + (Y.shape[1],))


def _lead(x, d):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] < d:
        raise ShapeError(f"points need at least {d} coordinates")
    return x[..., :d]


# ---------------------------------------------------------------------------
# Mehler and density forms


def mehler_apply(u, spec, eps, t, x, q):
    """``P_eps u(t, .)(x) = int u(t, T_eps x + S_eps y) mu(dy)``."""
    eps = float(eps)
    if eps < 0:
        raise DomainError("eps must be >= 0")
    d = u.base_dim
    xd = _lead(x, d)
    if eps == 0.0 or d == 0:
        return Estimate(u(t, xd))
    ops = ou_operators(spec, eps).head(d)

    def integrand(Y):
        x1 = ops.tau * xd + ops.sigma * _broadcast_nodes(Y, xd)
        return u(t, x1)

    return expectation(integrand, spec, d, q)


def log_density_rho(spec, eps, x, y):
    """log rho(eps, x, y) over the modes present in the last axis of x and y."""
    eps = float(eps)
    if not eps > 0:
        raise DomainError("density of P_eps needs eps > 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x.shape[-1]
    if y.shape[-1] != d or d > spec.n:
        raise ShapeError("x and y must carry the same number of modes, at most n")
    ops = ou_operators(spec, eps).head(d)
    tau, qt = ops.tau, ops.qt
    log_k = -np.sum(np.log(ops.sigma))
    expo = (-0.5 * tau**2 * x**2 + tau * x * y - 0.5 * tau**2 * y**2) / qt
    return log_k + np.sum(expo, axis=-1)


def density_rho(spec, eps, x, y):
    """Radon-Nikodym density of N(T_eps x, Q_eps) with respect to N_Q."""
    return np.exp(log_density_rho(spec, eps, x, y))


def density_apply(u, spec, eps, t, x, q):
    """``P_eps u(t, .)(x) = int u(t, y) rho(eps, x, y) mu(dy)``."""
    d = u.base_dim
    xd = _lead(x, d)
    if d == 0:
        return Estimate(u(t, xd))

    def integrand(Y):
        Yb = _broadcast_nodes(Y, xd)
        return u(t, Y)[(...,) + (None,) * (xd.ndim - 1)] * density_rho(spec, eps, xd, Yb)

    return expectation(integrand, spec, d, q)


def density_grad_x(spec, eps, x, y):
    """Q_eps^{-1} T_eps (y - T_eps x): the x-gradient of log rho."""
    x, y, ops = _pair(spec, eps, x, y)
    return ops.tau / ops.qt * (y - ops.tau * x)


def density_grad_y(spec, eps, x, y):
    """Q_eps^{-1} T_eps (x - T_eps y): the y-gradient of log rho."""
    x, y, ops = _pair(spec, eps, x, y)
    return ops.tau / ops.qt * (x - ops.tau * y)


def density_grad_x_full(spec, eps, x, y):
    """The literal x-gradient of rho (log-gradient times rho)."""
    return density_grad_x(spec, eps, x, y) * density_rho(spec, eps, x, y)[..., None]


def density_grad_y_full(spec, eps, x, y):
    return density_grad_y(spec, eps, x, y) * density_rho(spec, eps, x, y)[..., None]


def _pair(spec, eps, x, y):
    if not float(eps) > 0:
        raise DomainError("density of P_eps needs eps > 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != y.shape[-1] or x.shape[-1] > spec.n:
        raise ShapeError("x and y must carry the same number of modes, at most n")
    return x, y, ou_operators(spec, eps).head(x.shape[-1])


# ---------------------------------------------------------------------------
# gradient of P_eps u


def grad_mehler(u, spec, eps, t, x, q, form="smooth", strict=True, full=None):
    """``D P_eps u(t, .)(x)`` in the leading ``u.base_dim`` coordinates.

    ``form="smooth"``: ``T_eps E[Du(t, T x + S y)]`` (needs u in C^1).
    ``form="weight"``: ``E[u(t, T x + S y) Q_eps^{-1} T_eps S_eps y]`` (bounded
    measurable u, eps > 0).  With ``strict`` the weight form raises
    :class:`AccuracyError` when its standard error exceeds ``q.se_rel_tol`` of
    the estimate at some point.
    """
    eps = float(eps)
    if eps < 0:
        raise DomainError("eps must be >= 0")
    d = u.base_dim
    xd = _lead(x, d)
    if d == 0:
        zero = np.zeros(xd.shape[:-1] + (full or 0,))
        return Estimate(zero, np.zeros_like(zero))
    if form == "smooth":
        if eps == 0.0:
            est = Estimate(u.grad(t, xd))
        else:
            ops = ou_operators(spec, eps).head(d)

            def integrand(Y):
                return u.grad(t, ops.tau * xd + ops.sigma * _broadcast_nodes(Y, xd))

            raw = expectation(integrand, spec, d, q)
            est = Estimate(raw.value * ops.tau, raw.se * ops.tau, raw.bound * ops.tau)
    elif form == "weight":
        if not eps > 0:
            raise DomainError("the weight form of D P_eps needs eps > 0")
        ops = ou_operators(spec, eps).head(d)
        coef = ops.qinv_t_over_s()

        def integrand(Y):
            Yb = _broadcast_nodes(Y, xd)
            return u(t, ops.tau * xd + ops.sigma * Yb)[..., None] * (coef * Yb)

        est = expectation(integrand, spec, d, q)
        if strict:
            vnorm = np.linalg.norm(est.value, axis=-1)
            enorm = np.linalg.norm(np.asarray(est.err) + 0 * est.value, axis=-1)
            bad = enorm > q.se_rel_tol * vnorm
            if np.any(bad):
                raise AccuracyError(
                    f"weight-form gradient: standard error above {q.se_rel_tol:.0%} "
                    f"of the estimate at {int(np.sum(bad))} point(s)"
                )
    else:
        raise ValueError(f"unknown gradient form {form!r}")
    if full is not None:
        pad = [(0, 0)] * (est.value.ndim - 1) + [(0, full - d)]
        bound = np.asarray(est.bound) + 0 * est.value
        est = Estimate(np.pad(est.value, pad), np.pad(np.asarray(est.se) + 0 * est.value, pad), np.pad(bound, pad))
    return est


# ---------------------------------------------------------------------------
# smoothing estimate probe


def probe_points(spec, d, count=256, radius_sd=3.0):
    """Origin plus ``count`` Halton points in the ball of radius ``3 sqrt(lambda_1)``."""
    R = radius_sd * np.sqrt(spec.lambdas[0])
    h = qmc.Halton(d, scramble=False).random(count + 1)[1:]
    cube = 2.0 * h - 1.0
    linf = np.max(np.abs(cube), axis=1, keepdims=True)
    l2 = np.linalg.norm(cube, axis=1, keepdims=True)
    ball = np.where(l2 > 0, cube * linf / np.where(l2 > 0, l2, 1.0), 0.0) * R
    return np.vstack([np.zeros((1, d)), ball])


@dataclass
class SmoothingProbe:
    eps: np.ndarray
    sup: np.ndarray
    sup_se: np.ndarray
    slope: float
    constant: float
    normalized_constant: float
    u_sup: float
    warning: str = ""
    argmax: list = field(default_factory=list)


def smoothing_probe(u, spec, eps_grid, q, probes=None, form=None, chunk=32):
    """Fit ``log sup_x |D P_eps u(x)|`` against ``log eps``.

    The sup over H is replaced by a max over ``probes`` (default
    :func:`probe_points`).  ``constant`` is the fitted prefactor C of
    ``C eps^slope``; ``normalized_constant`` is ``max_eps sup sqrt(eps) / max|u|``.
    """
    eps_grid = np.asarray(eps_grid, dtype=float)
    if eps_grid.size < 5 or eps_grid.min() < 1e-3 * (1 - 1e-12) or eps_grid.max() > 1.0 + 1e-12:
        raise ValueError("smoothing probe needs >= 5 eps values inside [1e-3, 1]")
    steps = np.diff(np.log(np.sort(eps_grid)))
    if np.ptp(steps) > 1e-6 * max(1.0, np.abs(steps).max()):
        raise ValueError("eps grid must be logarithmically spaced")
    d = u.base_dim
    if probes is None:
        probes = probe_points(spec, max(d, 1))
    probes = np.asarray(probes, dtype=float)
    if form is None:
        form = "smooth" if u.differentiable else "weight"
    u_sup = float(np.max(np.abs(u(0.0, probes)))) if d else abs(float(u(0.0, probes[:1])[0]))
    sups, ses, arg = [], [], []
    for eps in eps_grid:
        norms, errs = [], []
        for i in range(0, probes.shape[0], chunk):
            est = grad_mehler(u, spec, eps, 0.0, probes[i : i + chunk], q, form=form, strict=False)
            v = np.atleast_2d(est.value)
            norms.append(np.linalg.norm(v, axis=-1))
            errs.append(np.linalg.norm(np.asarray(est.err) + 0 * v, axis=-1))
        norms = np.concatenate(norms)
        errs = np.concatenate(errs)
        k = int(np.argmax(norms))
        sups.append(norms[k])
        ses.append(errs[k])
        arg.append(probes[k])
    sups = np.array(sups)
    warning = ""
    if np.all(sups < 1e-12):
        warning = "degenerate fit: D P_eps u vanishes on all probes"
        warnings.warn(warning)
        slope, const = 0.0, 0.0
    else:
        slope, intercept = np.polyfit(np.log(eps_grid), np.log(np.maximum(sups, 1e-300)), 1)
        const = float(np.exp(intercept))
    norm_c = float(np.max(sups * np.sqrt(eps_grid)) / u_sup) if u_sup > 0 else 0.0
    return SmoothingProbe(eps_grid, sups, np.array(ses), float(slope), const, norm_c, u_sup, warning, arg)
